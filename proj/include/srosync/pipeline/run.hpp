#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "srosync/binaural/cues.hpp"
#include "srosync/pipeline/config.hpp"
#include "srosync/pipeline/manifest.hpp"
#include "srosync/room/room.hpp"
#include "srosync/spatial/spatial_filter.hpp"
#include "srosync/sro/trace.hpp"

namespace srosync::pipeline {

// Two-channel playback: loudspeaker 1 alone for solo_duration, then
// loudspeaker 2 alone, then the program material on both.
TimeSignal make_playback(const RunConfig& cfg);

// Inputs shared by every condition of a run that do not depend on the SROs.
struct RunContext {
  room::RirSet rirs;
  TimeSignal playback;
  binaural::CueMap reference_cues;  // program part, no SRO
};

RunContext prepare_run(const RunConfig& cfg);

struct EstimationResult {
  std::array<sro::SroTrace, 2> traces;   // estimator output per loudspeaker
  std::array<sro::SroTrace, 2> applied;  // delayed, eps0 removed; drives compensation
  spatial::RtfMatrix rtf;
  std::array<spatial::BeamformerWeights, 2> weights;
  std::array<std::size_t, 2> rtf_frames{0, 0};
  std::size_t passes = 1;
  double last_change_ppm = 0.0;  // closed loop: largest trace change in the final pass
};

// Frame ranges [begin, end) of the full-timeline STFT used for the oracle
// RTFs: windows fully inside each solo phase, skipping the reverberant tail
// of the previous phase.
std::array<std::pair<std::size_t, std::size_t>, 2> solo_frame_ranges(const RunConfig& cfg,
                                                                     std::size_t rir_length);

// Scene render of `played`, oracle RTFs, LCMV beamforming and DWACD against
// `played`, frame by frame.
EstimationResult estimation_pass(const RunConfig& cfg, const room::RirSet& rirs,
                                 const TimeSignal& played);

// Open or closed loop per cfg.estimation_mode, starting from ctx.playback.
EstimationResult estimate_sro(const RunConfig& cfg, const RunContext& ctx);

// Trace used for compensation: estimates delayed by `delay` frames, minus the
// known primary-device offset eps0; 0 ppm until the first delayed estimate.
sro::SroTrace applied_trace(const sro::SroTrace& estimate, std::size_t delay, double eps0_ppm);

// Compensates both playback channels by per-loudspeaker traces.
TimeSignal compensate_playback(const TimeSignal& playback, const std::array<sro::SroTrace, 2>& traces,
                               const dsp::StftConfig& stft);

struct ConditionResult {
  Condition condition = Condition::kReference;
  TimeSignal ears;                                      // full timeline
  std::optional<EstimationResult> estimation;           // estimated_comp
  std::optional<std::array<sro::SroTrace, 2>> oracle;   // oracle_comp
  binaural::CueMap cues;                                // program part
  binaural::CueMap difference;                          // cues - reference
  std::map<std::string, double> summary;
};

ConditionResult run_condition(const RunConfig& cfg, const RunContext& ctx, Condition condition);
ConditionResult run_condition(const RunConfig& cfg);

// Program part of a full-timeline signal.
TimeSignal program_part(const RunConfig& cfg, const TimeSignal& full);

// Creates `dir` and checks that it is writable; throws kIo otherwise.
void ensure_output_dir(const std::filesystem::path& dir);

// Writes WAV, CSV and grid files for each result under `dir` (file names
// prefixed by the condition) plus manifest.json, and returns the manifest.
// Files written by a failing call are removed before the error propagates.
RunManifest emit_outputs(const std::vector<ConditionResult>& results, const RunConfig& cfg,
                         const std::filesystem::path& dir);

}  // namespace srosync::pipeline
