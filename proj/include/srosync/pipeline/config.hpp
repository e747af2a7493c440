#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "srosync/binaural/cues.hpp"
#include "srosync/dsp/stft.hpp"
#include "srosync/estimator/dwacd.hpp"
#include "srosync/room/room.hpp"

namespace srosync::pipeline {

inline constexpr int kConfigVersion = 1;

enum class Condition { kReference, kUncompensated, kOracleComp, kEstimatedComp };

std::string to_string(Condition c);
Condition condition_from_string(const std::string& name);
inline constexpr Condition kAllConditions[] = {Condition::kReference, Condition::kUncompensated,
                                               Condition::kOracleComp,
                                               Condition::kEstimatedComp};

// open_loop: estimate on the uncompensated render, compensate afterwards.
// closed_loop: the estimator observes the render of the compensated playback;
// solved by repeated passes until the trace stops changing.
enum class EstimationMode { kOpenLoop, kClosedLoop };

enum class PlaybackNoise { kIdentical, kIndependent };

struct PlaybackConfig {
  std::string source = "noise";  // "noise" or "wav"
  std::uint64_t seed = 7;
  PlaybackNoise noise = PlaybackNoise::kIdentical;
  double level = 0.1;            // noise standard deviation
  std::filesystem::path wav;     // stereo file for source = wav
};

struct RunConfig {
  room::SceneConfig scene;
  dsp::StftConfig stft;
  estimator::DwacdConfig dwacd;
  binaural::CueOptions cues;
  double diagonal_loading = 1e-6;
  Condition condition = Condition::kEstimatedComp;
  double duration = 120.0;       // program material, s
  double solo_duration = 10.0;   // per loudspeaker, s
  EstimationMode estimation_mode = EstimationMode::kOpenLoop;
  std::size_t causal_delay = 1;  // frames between an estimate and its use
  std::size_t closed_loop_passes = 3;
  PlaybackConfig playback;
  std::vector<std::pair<double, double>> sro_grid{{10.0, -10.0}, {10.0, -50.0}, {10.0, -100.0}};
  std::filesystem::path output_dir = "out";

  // Cross-module checks: shared rates, the phase-ramp validity condition over
  // the whole run, and the minimum duration for estimated compensation.
  void validate() const;

  std::size_t solo_samples() const;
  std::size_t program_samples() const;
  std::size_t total_samples() const { return 2 * solo_samples() + program_samples(); }

  // Same run at another (eps1, eps2) pair.
  RunConfig with_sro(double eps1, double eps2) const;
};

// key = value lines, '#' comments. `version` must come first. Unknown keys,
// duplicates and malformed values raise kConfig naming the key; physical
// invariants raise kDomain/kGeometry. Relative paths resolve against `base_dir`.
RunConfig parse_config(const std::string& text,
                       const std::filesystem::path& base_dir = std::filesystem::path());

// Reads and parses a file; kIo if it cannot be read.
RunConfig load_config(const std::filesystem::path& path);

// Canonical text form; parse_config(to_config_text(c)) == c.
std::string to_config_text(const RunConfig& config);

// Hex SHA-256 of the canonical text, output directory excluded.
std::string config_hash(const RunConfig& config);

}  // namespace srosync::pipeline
