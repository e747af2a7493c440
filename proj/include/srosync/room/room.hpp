#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "srosync/signal.hpp"
#include "srosync/sro/sro.hpp"

namespace srosync::room {

inline constexpr double kSpeedOfSound = 343.0;

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
  bool operator==(const Vec3&) const = default;
};

double distance(const Vec3& a, const Vec3& b);

enum class AbsorptionModel {
  kSabine,      // alpha = 0.1611 V / (S rt60)
  kCalibrated,  // Sabine start, then corrected until the simulated decay matches rt60
};

// Where the per-device SRO is injected in the microphone path.
enum class SroInjection {
  kPlayback,         // apply_sro(x_q) then convolve with the RIR
  kMicContribution,  // convolve first, then apply_sro to each loudspeaker's image at the mics
};

// How the listener-ear signals are produced.
enum class EarRendering {
  kDirect,  // b_i = apply_sro(x_i, eps_i): channel i hears only loudspeaker i, no room
  kRoom,    // b_i = sum_q h_{i,q} * apply_sro(x_q, eps_q)
};

struct SceneConfig {
  Vec3 room_dims{7.0, 7.0, 6.0};
  double rt60 = 0.3;
  std::array<Vec3, 2> source_positions{Vec3{2.2, 3.4, 1.8}, Vec3{5.2, 3.5, 2.1}};
  Vec3 array_center{3.75, 3.35, 2.0};
  double array_radius = 0.10;
  std::size_t mic_count = 4;
  std::optional<std::array<Vec3, 2>> ear_positions;  // default_ear_positions() when unset
  double sample_rate = 16000.0;
  double noise_level_db = -40.0;  // -inf disables sensor noise
  std::uint64_t noise_seed = 1;
  // SROs in ppm: index 0 is the primary device (array ADC), 1 and 2 the loudspeakers.
  std::array<double, 3> sro_ppm{0.0, 0.0, 0.0};
  std::size_t resampler_segment = 8192;
  AbsorptionModel absorption = AbsorptionModel::kCalibrated;
  SroInjection injection = SroInjection::kPlayback;
  EarRendering ear_rendering = EarRendering::kDirect;
  std::optional<std::filesystem::path> external_rir_dir;

  // Throws kGeometry/kConfig/kDomain on violated invariants.
  void validate() const;

  std::vector<Vec3> mic_positions() const;
  // Listener 1.5 m from the array centre, perpendicular to the loudspeaker axis,
  // facing the loudspeaker midpoint; ears 0.18 m apart (left ear first).
  std::array<Vec3, 2> default_ear_positions() const;
  std::array<Vec3, 2> ears() const { return ear_positions.value_or(default_ear_positions()); }

  // Combined mic-path offset eps_bar_q = eps_q + eps_0 (q = 1, 2).
  sro::SroPpm mic_path_sro(std::size_t q) const;
  sro::SroPpm ear_path_sro(std::size_t q) const;

  static SceneConfig reference_scene();
};

// Impulse responses [source][receiver]; receivers are the M microphones
// followed by the left and right ear.
struct RirSet {
  std::vector<std::vector<std::vector<double>>> h;
  std::size_t length = 0;
  double sample_rate = 16000.0;
  std::size_t num_mics = 0;

  std::size_t num_sources() const { return h.size(); }
  std::size_t num_receivers() const { return h.empty() ? 0 : h.front().size(); }
  const std::vector<double>& mic(std::size_t q, std::size_t m) const { return h[q][m]; }
  const std::vector<double>& ear(std::size_t q, std::size_t i) const { return h[q][num_mics + i]; }
};

// Sabine wall absorption; throws kDomain (infeasible rt60) when it reaches 1.
double sabine_absorption(const Vec3& room_dims, double rt60);

// Absorption whose simulated Schroeder decay (T30 extrapolated to -60 dB)
// matches rt60, starting from the Sabine value.
double calibrated_absorption(const Vec3& room_dims, double rt60, double sample_rate);

double wall_absorption(const Vec3& room_dims, double rt60, double sample_rate,
                       AbsorptionModel model);

// Shoebox image-source RIR with uniform wall absorption `alpha`. Fractional
// delays use a Hann-windowed sinc; taps beyond max_len are dropped.
std::vector<double> image_source_rir_alpha(const Vec3& room_dims, double alpha, const Vec3& src,
                                           const Vec3& rcv, std::size_t max_len,
                                           double sample_rate);

// Same with alpha from the Sabine formula. Throws kGeometry if a position lies
// outside the room.
std::vector<double> image_source_rir(const Vec3& room_dims, double rt60, const Vec3& src,
                                     const Vec3& rcv, std::size_t max_len, double sample_rate);

// RT60 from the Schroeder backward integral: T30 fit (-5 to -35 dB) extrapolated to -60 dB.
double measure_rt60(std::span<const double> rir, double sample_rate);

// Default RIR length: rt60 span plus the longest direct-path delay.
std::size_t default_rir_length(const SceneConfig& cfg);

RirSet generate_rirs(const SceneConfig& cfg);

// Reads rir_s{q}_r{r}.f32 (raw float32) or rir_s{q}.wav (one channel per
// receiver) for q = 1, 2 and receivers 0..M+1.
RirSet load_external_rirs(const std::filesystem::path& dir, std::size_t num_mics,
                          double sample_rate);

// Linear convolution truncated to x.size() samples (FFT overlap-add).
std::vector<double> convolve(std::span<const double> x, std::span<const double> h);

struct SceneRender {
  TimeSignal mic;   // M channels
  TimeSignal ears;  // left, right
  RirSet rirs;
};

// Contribution of one loudspeaker at the array and the ears, SRO applied,
// no sensor noise.
SceneRender render_source(const SceneConfig& cfg, const RirSet& rirs, std::size_t q,
                          std::span<const double> playback);

// Listener-ear signals only, for two playback channels with SRO applied.
TimeSignal render_ears(const SceneConfig& cfg, const RirSet& rirs, const TimeSignal& playback);

// Full scene: both contributions summed plus seeded white sensor noise at
// noise_level_db relative to the mean noiseless microphone power.
SceneRender synthesize_scene(const SceneConfig& cfg, const TimeSignal& playback);
SceneRender synthesize_scene(const SceneConfig& cfg, const TimeSignal& playback,
                             const RirSet& rirs);

}  // namespace srosync::room
