#include <bit>
#include <cmath>
#include <optional>
#include <random>
#include <string>

#include "srosync/error.hpp"
#include "srosync/io/wav.hpp"
#include "srosync/room/room.hpp"

namespace srosync::room {

namespace {

bool strictly_inside(const Vec3& p, const Vec3& d) {
  return p.x > 0 && p.y > 0 && p.z > 0 && p.x < d.x && p.y < d.y && p.z < d.z;
}

std::string describe(const Vec3& p) {
  return "[" + std::to_string(p.x) + ", " + std::to_string(p.y) + ", " + std::to_string(p.z) + "]";
}

TimeSignal mono(std::span<const double> x, double fs) {
  return TimeSignal::mono(std::vector<double>(x.begin(), x.end()), fs);
}

}  // namespace

void SceneConfig::validate() const {
  if (!(room_dims.x > 0 && room_dims.y > 0 && room_dims.z > 0)) {
    throw Error(ErrorKind::kGeometry, "room dimensions must be positive");
  }
  if (!(rt60 > 0.0)) throw Error(ErrorKind::kDomain, "rt60 must be positive");
  if (mic_count < 2) throw Error(ErrorKind::kConfig, "mic_count must be >= 2");
  if (!(array_radius > 0.0)) throw Error(ErrorKind::kGeometry, "array_radius must be positive");
  if (!(sample_rate > 0.0)) throw Error(ErrorKind::kConfig, "sample_rate must be positive");
  if (!std::has_single_bit(resampler_segment) || resampler_segment < 64) {
    throw Error(ErrorKind::kConfig, "resampler segment must be a power of two >= 64");
  }
  for (std::size_t q = 0; q < 2; ++q) {
    if (!strictly_inside(source_positions[q], room_dims)) {
      throw Error(ErrorKind::kGeometry, "source " + std::to_string(q + 1) + " at " +
                                            describe(source_positions[q]) + " is outside the room");
    }
  }
  for (const auto& m : mic_positions()) {
    if (!strictly_inside(m, room_dims)) {
      throw Error(ErrorKind::kGeometry, "microphone at " + describe(m) + " is outside the room");
    }
  }
  for (const auto& e : ears()) {
    if (!strictly_inside(e, room_dims)) {
      throw Error(ErrorKind::kGeometry, "ear at " + describe(e) + " is outside the room");
    }
  }
  sabine_absorption(room_dims, rt60);
  for (std::size_t q = 1; q <= 2; ++q) {
    mic_path_sro(q);
    ear_path_sro(q);
  }
}

std::vector<Vec3> SceneConfig::mic_positions() const {
  std::vector<Vec3> mics(mic_count);
  for (std::size_t m = 0; m < mic_count; ++m) {
    const double az = 2.0 * M_PI * static_cast<double>(m) / static_cast<double>(mic_count);
    mics[m] = {array_center.x + array_radius * std::cos(az),
               array_center.y + array_radius * std::sin(az), array_center.z};
  }
  return mics;
}

std::array<Vec3, 2> SceneConfig::default_ear_positions() const {
  const Vec3& s1 = source_positions[0];
  const Vec3& s2 = source_positions[1];
  double ax = s2.x - s1.x, ay = s2.y - s1.y;
  const double an = std::hypot(ax, ay);
  ax /= an;
  ay /= an;
  const Vec3 head{array_center.x + 1.5 * ay, array_center.y - 1.5 * ax, array_center.z};
  double fx = 0.5 * (s1.x + s2.x) - head.x, fy = 0.5 * (s1.y + s2.y) - head.y;
  const double fn = std::hypot(fx, fy);
  fx /= fn;
  fy /= fn;
  const double lx = -fy, ly = fx;  // facing direction turned left
  return {Vec3{head.x + 0.09 * lx, head.y + 0.09 * ly, head.z},
          Vec3{head.x - 0.09 * lx, head.y - 0.09 * ly, head.z}};
}

sro::SroPpm SceneConfig::mic_path_sro(std::size_t q) const {
  return sro::SroPpm(sro_ppm.at(q) + sro_ppm[0]);
}

sro::SroPpm SceneConfig::ear_path_sro(std::size_t q) const { return sro::SroPpm(sro_ppm.at(q)); }

SceneConfig SceneConfig::reference_scene() { return SceneConfig{}; }

std::size_t default_rir_length(const SceneConfig& cfg) {
  double longest = 0.0;
  const auto mics = cfg.mic_positions();
  const auto ears = cfg.ears();
  for (const auto& s : cfg.source_positions) {
    for (const auto& m : mics) longest = std::max(longest, distance(s, m));
    for (const auto& e : ears) longest = std::max(longest, distance(s, e));
  }
  return static_cast<std::size_t>(std::ceil(cfg.rt60 * cfg.sample_rate)) +
         static_cast<std::size_t>(std::ceil(longest / kSpeedOfSound * cfg.sample_rate)) + 32;
}

RirSet generate_rirs(const SceneConfig& cfg) {
  cfg.validate();
  if (cfg.external_rir_dir) {
    return load_external_rirs(*cfg.external_rir_dir, cfg.mic_count, cfg.sample_rate);
  }
  const double alpha = wall_absorption(cfg.room_dims, cfg.rt60, cfg.sample_rate, cfg.absorption);
  RirSet set;
  set.length = default_rir_length(cfg);
  set.sample_rate = cfg.sample_rate;
  set.num_mics = cfg.mic_count;
  std::vector<Vec3> receivers = cfg.mic_positions();
  for (const auto& e : cfg.ears()) receivers.push_back(e);
  set.h.resize(2);
  for (std::size_t q = 0; q < 2; ++q) {
    for (const auto& r : receivers) {
      set.h[q].push_back(image_source_rir_alpha(cfg.room_dims, alpha, cfg.source_positions[q], r,
                                                set.length, cfg.sample_rate));
    }
  }
  return set;
}

RirSet load_external_rirs(const std::filesystem::path& dir, std::size_t num_mics,
                          double sample_rate) {
  RirSet set;
  set.num_mics = num_mics;
  set.sample_rate = sample_rate;
  const std::size_t receivers = num_mics + 2;
  set.h.resize(2);
  for (std::size_t q = 0; q < 2; ++q) {
    const auto wav = dir / ("rir_s" + std::to_string(q + 1) + ".wav");
    if (std::filesystem::exists(wav)) {
      TimeSignal s = io::read_wav(wav);
      if (s.num_channels() != receivers) {
        throw Error(ErrorKind::kShape, wav.string() + " must have " + std::to_string(receivers) +
                                           " channels (mics then left/right ear)");
      }
      if (s.sample_rate != sample_rate) {
        throw Error(ErrorKind::kConfig, wav.string() + " has a different sample rate");
      }
      set.h[q] = std::move(s.channels);
    } else {
      for (std::size_t r = 0; r < receivers; ++r) {
        set.h[q].push_back(io::read_raw_f32(dir / ("rir_s" + std::to_string(q + 1) + "_r" +
                                                  std::to_string(r) + ".f32")));
      }
    }
    for (auto& h : set.h[q]) set.length = std::max(set.length, h.size());
  }
  for (auto& per_source : set.h) {
    for (auto& h : per_source) h.resize(set.length, 0.0);
  }
  return set;
}

namespace {

void render_ears_into(const SceneConfig& cfg, const RirSet& rirs, std::size_t q,
                      const std::vector<double>& shifted, TimeSignal& ears) {
  if (cfg.ear_rendering == EarRendering::kDirect) {
    ears.channels[q] = shifted;
  } else {
    for (std::size_t i = 0; i < 2; ++i) ears.channels[i] = convolve(shifted, rirs.ear(q, i));
  }
}

}  // namespace

SceneRender render_source(const SceneConfig& cfg, const RirSet& rirs, std::size_t q,
                          std::span<const double> playback) {
  const double fs = cfg.sample_rate;
  const std::size_t len = playback.size();
  const std::size_t seg = cfg.resampler_segment;
  SceneRender out;
  out.mic = TimeSignal(cfg.mic_count, len, fs);
  out.ears = TimeSignal(2, len, fs);

  const sro::SroPpm mic_eps = cfg.mic_path_sro(q + 1);
  const sro::SroPpm ear_eps = cfg.ear_path_sro(q + 1);
  const TimeSignal x = mono(playback, fs);

  std::optional<TimeSignal> mic_shifted;
  if (cfg.injection == SroInjection::kPlayback) {
    mic_shifted = sro::apply_sro(x, mic_eps, seg);
    for (std::size_t m = 0; m < cfg.mic_count; ++m) {
      out.mic.channels[m] = convolve(mic_shifted->channels[0], rirs.mic(q, m));
    }
  } else {
    for (std::size_t m = 0; m < cfg.mic_count; ++m) {
      const auto image = mono(convolve(playback, rirs.mic(q, m)), fs);
      out.mic.channels[m] = sro::apply_sro(image, mic_eps, seg).channels[0];
    }
  }

  const TimeSignal ear_shifted = mic_shifted && mic_eps == ear_eps
                                     ? std::move(*mic_shifted)
                                     : sro::apply_sro(x, ear_eps, seg);
  render_ears_into(cfg, rirs, q, ear_shifted.channels[0], out.ears);
  return out;
}

TimeSignal render_ears(const SceneConfig& cfg, const RirSet& rirs, const TimeSignal& playback) {
  if (playback.num_channels() != 2) {
    throw Error(ErrorKind::kShape, "ear rendering needs exactly two playback channels");
  }
  TimeSignal ears(2, playback.length(), cfg.sample_rate);
  for (std::size_t q = 0; q < 2; ++q) {
    const TimeSignal shifted =
        sro::apply_sro(mono(playback.channels[q], cfg.sample_rate), cfg.ear_path_sro(q + 1),
                       cfg.resampler_segment);
    TimeSignal part(2, playback.length(), cfg.sample_rate);
    render_ears_into(cfg, rirs, q, shifted.channels[0], part);
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t n = 0; n < ears.length(); ++n) ears.channels[i][n] += part.channels[i][n];
    }
  }
  return ears;
}

SceneRender synthesize_scene(const SceneConfig& cfg, const TimeSignal& playback) {
  return synthesize_scene(cfg, playback, generate_rirs(cfg));
}

SceneRender synthesize_scene(const SceneConfig& cfg, const TimeSignal& playback,
                             const RirSet& rirs) {
  cfg.validate();
  if (playback.num_channels() != 2) {
    throw Error(ErrorKind::kShape, "scene playback needs exactly two channels");
  }
  if (playback.sample_rate != cfg.sample_rate) {
    throw Error(ErrorKind::kConfig, "playback rate differs from the scene sample rate");
  }
  if (rirs.num_sources() != 2 || rirs.num_mics != cfg.mic_count) {
    throw Error(ErrorKind::kShape, "RIR set does not match the scene");
  }
  SceneRender out = render_source(cfg, rirs, 0, playback.channels[0]);
  const SceneRender second = render_source(cfg, rirs, 1, playback.channels[1]);
  for (std::size_t m = 0; m < cfg.mic_count; ++m) {
    auto& y = out.mic.channels[m];
    for (std::size_t n = 0; n < y.size(); ++n) y[n] += second.mic.channels[m][n];
  }
  for (std::size_t i = 0; i < 2; ++i) {
    auto& b = out.ears.channels[i];
    for (std::size_t n = 0; n < b.size(); ++n) b[n] += second.ears.channels[i][n];
  }

  if (std::isfinite(cfg.noise_level_db)) {
    double power = 0.0;
    for (const auto& ch : out.mic.channels) {
      for (double v : ch) power += v * v;
    }
    power /= static_cast<double>(cfg.mic_count * std::max<std::size_t>(1, out.mic.length()));
    const double sigma = std::sqrt(power * std::pow(10.0, cfg.noise_level_db / 10.0));
    std::mt19937_64 rng(cfg.noise_seed);
    std::normal_distribution<double> normal(0.0, sigma);
    for (auto& ch : out.mic.channels) {
      for (double& v : ch) v += normal(rng);
    }
  }
  out.rirs = rirs;
  return out;
}

}  // namespace srosync::room
