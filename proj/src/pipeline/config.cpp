#include "srosync/pipeline/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "srosync/error.hpp"
#include "srosync/pipeline/manifest.hpp"
#include "srosync/sro/sro.hpp"

namespace srosync::pipeline {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw Error(ErrorKind::kConfig, "key '" + key + "': " + what + " (got '" + value + "')");
}

double parse_double(const std::string& key, const std::string& v) {
  if (v == "-inf") return -INFINITY;
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end || !std::isfinite(out)) {
    bad_value(key, v, "expected a finite number");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) bad_value(key, v, "expected a non-negative integer");
  return out;
}

std::vector<double> parse_list(const std::string& key, const std::string& v, std::size_t n) {
  std::istringstream ss(v);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) out.push_back(parse_double(key, tok));
  if (out.size() != n) bad_value(key, v, ("expected " + std::to_string(n) + " numbers").c_str());
  return out;
}

room::Vec3 parse_vec(const std::string& key, const std::string& v) {
  const auto l = parse_list(key, v, 3);
  return {l[0], l[1], l[2]};
}

std::string fmt(double v) {
  if (std::isinf(v) && v < 0) return "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string fmt(const room::Vec3& v) { return fmt(v.x) + " " + fmt(v.y) + " " + fmt(v.z); }

template <typename T>
T pick(const std::string& key, const std::string& v, const std::map<std::string, T>& names) {
  const auto it = names.find(v);
  if (it == names.end()) {
    std::string allowed;
    for (const auto& [n, _] : names) allowed += (allowed.empty() ? "" : "|") + n;
    bad_value(key, v, ("expected one of " + allowed).c_str());
  }
  return it->second;
}

template <typename T>
std::string name_of(T value, const std::map<std::string, T>& names) {
  for (const auto& [n, x] : names) {
    if (x == value) return n;
  }
  return "?";
}

const std::map<std::string, room::AbsorptionModel> kAbsorption{
    {"sabine", room::AbsorptionModel::kSabine}, {"calibrated", room::AbsorptionModel::kCalibrated}};
const std::map<std::string, room::SroInjection> kInjection{
    {"playback", room::SroInjection::kPlayback},
    {"mic_contribution", room::SroInjection::kMicContribution}};
const std::map<std::string, room::EarRendering> kEars{{"direct", room::EarRendering::kDirect},
                                                      {"room", room::EarRendering::kRoom}};
const std::map<std::string, EstimationMode> kModes{{"open_loop", EstimationMode::kOpenLoop},
                                                   {"closed_loop", EstimationMode::kClosedLoop}};
const std::map<std::string, PlaybackNoise> kNoise{{"identical", PlaybackNoise::kIdentical},
                                                  {"independent", PlaybackNoise::kIndependent}};
const std::map<std::string, dsp::WindowType> kWindows{{"hann", dsp::WindowType::kHann},
                                                      {"sqrt_hann", dsp::WindowType::kSqrtHann}};

struct Key {
  const char* name;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string fmt_grid(const std::vector<std::pair<double, double>>& grid) {
  std::string out;
  for (const auto& [a, b] : grid) out += (out.empty() ? "" : "; ") + fmt(a) + "," + fmt(b);
  return out;
}

std::vector<std::pair<double, double>> parse_grid(const std::string& key, const std::string& v) {
  std::vector<std::pair<double, double>> out;
  std::istringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ';')) {
    item = trim(item);
    const auto comma = item.find(',');
    if (comma == std::string::npos) bad_value(key, v, "expected 'eps1,eps2; ...'");
    out.emplace_back(parse_double(key, trim(item.substr(0, comma))),
                     parse_double(key, trim(item.substr(comma + 1))));
  }
  if (out.empty()) bad_value(key, v, "grid needs at least one pair");
  return out;
}

const std::vector<Key>& keys() {
  using C = RunConfig;
  using S = const std::string&;
  static const std::vector<Key> table = {
      {"scene.room", [](C& c, S k, S v) { c.scene.room_dims = parse_vec(k, v); },
       [](const C& c) { return fmt(c.scene.room_dims); }},
      {"scene.rt60", [](C& c, S k, S v) { c.scene.rt60 = parse_double(k, v); },
       [](const C& c) { return fmt(c.scene.rt60); }},
      {"scene.source1", [](C& c, S k, S v) { c.scene.source_positions[0] = parse_vec(k, v); },
       [](const C& c) { return fmt(c.scene.source_positions[0]); }},
      {"scene.source2", [](C& c, S k, S v) { c.scene.source_positions[1] = parse_vec(k, v); },
       [](const C& c) { return fmt(c.scene.source_positions[1]); }},
      {"scene.array_center", [](C& c, S k, S v) { c.scene.array_center = parse_vec(k, v); },
       [](const C& c) { return fmt(c.scene.array_center); }},
      {"scene.array_radius", [](C& c, S k, S v) { c.scene.array_radius = parse_double(k, v); },
       [](const C& c) { return fmt(c.scene.array_radius); }},
      {"scene.mic_count", [](C& c, S k, S v) { c.scene.mic_count = parse_uint(k, v); },
       [](const C& c) { return std::to_string(c.scene.mic_count); }},
      {"scene.ears",
       [](C& c, S k, S v) {
         if (v == "default") {
           c.scene.ear_positions.reset();
           return;
         }
         const auto l = parse_list(k, v, 6);
         c.scene.ear_positions = std::array<room::Vec3, 2>{room::Vec3{l[0], l[1], l[2]},
                                                           room::Vec3{l[3], l[4], l[5]}};
       },
       [](const C& c) {
         return c.scene.ear_positions
                    ? fmt((*c.scene.ear_positions)[0]) + " " + fmt((*c.scene.ear_positions)[1])
                    : std::string("default");
       }},
      {"scene.sample_rate",
       [](C& c, S k, S v) {
         const double fs = parse_double(k, v);
         c.scene.sample_rate = fs;
         c.stft.sample_rate = fs;
         c.dwacd.sample_rate = fs;
       },
       [](const C& c) { return fmt(c.scene.sample_rate); }},
      {"scene.noise_level_db", [](C& c, S k, S v) { c.scene.noise_level_db = parse_double(k, v); },
       [](const C& c) { return fmt(c.scene.noise_level_db); }},
      {"scene.noise_seed", [](C& c, S k, S v) { c.scene.noise_seed = parse_uint(k, v); },
       [](const C& c) { return std::to_string(c.scene.noise_seed); }},
      {"scene.absorption", [](C& c, S k, S v) { c.scene.absorption = pick(k, v, kAbsorption); },
       [](const C& c) { return name_of(c.scene.absorption, kAbsorption); }},
      {"scene.sro_injection", [](C& c, S k, S v) { c.scene.injection = pick(k, v, kInjection); },
       [](const C& c) { return name_of(c.scene.injection, kInjection); }},
      {"scene.ear_rendering", [](C& c, S k, S v) { c.scene.ear_rendering = pick(k, v, kEars); },
       [](const C& c) { return name_of(c.scene.ear_rendering, kEars); }},
      {"scene.resampler_segment",
       [](C& c, S k, S v) { c.scene.resampler_segment = parse_uint(k, v); },
       [](const C& c) { return std::to_string(c.scene.resampler_segment); }},
      {"scene.rir_dir",
       [](C& c, S, S v) {
         if (v == "none") c.scene.external_rir_dir.reset();
         else c.scene.external_rir_dir = v;
       },
       [](const C& c) {
         return c.scene.external_rir_dir ? c.scene.external_rir_dir->string() : std::string("none");
       }},
      {"sro.eps0", [](C& c, S k, S v) { c.scene.sro_ppm[0] = parse_double(k, v); },
       [](const C& c) { return fmt(c.scene.sro_ppm[0]); }},
      {"sro.eps1", [](C& c, S k, S v) { c.scene.sro_ppm[1] = parse_double(k, v); },
       [](const C& c) { return fmt(c.scene.sro_ppm[1]); }},
      {"sro.eps2", [](C& c, S k, S v) { c.scene.sro_ppm[2] = parse_double(k, v); },
       [](const C& c) { return fmt(c.scene.sro_ppm[2]); }},
      {"sro.grid", [](C& c, S k, S v) { c.sro_grid = parse_grid(k, v); },
       [](const C& c) { return fmt_grid(c.sro_grid); }},
      {"stft.window_size", [](C& c, S k, S v) { c.stft.window_size = parse_uint(k, v); },
       [](const C& c) { return std::to_string(c.stft.window_size); }},
      {"stft.hop_size",
       [](C& c, S k, S v) {
         c.stft.hop_size = parse_uint(k, v);
         c.dwacd.hop_size = c.stft.hop_size;
       },
       [](const C& c) { return std::to_string(c.stft.hop_size); }},
      {"stft.fft_size",
       [](C& c, S k, S v) {
         c.stft.fft_size = parse_uint(k, v);
         c.dwacd.fft_size = c.stft.fft_size;
       },
       [](const C& c) { return std::to_string(c.stft.fft_size); }},
      {"stft.window", [](C& c, S k, S v) { c.stft.window = pick(k, v, kWindows); },
       [](const C& c) { return name_of(c.stft.window, kWindows); }},
      {"dwacd.L", [](C& c, S k, S v) { c.dwacd.temporal_distance = parse_uint(k, v); },
       [](const C& c) { return std::to_string(c.dwacd.temporal_distance); }},
      {"dwacd.alpha_s", [](C& c, S k, S v) { c.dwacd.smoothing = parse_double(k, v); },
       [](const C& c) { return fmt(c.dwacd.smoothing); }},
      {"dwacd.gamma", [](C& c, S k, S v) { c.dwacd.estimate_smoothing = parse_double(k, v); },
       [](const C& c) { return fmt(c.dwacd.estimate_smoothing); }},
      {"dwacd.activity_threshold_db",
       [](C& c, S k, S v) { c.dwacd.activity_threshold_db = parse_double(k, v); },
       [](const C& c) { return fmt(c.dwacd.activity_threshold_db); }},
      {"dwacd.activity_peak_decay",
       [](C& c, S k, S v) { c.dwacd.activity_peak_decay = parse_double(k, v); },
       [](const C& c) { return fmt(c.dwacd.activity_peak_decay); }},
      {"dwacd.coherence_psd_smoothing",
       [](C& c, S k, S v) { c.dwacd.coherence_psd_smoothing = parse_double(k, v); },
       [](const C& c) { return fmt(c.dwacd.coherence_psd_smoothing); }},
      {"dwacd.beta_limit", [](C& c, S k, S v) { c.dwacd.beta_limit = parse_uint(k, v); },
       [](const C& c) { return std::to_string(c.dwacd.beta_limit); }},
      {"dwacd.warmup_extra", [](C& c, S k, S v) { c.dwacd.warmup_extra = parse_uint(k, v); },
       [](const C& c) { return std::to_string(c.dwacd.warmup_extra); }},
      {"dwacd.golden_tolerance",
       [](C& c, S k, S v) { c.dwacd.golden_tolerance = parse_double(k, v); },
       [](const C& c) { return fmt(c.dwacd.golden_tolerance); }},
      {"beamformer.diagonal_loading",
       [](C& c, S k, S v) { c.diagonal_loading = parse_double(k, v); },
       [](const C& c) { return fmt(c.diagonal_loading); }},
      {"cues.num_bands", [](C& c, S k, S v) { c.cues.num_bands = parse_uint(k, v); },
       [](const C& c) { return std::to_string(c.cues.num_bands); }},
      {"cues.f_lo", [](C& c, S k, S v) { c.cues.f_lo = parse_double(k, v); },
       [](const C& c) { return fmt(c.cues.f_lo); }},
      {"cues.f_hi", [](C& c, S k, S v) { c.cues.f_hi = parse_double(k, v); },
       [](const C& c) { return fmt(c.cues.f_hi); }},
      {"cues.block_len", [](C& c, S k, S v) { c.cues.block_len = parse_double(k, v); },
       [](const C& c) { return fmt(c.cues.block_len); }},
      {"cues.block_overlap", [](C& c, S k, S v) { c.cues.block_overlap = parse_double(k, v); },
       [](const C& c) { return fmt(c.cues.block_overlap); }},
      {"cues.frame_size", [](C& c, S k, S v) { c.cues.frame_size = parse_uint(k, v); },
       [](const C& c) { return std::to_string(c.cues.frame_size); }},
      {"cues.frame_hop", [](C& c, S k, S v) { c.cues.frame_hop = parse_uint(k, v); },
       [](const C& c) { return std::to_string(c.cues.frame_hop); }},
      {"cues.itd_max", [](C& c, S k, S v) { c.cues.itd_max = parse_double(k, v); },
       [](const C& c) { return fmt(c.cues.itd_max); }},
      {"cues.reliability_floor",
       [](C& c, S k, S v) { c.cues.reliability_floor = parse_double(k, v); },
       [](const C& c) { return fmt(c.cues.reliability_floor); }},
      {"run.condition", [](C& c, S, S v) { c.condition = condition_from_string(v); },
       [](const C& c) { return to_string(c.condition); }},
      {"run.duration", [](C& c, S k, S v) { c.duration = parse_double(k, v); },
       [](const C& c) { return fmt(c.duration); }},
      {"run.solo_duration", [](C& c, S k, S v) { c.solo_duration = parse_double(k, v); },
       [](const C& c) { return fmt(c.solo_duration); }},
      {"run.estimation_mode", [](C& c, S k, S v) { c.estimation_mode = pick(k, v, kModes); },
       [](const C& c) { return name_of(c.estimation_mode, kModes); }},
      {"run.causal_delay", [](C& c, S k, S v) { c.causal_delay = parse_uint(k, v); },
       [](const C& c) { return std::to_string(c.causal_delay); }},
      {"run.closed_loop_passes", [](C& c, S k, S v) { c.closed_loop_passes = parse_uint(k, v); },
       [](const C& c) { return std::to_string(c.closed_loop_passes); }},
      {"playback.source",
       [](C& c, S k, S v) {
         if (v != "noise" && v != "wav") bad_value(k, v, "expected noise|wav");
         c.playback.source = v;
       },
       [](const C& c) { return c.playback.source; }},
      {"playback.seed", [](C& c, S k, S v) { c.playback.seed = parse_uint(k, v); },
       [](const C& c) { return std::to_string(c.playback.seed); }},
      {"playback.noise", [](C& c, S k, S v) { c.playback.noise = pick(k, v, kNoise); },
       [](const C& c) { return name_of(c.playback.noise, kNoise); }},
      {"playback.level", [](C& c, S k, S v) { c.playback.level = parse_double(k, v); },
       [](const C& c) { return fmt(c.playback.level); }},
      {"playback.wav", [](C& c, S, S v) { c.playback.wav = v == "none" ? "" : v; },
       [](const C& c) { return c.playback.wav.empty() ? std::string("none") : c.playback.wav.string(); }},
      {"output.dir", [](C& c, S, S v) { c.output_dir = v; },
       [](const C& c) { return c.output_dir.string(); }},
  };
  return table;
}

}  // namespace

std::string to_string(Condition c) {
  switch (c) {
    case Condition::kReference: return "reference";
    case Condition::kUncompensated: return "uncompensated";
    case Condition::kOracleComp: return "oracle_comp";
    case Condition::kEstimatedComp: return "estimated_comp";
  }
  return "?";
}

Condition condition_from_string(const std::string& name) {
  for (Condition c : kAllConditions) {
    if (to_string(c) == name) return c;
  }
  throw Error(ErrorKind::kConfig, "unknown condition '" + name +
                                      "' (expected reference|uncompensated|oracle_comp|estimated_comp)");
}

std::size_t RunConfig::solo_samples() const {
  return static_cast<std::size_t>(std::llround(solo_duration * scene.sample_rate));
}

std::size_t RunConfig::program_samples() const {
  return static_cast<std::size_t>(std::llround(duration * scene.sample_rate));
}

RunConfig RunConfig::with_sro(double eps1, double eps2) const {
  RunConfig c = *this;
  c.scene.sro_ppm[1] = eps1;
  c.scene.sro_ppm[2] = eps2;
  return c;
}

void RunConfig::validate() const {
  scene.validate();
  stft.validate();
  dwacd.validate();
  cues.validate();
  if (stft.sample_rate != scene.sample_rate || dwacd.sample_rate != scene.sample_rate ||
      dwacd.hop_size != stft.hop_size || dwacd.fft_size != stft.fft_size) {
    throw Error(ErrorKind::kConfig, "STFT, estimator and scene disagree on rate or framing");
  }
  if (!(diagonal_loading >= 0.0)) {
    throw Error(ErrorKind::kConfig, "beamformer.diagonal_loading must be >= 0");
  }
  if (!(duration > 0.0)) throw Error(ErrorKind::kConfig, "run.duration must be positive");
  if (!(solo_duration >= 0.0)) throw Error(ErrorKind::kConfig, "run.solo_duration must be >= 0");
  if (program_samples() < stft.window_size) {
    throw Error(ErrorKind::kConfig, "run.duration shorter than one STFT window");
  }
  if (playback.source == "wav" && playback.wav.empty()) {
    throw Error(ErrorKind::kConfig, "playback.wav must be set when playback.source = wav");
  }
  if (!(playback.level > 0.0)) throw Error(ErrorKind::kConfig, "playback.level must be positive");
  if (condition == Condition::kEstimatedComp) {
    if (solo_samples() < stft.window_size) {
      throw Error(ErrorKind::kConfig,
                  "run.solo_duration must cover at least one STFT window for RTF estimation");
    }
    const double warmup = static_cast<double>((dwacd.temporal_distance + dwacd.warmup_extra) *
                                              stft.hop_size) /
                          scene.sample_rate;
    if (duration < warmup + 30.0) {
      throw Error(ErrorKind::kConfig, "run.duration must be at least the estimator warm-up (" +
                                          fmt(warmup) + " s) plus 30 s for estimated_comp");
    }
    if (estimation_mode == EstimationMode::kClosedLoop && closed_loop_passes == 0) {
      throw Error(ErrorKind::kConfig, "run.closed_loop_passes must be >= 1");
    }
  }
  const std::size_t frames = dsp::frame_count(total_samples(), stft);
  for (std::size_t q = 1; q <= 2; ++q) {
    sro::check_validity(scene.mic_path_sro(q), frames, stft);
    sro::check_validity(scene.ear_path_sro(q), frames, stft);
  }
  for (const auto& [a, b] : sro_grid) {
    sro::SroPpm{a};
    sro::SroPpm{b};
  }
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  cfg.scene = room::SceneConfig::reference_scene();
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  bool have_version = false;
  std::size_t line_no = 0;
  std::map<std::string, const Key*> index;
  for (const Key& k : keys()) index[k.name] = &k;

  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kConfig,
                  "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (value.empty()) throw Error(ErrorKind::kConfig, "key '" + key + "': empty value");
    if (!seen.insert(key).second) throw Error(ErrorKind::kConfig, "key '" + key + "': duplicate");
    if (key == "version") {
      if (parse_uint(key, value) != static_cast<std::uint64_t>(kConfigVersion)) {
        bad_value(key, value, ("unsupported version, expected " + std::to_string(kConfigVersion)).c_str());
      }
      have_version = true;
      continue;
    }
    if (!have_version) {
      throw Error(ErrorKind::kConfig, "key 'version': must be the first key (found '" + key + "')");
    }
    const auto it = index.find(key);
    if (it == index.end()) throw Error(ErrorKind::kConfig, "key '" + key + "': unknown key");
    it->second->set(cfg, key, value);
  }
  if (!have_version) throw Error(ErrorKind::kConfig, "key 'version': missing (empty config?)");

  auto resolve = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative() && !base_dir.empty()) p = base_dir / p;
  };
  if (cfg.scene.external_rir_dir) resolve(*cfg.scene.external_rir_dir);
  resolve(cfg.playback.wav);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string to_config_text(const RunConfig& config) {
  std::string out = "version = " + std::to_string(kConfigVersion) + "\n";
  for (const Key& k : keys()) out += std::string(k.name) + " = " + k.get(config) + "\n";
  return out;
}

std::string config_hash(const RunConfig& config) {
  RunConfig c = config;
  c.output_dir.clear();
  return sha256_hex(to_config_text(c));
}

}  // namespace srosync::pipeline
