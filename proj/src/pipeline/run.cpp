#include "srosync/pipeline/run.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "srosync/dsp/stft.hpp"
#include "srosync/error.hpp"
#include "srosync/estimator/dwacd.hpp"
#include "srosync/io/wav.hpp"
#include "srosync/simd/kernels.hpp"
#include "srosync/sro/sro.hpp"

namespace srosync::pipeline {

namespace {

// Samples dropped at the end of each solo range so that a loudspeaker
// running slow cannot leak the next phase into it.
constexpr std::size_t kSoloGuard = 256;

std::vector<double> noise(std::mt19937_64& rng, std::size_t n, double sigma) {
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<double> out(n);
  for (double& v : out) v = normal(rng);
  return out;
}

}  // namespace

TimeSignal make_playback(const RunConfig& cfg) {
  const std::size_t solo = cfg.solo_samples();
  const std::size_t prog = cfg.program_samples();
  const double fs = cfg.scene.sample_rate;
  TimeSignal out(2, cfg.total_samples(), fs);
  std::array<std::vector<double>, 2> program;
  std::array<std::vector<double>, 2> solos;

  if (cfg.playback.source == "noise") {
    std::mt19937_64 rng(cfg.playback.seed);
    solos[0] = noise(rng, solo, cfg.playback.level);
    solos[1] = noise(rng, solo, cfg.playback.level);
    program[0] = noise(rng, prog, cfg.playback.level);
    program[1] = cfg.playback.noise == PlaybackNoise::kIdentical
                     ? program[0]
                     : noise(rng, prog, cfg.playback.level);
  } else {
    const TimeSignal wav = io::read_wav(cfg.playback.wav);
    if (wav.num_channels() != 2) {
      throw Error(ErrorKind::kInput, "playback WAV must be stereo: " + cfg.playback.wav.string());
    }
    if (wav.sample_rate != fs) {
      throw Error(ErrorKind::kInput, "playback WAV rate differs from the scene sample rate");
    }
    for (std::size_t q = 0; q < 2; ++q) {
      const auto& ch = wav.channels[q];
      program[q].assign(prog, 0.0);
      std::copy_n(ch.begin(), std::min(prog, ch.size()), program[q].begin());
      solos[q].assign(solo, 0.0);
      std::copy_n(ch.begin(), std::min(solo, ch.size()), solos[q].begin());
    }
  }
  for (std::size_t q = 0; q < 2; ++q) {
    std::copy(solos[q].begin(), solos[q].end(), out.channels[q].begin() + static_cast<std::ptrdiff_t>(q * solo));
    std::copy(program[q].begin(), program[q].end(),
              out.channels[q].begin() + static_cast<std::ptrdiff_t>(2 * solo));
  }
  return out;
}

TimeSignal program_part(const RunConfig& cfg, const TimeSignal& full) {
  const std::size_t begin = 2 * cfg.solo_samples();
  if (full.length() < begin) throw Error(ErrorKind::kShape, "signal shorter than the solo phases");
  TimeSignal out;
  out.sample_rate = full.sample_rate;
  for (const auto& ch : full.channels) {
    out.channels.emplace_back(ch.begin() + static_cast<std::ptrdiff_t>(begin), ch.end());
  }
  return out;
}

RunContext prepare_run(const RunConfig& cfg) {
  cfg.validate();
  RunContext ctx;
  ctx.rirs = cfg.scene.external_rir_dir
                 ? room::load_external_rirs(*cfg.scene.external_rir_dir, cfg.scene.mic_count,
                                            cfg.scene.sample_rate)
                 : room::generate_rirs(cfg.scene);
  ctx.playback = make_playback(cfg);
  room::SceneConfig still = cfg.scene;
  still.sro_ppm = {0.0, 0.0, 0.0};
  const TimeSignal ears = room::render_ears(still, ctx.rirs, ctx.playback);
  ctx.reference_cues = binaural::compute_cue_map(program_part(cfg, ears), cfg.cues);
  return ctx;
}

std::array<std::pair<std::size_t, std::size_t>, 2> solo_frame_ranges(const RunConfig& cfg,
                                                                     std::size_t rir_length) {
  const auto& s = cfg.stft;
  const std::ptrdiff_t off = -static_cast<std::ptrdiff_t>(s.edge_padding());
  const std::ptrdiff_t hop = static_cast<std::ptrdiff_t>(s.hop_size);
  const std::ptrdiff_t win = static_cast<std::ptrdiff_t>(s.window_size);
  const std::ptrdiff_t solo = static_cast<std::ptrdiff_t>(cfg.solo_samples());
  std::array<std::pair<std::size_t, std::size_t>, 2> out{};
  for (std::ptrdiff_t q = 0; q < 2; ++q) {
    const std::ptrdiff_t lo = q * solo + (q == 1 ? static_cast<std::ptrdiff_t>(rir_length) : 0);
    const std::ptrdiff_t hi = (q + 1) * solo - static_cast<std::ptrdiff_t>(kSoloGuard);
    // First frame starting at or after lo; last frame ending at or before hi.
    const std::ptrdiff_t first = (lo - off + hop - 1) / hop;
    const std::ptrdiff_t last_end = hi - win - off;
    const std::ptrdiff_t count = last_end < 0 ? 0 : last_end / hop + 1;
    if (count <= first) {
      throw Error(ErrorKind::kConfig, "solo phase of loudspeaker " + std::to_string(q + 1) +
                                          " too short for the RIR tail and one STFT window");
    }
    out[static_cast<std::size_t>(q)] = {static_cast<std::size_t>(first),
                                        static_cast<std::size_t>(count)};
  }
  return out;
}

EstimationResult estimation_pass(const RunConfig& cfg, const room::RirSet& rirs,
                                 const TimeSignal& played) {
  const room::SceneRender scene = room::synthesize_scene(cfg.scene, played, rirs);
  const std::size_t len = played.length();
  const dsp::FrameAnalyzer analyzer(cfg.stft, len);
  const std::size_t bins = cfg.stft.num_bins();
  const std::size_t mics = cfg.scene.mic_count;
  const std::ptrdiff_t off = analyzer.start_offset();

  // Oracle RTFs from the solo phases.
  const auto ranges = solo_frame_ranges(cfg, rirs.length);
  std::array<spatial::RtfColumn, 2> cols;
  for (std::size_t q = 0; q < 2; ++q) {
    const auto [l0, l1] = ranges[q];
    const std::size_t n = l1 - l0;
    const std::ptrdiff_t start = off + static_cast<std::ptrdiff_t>(l0 * cfg.stft.hop_size);
    dsp::Spectrogram y(mics, n, cfg.stft, start, len);
    dsp::Spectrogram x(1, n, cfg.stft, start, len);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t m = 0; m < mics; ++m) {
        analyzer.analyze(scene.mic.channels[m], l0 + i, y.frame(m, i));
      }
      analyzer.analyze(played.channels[q], l0 + i, x.frame(0, i));
    }
    spatial::OracleRtfOptions opts;
    opts.activity_threshold_db = cfg.dwacd.activity_threshold_db;
    opts.activity_peak_decay = cfg.dwacd.activity_peak_decay;
    cols[q] = spatial::estimate_oracle_rtf(y, x, opts);
  }

  EstimationResult out;
  out.rtf = spatial::RtfMatrix::from_columns(cols[0], cols[1]);
  out.rtf_frames = {cols[0].frames_used, cols[1].frames_used};
  for (std::size_t q = 0; q < 2; ++q) {
    out.weights[q] = spatial::lcmv_weights(out.rtf, q, cfg.diagonal_loading);
  }

  // Streaming beamformer and estimator over the whole timeline.
  std::array<estimator::DwacdEstimator, 2> est{estimator::DwacdEstimator(cfg.dwacd),
                                              estimator::DwacdEstimator(cfg.dwacd)};
  for (std::size_t q = 0; q < 2; ++q) {
    out.traces[q].sample_rate = cfg.stft.sample_rate;
    out.traces[q].hop_size = cfg.stft.hop_size;
    out.traces[q].first_center = analyzer.frame_center(0);
    out.traces[q].frames.reserve(analyzer.num_frames());
  }
  const auto& kernels = simd::active_kernels();
  std::vector<std::vector<dsp::cplx>> yf(mics, std::vector<dsp::cplx>(bins));
  std::vector<dsp::cplx> xf(bins), zf(bins);
  for (std::size_t l = 0; l < analyzer.num_frames(); ++l) {
    for (std::size_t m = 0; m < mics; ++m) analyzer.analyze(scene.mic.channels[m], l, yf[m]);
    for (std::size_t q = 0; q < 2; ++q) {
      std::fill(zf.begin(), zf.end(), dsp::cplx{});
      for (std::size_t m = 0; m < mics; ++m) {
        kernels.conj_multiply_accumulate(zf, out.weights[q].w[m], yf[m]);
      }
      analyzer.analyze(played.channels[q], l, xf);
      out.traces[q].frames.push_back(est[q].process(zf, xf));
    }
  }
  return out;
}

sro::SroTrace applied_trace(const sro::SroTrace& estimate, std::size_t delay, double eps0_ppm) {
  sro::SroTrace out = estimate;
  std::size_t first = estimate.size();
  for (std::size_t l = 0; l < estimate.size(); ++l) {
    if (!std::isnan(estimate.frames[l].raw_ppm)) {
      first = l;
      break;
    }
  }
  for (std::size_t l = 0; l < out.size(); ++l) {
    auto& f = out.frames[l];
    const bool have = l >= delay && l - delay >= first;
    f.smoothed_ppm = have ? estimate.frames[l - delay].smoothed_ppm - eps0_ppm : 0.0;
    f.raw_ppm = have ? estimate.frames[l - delay].raw_ppm : std::nan("");
    f.active = have && estimate.frames[l - delay].active;
    f.gcc_peak = have ? estimate.frames[l - delay].gcc_peak : 0.0;
  }
  return out;
}

TimeSignal compensate_playback(const TimeSignal& playback,
                               const std::array<sro::SroTrace, 2>& traces,
                               const dsp::StftConfig& stft) {
  if (playback.num_channels() != 2) throw Error(ErrorKind::kShape, "playback must be stereo");
  TimeSignal out;
  out.sample_rate = playback.sample_rate;
  for (std::size_t q = 0; q < 2; ++q) {
    out.channels.push_back(sro::compensate_signal(playback.channels[q], traces[q], stft));
  }
  return out;
}

EstimationResult estimate_sro(const RunConfig& cfg, const RunContext& ctx) {
  const double eps0 = cfg.scene.sro_ppm[0];
  auto finish = [&](EstimationResult& r) {
    for (std::size_t q = 0; q < 2; ++q) r.applied[q] = applied_trace(r.traces[q], cfg.causal_delay, eps0);
  };
  EstimationResult result = estimation_pass(cfg, ctx.rirs, ctx.playback);
  finish(result);
  if (cfg.estimation_mode == EstimationMode::kOpenLoop) return result;

  // Closed loop: the loudspeakers play the compensated signal and the
  // estimator compares against it. Each pass re-runs the causal chain with the
  // previous compensation until the trace settles.
  for (std::size_t pass = 1; pass < cfg.closed_loop_passes; ++pass) {
    const TimeSignal played = compensate_playback(ctx.playback, result.applied, cfg.stft);
    EstimationResult next = estimation_pass(cfg, ctx.rirs, played);
    finish(next);
    double change = 0.0;
    for (std::size_t q = 0; q < 2; ++q) {
      for (std::size_t l = 0; l < next.applied[q].size(); ++l) {
        change = std::max(change, std::abs(next.applied[q].frames[l].smoothed_ppm -
                                           result.applied[q].frames[l].smoothed_ppm));
      }
    }
    next.passes = pass + 1;
    next.last_change_ppm = change;
    result = std::move(next);
    if (change < 1e-3) break;
  }
  return result;
}

namespace {

void summarize_cues(ConditionResult& r) {
  const auto all = binaural::summarize(r.difference);
  const auto low = binaural::summarize(r.difference, 0.0, 2000.0);
  const auto high = binaural::summarize(r.difference, 2000.0, 1e12);
  r.summary["mean_abs_delta_ic"] = all.mean_abs_ic;
  r.summary["mean_abs_delta_itd_s"] = all.mean_abs_itd;
  r.summary["mean_abs_delta_ic_below_2k"] = low.mean_abs_ic;
  r.summary["mean_abs_delta_ic_above_2k"] = high.mean_abs_ic;
  r.summary["mean_abs_delta_itd_s_below_2k"] = low.mean_abs_itd;
  r.summary["mean_abs_delta_itd_s_above_2k"] = high.mean_abs_itd;
  r.summary["ic_cells"] = static_cast<double>(all.ic_cells);
  r.summary["itd_reliable_cells"] = static_cast<double>(all.itd_cells);
}

}  // namespace

ConditionResult run_condition(const RunConfig& cfg, const RunContext& ctx, Condition condition) {
  cfg.validate();
  ConditionResult r;
  r.condition = condition;
  room::SceneConfig scene = cfg.scene;
  const std::size_t frames = dsp::frame_count(ctx.playback.length(), cfg.stft);
  const double first_center =
      -static_cast<double>(cfg.stft.edge_padding()) + static_cast<double>(cfg.stft.window_size) / 2.0;

  switch (condition) {
    case Condition::kReference:
      scene.sro_ppm = {0.0, 0.0, 0.0};
      r.ears = room::render_ears(scene, ctx.rirs, ctx.playback);
      break;
    case Condition::kUncompensated:
      r.ears = room::render_ears(scene, ctx.rirs, ctx.playback);
      break;
    case Condition::kOracleComp: {
      std::array<sro::SroTrace, 2> traces;
      for (std::size_t q = 0; q < 2; ++q) {
        const double eps = cfg.scene.mic_path_sro(q + 1).ppm() - cfg.scene.sro_ppm[0];
        traces[q] = sro::SroTrace::constant(eps, frames, cfg.stft.sample_rate, cfg.stft.hop_size,
                                            first_center);
      }
      r.ears = room::render_ears(scene, ctx.rirs, compensate_playback(ctx.playback, traces, cfg.stft));
      r.oracle = traces;
      break;
    }
    case Condition::kEstimatedComp: {
      EstimationResult est = estimate_sro(cfg, ctx);
      r.ears = room::render_ears(scene, ctx.rirs,
                                 compensate_playback(ctx.playback, est.applied, cfg.stft));
      for (std::size_t q = 0; q < 2; ++q) {
        const std::string tag = "_q" + std::to_string(q + 1);
        const double truth = cfg.scene.mic_path_sro(q + 1).ppm();
        const double final_est = est.traces[q].frames.empty() ? 0.0 : est.traces[q].frames.back().smoothed_ppm;
        r.summary["sro_true_ppm" + tag] = truth;
        r.summary["sro_final_ppm" + tag] = final_est;
        r.summary["sro_final_error_ppm" + tag] = std::abs(final_est - truth);
        r.summary["rtf_frames" + tag] = static_cast<double>(est.rtf_frames[q]);
      }
      r.summary["estimation_passes"] = static_cast<double>(est.passes);
      r.summary["closed_loop_last_change_ppm"] = est.last_change_ppm;
      r.estimation = std::move(est);
      break;
    }
  }
  r.cues = binaural::compute_cue_map(program_part(cfg, r.ears), cfg.cues);
  r.difference = binaural::cue_difference(r.cues, ctx.reference_cues);
  summarize_cues(r);
  return r;
}

ConditionResult run_condition(const RunConfig& cfg) {
  const RunContext ctx = prepare_run(cfg);
  return run_condition(cfg, ctx, cfg.condition);
}

void ensure_output_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create output directory " + dir.string() + ": " + ec.message());
  const auto probe = dir / ".srosync_write_probe";
  {
    std::ofstream out(probe, std::ios::binary);
    if (!out || !(out << "x") || !out.flush()) {
      throw Error(ErrorKind::kIo, "output directory " + dir.string() + " is not writable");
    }
  }
  std::filesystem::remove(probe, ec);
}

namespace {

class OutputWriter {
 public:
  explicit OutputWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}
  ~OutputWriter() {
    if (!committed_) {
      std::error_code ec;
      for (const auto& p : written_) std::filesystem::remove(dir_ / p, ec);
    }
  }

  template <typename Fn>
  void text(const std::string& name, Fn&& fill) {
    written_.push_back(name);
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + (dir_ / name).string());
    fill(out);
    out.flush();
    if (!out) throw Error(ErrorKind::kIo, "write failed for " + (dir_ / name).string());
  }

  void wav(const std::string& name, const TimeSignal& s) {
    written_.push_back(name);
    io::write_wav(dir_ / name, s);
  }

  RunManifest::Output record(const std::string& name) const {
    return {name, sha256_file(dir_ / name)};
  }

  const std::vector<std::string>& written() const { return written_; }
  void commit() { committed_ = true; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> written_;
  bool committed_ = false;
};

}  // namespace

RunManifest emit_outputs(const std::vector<ConditionResult>& results, const RunConfig& cfg,
                         const std::filesystem::path& dir) {
  ensure_output_dir(dir);
  OutputWriter w(dir);
  RunManifest m;
  m.config_hash = config_hash(cfg);
  m.software_version = SROSYNC_VERSION;
  m.seeds["playback"] = cfg.playback.seed;
  m.seeds["sensor_noise"] = cfg.scene.noise_seed;
  m.notes.push_back("averaging over playback seeds replaces averaging over program files");
  m.notes.push_back(std::string("kernels: ") + simd::active_kernels().name);
  m.summary["eps0_ppm"] = cfg.scene.sro_ppm[0];
  m.summary["eps1_ppm"] = cfg.scene.sro_ppm[1];
  m.summary["eps2_ppm"] = cfg.scene.sro_ppm[2];

  w.text("config.cfg", [&](std::ostream& out) { out << to_config_text(cfg); });
  for (const ConditionResult& r : results) {
    const std::string c = to_string(r.condition);
    m.conditions.push_back(c);
    w.wav("ears_" + c + ".wav", r.ears);
    w.text("cues_" + c + ".csv", [&](std::ostream& out) { binaural::write_cue_csv(out, r.cues); });
    w.text("cues_" + c + "_ic.grid",
           [&](std::ostream& out) { binaural::write_cue_grid(out, r.cues, "ic"); });
    w.text("cues_" + c + "_itd.grid",
           [&](std::ostream& out) { binaural::write_cue_grid(out, r.cues, "itd"); });
    w.text("diff_" + c + ".csv",
           [&](std::ostream& out) { binaural::write_cue_csv(out, r.difference); });
    w.text("diff_" + c + "_ic.grid",
           [&](std::ostream& out) { binaural::write_cue_grid(out, r.difference, "ic"); });
    w.text("diff_" + c + "_itd.grid",
           [&](std::ostream& out) { binaural::write_cue_grid(out, r.difference, "itd"); });
    if (r.estimation) {
      for (std::size_t q = 0; q < 2; ++q) {
        const std::string tag = std::to_string(q + 1);
        w.text("trace_" + c + "_q" + tag + ".csv",
               [&](std::ostream& out) { sro::write_trace_csv(out, r.estimation->traces[q]); });
        w.text("applied_" + c + "_q" + tag + ".csv",
               [&](std::ostream& out) { sro::write_trace_csv(out, r.estimation->applied[q]); });
      }
      w.text("rtf_" + c + ".txt",
             [&](std::ostream& out) { spatial::write_rtf_table(out, r.estimation->rtf); });
    }
    for (const auto& [k, v] : r.summary) m.summary[c + "." + k] = v;
  }
  for (const auto& name : w.written()) m.outputs.push_back(w.record(name));
  w.text("manifest.json", [&](std::ostream& out) { out << manifest_to_json(m); });
  w.commit();
  return m;
}

}  // namespace srosync::pipeline
