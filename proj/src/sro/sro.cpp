#include "srosync/sro/sro.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "srosync/dsp/fft.hpp"
#include "srosync/error.hpp"
#include "srosync/simd/kernels.hpp"

namespace srosync::sro {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Largest change of the delay within one kept output block, in samples.
constexpr double kMaxDelayStep = 0.005;
}  // namespace

SroPpm::SroPpm(double ppm) : ppm_(ppm) {
  if (!std::isfinite(ppm) || std::abs(ppm) > kMaxAbsPpm) {
    throw Error(ErrorKind::kDomain, "SRO of " + std::to_string(ppm) + " ppm outside +/-" +
                                        std::to_string(kMaxAbsPpm) + " ppm");
  }
}

std::size_t first_invalid_frame(SroPpm eps, std::size_t num_frames,
                                const dsp::StftConfig& config) {
  const double limit = static_cast<double>(config.window_size) / 4.0;
  const double per_frame = static_cast<double>(config.hop_size) * std::abs(eps.ratio());
  if (per_frame == 0.0) return num_frames;
  const double first = std::floor(limit / per_frame) + 1.0;
  return first >= static_cast<double>(num_frames) ? num_frames : static_cast<std::size_t>(first);
}

void check_validity(SroPpm eps, std::size_t num_frames, const dsp::StftConfig& config) {
  const std::size_t bad = first_invalid_frame(eps, num_frames, config);
  if (bad < num_frames) {
    throw Error(ErrorKind::kDomain,
                "phase-ramp validity condition l*N_h*|eps| << N_w violated at frame " +
                    std::to_string(bad) + " (drift exceeds N_w/4 = " +
                    std::to_string(config.window_size / 4) + " samples at " +
                    std::to_string(eps.ppm()) + " ppm)");
  }
}

double sro_phase(std::size_t bin, std::size_t frame, SroPpm eps, const dsp::StftConfig& config) {
  const double drift = static_cast<double>(frame) * static_cast<double>(config.hop_size) *
                       eps.ratio();
  return -kTwoPi * static_cast<double>(bin) * drift / static_cast<double>(config.fft_size);
}

cplx sro_phase_term(std::size_t bin, std::size_t frame, SroPpm eps,
                    const dsp::StftConfig& config) {
  check_validity(eps, frame + 1, config);
  return std::polar(1.0, sro_phase(bin, frame, eps, config));
}

std::size_t resampler_hop(SroPpm eps, std::size_t segment_len) {
  const std::size_t max_hop = segment_len / 8;
  const double e = std::abs(eps.ratio());
  if (e == 0.0) return max_hop;
  const double want = kMaxDelayStep / e;
  if (want >= static_cast<double>(max_hop)) return max_hop;
  const auto hop = std::bit_floor(static_cast<std::size_t>(std::max(want, 1.0)));
  return std::max<std::size_t>(hop, 16);
}

namespace {

// ramp[k] = exp(-j 2 pi k frac / n) built from two short tables.
void fill_ramp(std::vector<cplx>& ramp, double frac, std::size_t n) {
  constexpr std::size_t kBlock = 64;
  const std::size_t bins = ramp.size();
  cplx fine[kBlock];
  for (std::size_t j = 0; j < kBlock; ++j) {
    fine[j] = std::polar(1.0, -kTwoPi * frac * static_cast<double>(j) / static_cast<double>(n));
  }
  for (std::size_t base = 0; base < bins; base += kBlock) {
    const cplx coarse =
        std::polar(1.0, -kTwoPi * frac * static_cast<double>(base) / static_cast<double>(n));
    const std::size_t end = std::min(bins, base + kBlock);
    for (std::size_t k = base; k < end; ++k) ramp[k] = coarse * fine[k - base];
  }
}

}  // namespace

TimeSignal apply_sro(const TimeSignal& signal, SroPpm eps, std::size_t segment_len) {
  if (signal.num_channels() != 1) {
    throw Error(ErrorKind::kShape, "apply_sro expects a single channel");
  }
  if (segment_len < 64 || !std::has_single_bit(segment_len)) {
    throw Error(ErrorKind::kConfig, "segment length must be a power of two >= 64");
  }
  const auto& x = signal.channels[0];
  const std::size_t len = x.size();
  TimeSignal out(1, len, signal.sample_rate);
  auto& y = out.channels[0];
  if (len == 0) return out;

  const std::size_t hop = resampler_hop(eps, segment_len);
  const std::size_t margin = (segment_len - hop) / 2;
  const dsp::RealFft fft(segment_len);
  const auto& kernels = simd::active_kernels();
  std::vector<double> seg(segment_len);
  std::vector<cplx> spec(fft.num_bins());
  std::vector<cplx> ramp(fft.num_bins());
  const double e = eps.ratio();

  for (std::size_t n0 = 0; n0 < len; n0 += hop) {
    // y[n] = x[n - d(n)], d(n) = n e / (1 + e), frozen at the block centre.
    const double centre = static_cast<double>(n0) + 0.5 * static_cast<double>(hop - 1);
    const double delay = centre * e / (1.0 + e);
    const double whole = std::round(delay);
    const double frac = delay - whole;
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(n0) -
                                 static_cast<std::ptrdiff_t>(whole) -
                                 static_cast<std::ptrdiff_t>(margin);
    for (std::size_t i = 0; i < segment_len; ++i) {
      const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(i);
      seg[i] = (idx >= 0 && idx < static_cast<std::ptrdiff_t>(len)) ? x[idx] : 0.0;
    }
    const std::size_t count = std::min(hop, len - n0);
    if (frac == 0.0) {
      std::copy_n(seg.begin() + static_cast<std::ptrdiff_t>(margin), count,
                  y.begin() + static_cast<std::ptrdiff_t>(n0));
      continue;
    }
    fft.forward(seg, spec);
    fill_ramp(ramp, frac, segment_len);
    kernels.complex_multiply(spec, ramp);
    fft.inverse(spec, seg);
    std::copy_n(seg.begin() + static_cast<std::ptrdiff_t>(margin), count,
                y.begin() + static_cast<std::ptrdiff_t>(n0));
  }
  return out;
}

namespace {

std::vector<double> offsets(const SroTrace& trace, std::size_t frames, double first_center,
                            const dsp::StftConfig& cfg) {
  if (trace.size() != frames) {
    throw Error(ErrorKind::kAlignment, "trace has " + std::to_string(trace.size()) +
                                           " frames, playback has " + std::to_string(frames));
  }
  const double hop = static_cast<double>(cfg.hop_size);
  std::vector<double> delta(trace.size());
  double acc = 0.0;  // samples
  for (std::size_t l = 0; l < trace.size(); ++l) {
    const double e = trace.frames[l].smoothed_ppm * 1e-6;
    acc = l == 0 ? first_center * e : acc + hop * e;
    delta[l] = acc / cfg.sample_rate;
  }
  return delta;
}

}  // namespace

std::vector<double> accumulated_offset(const SroTrace& trace, const dsp::Spectrogram& playback) {
  return offsets(trace, playback.num_frames(),
                 playback.num_frames() ? playback.frame_center(0) : 0.0, playback.config());
}

std::vector<double> compensate_signal(std::span<const double> x, const SroTrace& trace,
                                      const dsp::StftConfig& cfg) {
  cfg.validate();
  const dsp::FrameAnalyzer analyzer(cfg, x.size());
  const dsp::FrameSynthesizer synth(cfg, x.size());
  const auto delta = offsets(trace, analyzer.num_frames(), analyzer.frame_center(0), cfg);
  const auto& kernels = simd::active_kernels();
  std::vector<double> y(x.size(), 0.0);
  std::vector<cplx> frame(cfg.num_bins());
  std::vector<cplx> ramp(cfg.num_bins());
  for (std::size_t l = 0; l < analyzer.num_frames(); ++l) {
    analyzer.analyze(x, l, frame);
    const double advance = delta[l] * cfg.sample_rate;
    if (advance != 0.0) {
      fill_ramp(ramp, -advance, cfg.fft_size);
      kernels.complex_multiply(frame, ramp);
    }
    synth.add(frame, l, y);
  }
  return y;
}

dsp::Spectrogram compensate_sro(const dsp::Spectrogram& playback, const SroTrace& trace) {
  const auto delta = accumulated_offset(trace, playback);
  dsp::Spectrogram out = playback;
  const auto& cfg = playback.config();
  const auto& kernels = simd::active_kernels();
  std::vector<cplx> ramp(cfg.num_bins());
  for (std::size_t l = 0; l < out.num_frames(); ++l) {
    const double advance = delta[l] * cfg.sample_rate;
    if (advance == 0.0) continue;
    // conj(Lambda): exp(+j 2 pi k advance / N)
    fill_ramp(ramp, -advance, cfg.fft_size);
    for (std::size_t c = 0; c < out.num_channels(); ++c) {
      kernels.complex_multiply(out.frame(c, l), ramp);
    }
  }
  return out;
}

}  // namespace srosync::sro
