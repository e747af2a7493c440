#include "srosync/estimator/dwacd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "srosync/dsp/golden.hpp"
#include "srosync/error.hpp"
#include "srosync/simd/kernels.hpp"

namespace srosync::estimator {

bool ActivityDetector::update(std::span<const std::complex<double>> frame) {
  double energy = 0.0;
  for (const auto& v : frame) energy += std::norm(v);
  return update_energy(energy);
}

bool ActivityDetector::update_energy(double energy) {
  peak_ = std::max(peak_ * decay_, energy);
  return energy > 0.0 && energy >= peak_ * threshold_;
}

void DwacdConfig::validate() const {
  if (temporal_distance < 1) throw Error(ErrorKind::kConfig, "dwacd.L must be >= 1");
  auto open_unit = [](double v, const char* key) {
    if (!(v > 0.0 && v < 1.0)) {
      throw Error(ErrorKind::kConfig, std::string(key) + " must lie in (0, 1)");
    }
  };
  open_unit(smoothing, "dwacd.alpha_s");
  open_unit(estimate_smoothing, "dwacd.gamma");
  open_unit(coherence_psd_smoothing, "dwacd.coherence_psd_smoothing");
  open_unit(activity_peak_decay, "dwacd.activity_peak_decay");
  if (!(activity_threshold_db > 0.0)) {
    throw Error(ErrorKind::kConfig, "dwacd.activity_threshold_db must be positive");
  }
  if (hop_size == 0 || fft_size < 2 || fft_size % 2 != 0) {
    throw Error(ErrorKind::kConfig, "dwacd hop/fft sizes invalid");
  }
  if (beta_limit == 0 || beta_limit >= fft_size / 2) {
    throw Error(ErrorKind::kConfig, "dwacd.beta_limit must be in [1, fft_size/2)");
  }
  if (!(golden_tolerance > 0.0)) throw Error(ErrorKind::kConfig, "golden tolerance must be > 0");
  if (!(sample_rate > 0.0)) throw Error(ErrorKind::kConfig, "sample rate must be > 0");
}

CoherenceTracker::CoherenceTracker(std::size_t num_bins, double psd_smoothing)
    : a_(psd_smoothing), cross_(num_bins), auto_z_(num_bins), auto_x_(num_bins) {}

void CoherenceTracker::update(std::span<const cplx> z, std::span<const cplx> x,
                              std::span<cplx> gamma) {
  if (z.size() != cross_.size() || x.size() != cross_.size() || gamma.size() != cross_.size()) {
    throw Error(ErrorKind::kShape, "coherence update: bin count mismatch");
  }
  simd::active_kernels().psd_update(cross_, auto_z_, auto_x_, z, x, a_);
  for (std::size_t k = 0; k < cross_.size(); ++k) {
    const double denom = std::sqrt(auto_z_[k] * auto_x_[k]);
    gamma[k] = denom > 0.0 ? cross_[k] / denom : cplx{};
  }
}

GccSearch::GccSearch(std::size_t fft_size, std::size_t beta_limit, double tolerance)
    : n_(fft_size), beta_limit_(beta_limit), tolerance_(tolerance), fft_(fft_size) {}

double GccSearch::evaluate(std::span<const cplx> p, double beta) const {
  const std::size_t bins = n_ / 2 + 1;
  const double w = 2.0 * std::numbers::pi * beta / static_cast<double>(n_);
  // Rotating phasor, re-anchored every 256 bins to bound rounding growth.
  double acc = p[0].real() + p[bins - 1].real() * std::cos(w * static_cast<double>(bins - 1));
  const cplx step = std::polar(1.0, w);
  for (std::size_t base = 1; base + 1 < bins; base += 256) {
    cplx rot = std::polar(1.0, w * static_cast<double>(base));
    const std::size_t end = std::min(bins - 1, base + 256);
    double part = 0.0;
    for (std::size_t k = base; k < end; ++k) {
      part += (p[k] * rot).real();
      rot *= step;
    }
    acc += 2.0 * part;
  }
  return acc;
}

GccPeak GccSearch::find_peak(std::span<const cplx> p) const {
  if (p.size() != n_ / 2 + 1) throw Error(ErrorKind::kShape, "phase function has wrong bin count");
  thread_local std::vector<double> gcc;
  gcc.resize(n_);
  fft_.inverse(p, gcc);
  long best = 0;
  double best_val = -1.0;
  const long limit = static_cast<long>(beta_limit_);
  for (long b = -limit; b <= limit; ++b) {
    const std::size_t idx = b < 0 ? n_ - static_cast<std::size_t>(-b) : static_cast<std::size_t>(b);
    const double v = std::abs(gcc[idx]);
    if (v > best_val) {
      best_val = v;
      best = b;
    }
  }
  double norm = std::abs(p[0]) + std::abs(p[n_ / 2]);
  for (std::size_t k = 1; k < n_ / 2; ++k) norm += 2.0 * std::abs(p[k]);

  GccPeak out;
  out.integer_lag = best;
  const double centre = static_cast<double>(best);
  const auto r = dsp::golden_section_max(
      [&](double beta) { return std::abs(evaluate(p, beta)); }, centre - 0.5, centre + 0.5,
      tolerance_);
  const double at_int = std::abs(evaluate(p, centre));
  if (r.value >= at_int) {
    out.lag = r.x;
    out.peak = norm > 0.0 ? r.value / norm : 0.0;
  } else {
    out.lag = centre;
    out.peak = norm > 0.0 ? at_int / norm : 0.0;
  }
  return out;
}

DwacdEstimator::DwacdEstimator(const DwacdConfig& config)
    : config_(config),
      bins_(config.fft_size / 2 + 1),
      warmup_(config.temporal_distance + config.warmup_extra),
      coherence_(bins_, config.coherence_psd_smoothing),
      gate_z_(config.activity_threshold_db, config.activity_peak_decay),
      gate_x_(config.activity_threshold_db, config.activity_peak_decay),
      search_(config.fft_size, config.beta_limit, config.golden_tolerance),
      ring_(config.temporal_distance + 1, std::vector<cplx>(bins_)),
      ring_active_(config.temporal_distance + 1, false),
      gamma_(bins_),
      p_(bins_, cplx{}) {
  config_.validate();
}

sro::SroTrace::Frame DwacdEstimator::process(std::span<const cplx> z, std::span<const cplx> x) {
  if (z.size() != bins_ || x.size() != bins_) {
    throw Error(ErrorKind::kShape, "dwacd: frame has wrong bin count");
  }
  const bool az = gate_z_.update(z);
  const bool ax = gate_x_.update(x);
  const bool active = az && ax;
  if (active) {
    coherence_.update(z, x, gamma_);
  }
  return process_coherence(gamma_, active);
}

sro::SroTrace::Frame DwacdEstimator::process_coherence(std::span<const cplx> gamma, bool active) {
  if (gamma.size() != bins_) throw Error(ErrorKind::kShape, "dwacd: coherence has wrong bin count");
  const std::size_t slots = ring_.size();
  const std::size_t slot = frame_ % slots;
  const std::size_t past = (frame_ + 1) % slots;  // frame_ - L
  const bool have_past = frame_ >= config_.temporal_distance;
  std::copy(gamma.begin(), gamma.end(), ring_[slot].begin());
  ring_active_[slot] = active;

  sro::SroTrace::Frame out;
  out.active = active;
  if (active) {
    ++active_count_;
    if (have_past && ring_active_[past]) {
      // P~ = conj(Gamma[l]) Gamma[l - L]; a device running fast yields a
      // negative lag and hence a positive estimate.
      const double a = config_.smoothing;
      const auto& old = ring_[past];
      for (std::size_t k = 0; k < bins_; ++k) {
        p_[k] = a * p_[k] + (1.0 - a) * std::conj(gamma[k]) * old[k];
      }
      ++p_updates_;
    }
  }
  if (active && ready() && p_updates_ > 0) {
    const GccPeak peak = search_.find_peak(p_);
    const double raw = -peak.lag /
                       (static_cast<double>(config_.temporal_distance) *
                        static_cast<double>(config_.hop_size)) *
                       1e6;
    out.raw_ppm = raw;
    out.gcc_peak = peak.peak;
    if (!have_estimate_) {
      smoothed_ = raw;
      have_estimate_ = true;
    } else {
      const double g = config_.estimate_smoothing;
      smoothed_ = g * smoothed_ + (1.0 - g) * raw;
    }
  }
  out.smoothed_ppm = smoothed_;
  ++frame_;
  return out;
}

sro::SroTrace run_dwacd(const dsp::Spectrogram& z, const dsp::Spectrogram& x,
                        const DwacdConfig& config) {
  if (z.num_frames() != x.num_frames()) {
    throw Error(ErrorKind::kAlignment, "dwacd: Z has " + std::to_string(z.num_frames()) +
                                           " frames, X has " + std::to_string(x.num_frames()));
  }
  if (z.num_channels() != 1 || x.num_channels() != 1) {
    throw Error(ErrorKind::kShape, "dwacd expects single-channel spectrograms");
  }
  if (z.num_bins() != config.fft_size / 2 + 1 || x.num_bins() != z.num_bins()) {
    throw Error(ErrorKind::kShape, "dwacd: spectrogram bins do not match fft_size");
  }
  DwacdEstimator est(config);
  sro::SroTrace trace;
  trace.sample_rate = config.sample_rate;
  trace.hop_size = config.hop_size;
  trace.first_center = x.num_frames() > 0 ? x.frame_center(0) : 0.0;
  trace.frames.reserve(x.num_frames());
  for (std::size_t l = 0; l < x.num_frames(); ++l) {
    trace.frames.push_back(est.process(z.frame(0, l), x.frame(0, l)));
  }
  return trace;
}

}  // namespace srosync::estimator
