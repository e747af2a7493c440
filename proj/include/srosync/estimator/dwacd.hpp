#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "srosync/dsp/fft.hpp"
#include "srosync/dsp/stft.hpp"
#include "srosync/estimator/activity.hpp"
#include "srosync/sro/trace.hpp"

namespace srosync::estimator {

using cplx = std::complex<double>;

struct DwacdConfig {
  std::size_t temporal_distance = 8;      // L, frames
  double smoothing = 0.95;                // alpha_s, phase-function recursion
  double estimate_smoothing = 0.95;       // gamma, on the ppm estimate
  double activity_threshold_db = 40.0;
  double activity_peak_decay = 0.999;
  double coherence_psd_smoothing = 0.5;
  std::size_t hop_size = 2048;
  std::size_t fft_size = 8192;
  double sample_rate = 16000.0;
  std::size_t beta_limit = 50;            // |beta| search range, lags
  std::size_t warmup_extra = 5;           // warm-up is L + warmup_extra active frames
  double golden_tolerance = 1e-4;         // lags

  // Throws kConfig on a violated invariant.
  void validate() const;
  bool operator==(const DwacdConfig&) const = default;
};

// Exponentially smoothed cross/auto PSDs and the complex coherence between
// the device-side spectrum Z and the reference X.
class CoherenceTracker {
 public:
  CoherenceTracker(std::size_t num_bins, double psd_smoothing);

  // Updates the PSDs and writes Gamma = Phi_zx / sqrt(Phi_zz Phi_xx) to
  // `gamma`. Bins with a zero auto-PSD get 0.
  void update(std::span<const cplx> z, std::span<const cplx> x, std::span<cplx> gamma);

  std::size_t num_bins() const { return cross_.size(); }

 private:
  double a_;
  std::vector<cplx> cross_;
  std::vector<double> auto_z_;
  std::vector<double> auto_x_;
};

struct GccPeak {
  long integer_lag = 0;
  double lag = 0.0;       // refined
  double peak = 0.0;      // |p(lag)| normalised by sum_k |P[k]| (full spectrum)
};

// Lag maximising |p(beta)|, p(beta) = sum_k P[k] exp(j 2 pi k beta / N) over the
// conjugate-symmetric completion of the one-sided P. Integer search over
// |beta| <= beta_limit, then golden-section refinement on [b - 0.5, b + 0.5].
class GccSearch {
 public:
  GccSearch(std::size_t fft_size, std::size_t beta_limit, double tolerance);

  GccPeak find_peak(std::span<const cplx> phase_function) const;

  // p(beta) at a possibly non-integer lag.
  double evaluate(std::span<const cplx> phase_function, double beta) const;

 private:
  std::size_t n_;
  std::size_t beta_limit_;
  double tolerance_;
  dsp::RealFft fft_;
};

// Streaming DWACD for one loudspeaker path.
class DwacdEstimator {
 public:
  explicit DwacdEstimator(const DwacdConfig& config);

  // Processes one frame pair and returns the per-frame trace entry.
  sro::SroTrace::Frame process(std::span<const cplx> z, std::span<const cplx> x);

  // Phase-function step on a precomputed coherence frame. Useful for feeding
  // constructed coherence sequences; `active` gates it the same way.
  sro::SroTrace::Frame process_coherence(std::span<const cplx> gamma, bool active);

  const std::vector<cplx>& phase_function() const { return p_; }
  std::size_t active_frames() const { return active_count_; }
  bool ready() const { return active_count_ >= warmup_; }
  const DwacdConfig& config() const { return config_; }

 private:
  DwacdConfig config_;
  std::size_t bins_;
  std::size_t warmup_;
  CoherenceTracker coherence_;
  ActivityDetector gate_z_;
  ActivityDetector gate_x_;
  GccSearch search_;
  // Ring of the last L+1 coherence frames with their activity flags.
  std::vector<std::vector<cplx>> ring_;
  std::vector<bool> ring_active_;
  std::size_t frame_ = 0;
  std::vector<cplx> gamma_;
  std::vector<cplx> p_;
  std::size_t active_count_ = 0;
  std::size_t p_updates_ = 0;
  bool have_estimate_ = false;
  double smoothed_ = 0.0;
};

// Full streaming pass over frame-aligned single-channel spectrograms.
sro::SroTrace run_dwacd(const dsp::Spectrogram& z, const dsp::Spectrogram& x,
                        const DwacdConfig& config);

}  // namespace srosync::estimator
