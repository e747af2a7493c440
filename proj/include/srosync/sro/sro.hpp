#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "srosync/dsp/stft.hpp"
#include "srosync/signal.hpp"
#include "srosync/sro/trace.hpp"

namespace srosync::sro {

using cplx = std::complex<double>;

inline constexpr double kMaxAbsPpm = 500.0;

// Sample-rate offset in parts per million. A device with offset eps runs at
// (1 + eps) times the nominal rate.
class SroPpm {
 public:
  constexpr SroPpm() = default;
  // Throws kDomain when |ppm| exceeds kMaxAbsPpm or is not finite.
  explicit SroPpm(double ppm);

  double ppm() const { return ppm_; }
  double ratio() const { return ppm_ * 1e-6; }

  friend SroPpm operator+(SroPpm a, SroPpm b) { return SroPpm(a.ppm_ + b.ppm_); }
  friend SroPpm operator-(SroPpm a) { return SroPpm(-a.ppm_); }
  bool operator==(const SroPpm&) const = default;

 private:
  double ppm_ = 0.0;
};

// The multiplicative phase-ramp model holds while the accumulated drift
// l*N_h*|eps| stays below N_w/4 samples. Returns the first frame that breaks
// it, or `num_frames` if none does.
std::size_t first_invalid_frame(SroPpm eps, std::size_t num_frames,
                                const dsp::StftConfig& config);

// Throws kDomain naming the offending frame if any of the first `num_frames`
// frames violates the validity condition.
void check_validity(SroPpm eps, std::size_t num_frames, const dsp::StftConfig& config);

// Phase of Lambda[k, l]: -2 pi k l N_h eps / N, with N the FFT length and the
// drift l N_h eps measured in samples.
double sro_phase(std::size_t bin, std::size_t frame, SroPpm eps, const dsp::StftConfig& config);

// Lambda[k, l] = exp(j * sro_phase(...)). Throws kDomain when frame l breaks
// the validity condition.
cplx sro_phase_term(std::size_t bin, std::size_t frame, SroPpm eps,
                    const dsp::StftConfig& config);

// Resamples a single-channel signal as seen by a device whose clock runs
// (1 + eps) times faster: y[n] = x[n / (1 + eps)]. Realised per segment of
// `segment_len` samples as an FFT-domain phase ramp (overlap-save); only the
// centre of each segment is kept. Output has the input's length.
TimeSignal apply_sro(const TimeSignal& signal, SroPpm eps, std::size_t segment_len = 8192);

// Output hop (samples kept per segment) used by apply_sro for this offset.
std::size_t resampler_hop(SroPpm eps, std::size_t segment_len);

// Accumulated advance (seconds) per frame implied by a possibly time-varying
// trace: delta[0] = c_0 eps[0], delta[l] = delta[l-1] + N_h eps[l] (in samples,
// then divided by f_s), c_0 being the centre of frame 0.
std::vector<double> accumulated_offset(const SroTrace& trace, const dsp::Spectrogram& playback);

// Multiplies every channel of frame l, bin k by conj(Lambda) built from the
// accumulated offset, so that a device with the traced offset reproduces the
// original. Throws kAlignment if the trace and spectrogram lengths differ.
dsp::Spectrogram compensate_sro(const dsp::Spectrogram& playback, const SroTrace& trace);

// Time-domain equivalent of istft(compensate_sro(stft(x), trace)) computed
// one frame at a time. The trace must have frame_count(x.size(), cfg) frames.
std::vector<double> compensate_signal(std::span<const double> x, const SroTrace& trace,
                                      const dsp::StftConfig& cfg);

}  // namespace srosync::sro
