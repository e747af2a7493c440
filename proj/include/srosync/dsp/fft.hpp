#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace srosync::dsp {

using cplx = std::complex<double>;

// One-sided real FFT of fixed length backed by FFTW. Plans are created with
// FFTW_ESTIMATE so results are bit-reproducible run to run, and are shared
// between all instances of the same length.
class RealFft {
 public:
  explicit RealFft(std::size_t n);

  std::size_t size() const { return n_; }
  std::size_t num_bins() const { return n_ / 2 + 1; }

  // out[k] = sum_n in[n] exp(-j 2 pi k n / N), k = 0..N/2
  void forward(std::span<const double> in, std::span<cplx> out) const;

  // Inverse of forward (includes the 1/N factor). Imaginary parts of the DC
  // and Nyquist bins are ignored.
  void inverse(std::span<const cplx> in, std::span<double> out) const;

  struct Plans;

 private:
  std::size_t n_;
  std::shared_ptr<const Plans> plans_;
};

}  // namespace srosync::dsp
