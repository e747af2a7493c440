#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace srosync::binaural {

// Equivalent rectangular bandwidth (Hz) at centre frequency f (Glasberg & Moore).
double erb_bandwidth(double f);

// `count` centre frequencies equally spaced on the ERB-number scale, inclusive
// of both ends.
std::vector<double> erb_space(double f_lo, double f_hi, std::size_t count);

// Fourth-order complex gammatone bandpass realised as a cascade of identical
// complex one-pole sections. The real part of the output is the band signal;
// the gain at the centre frequency is 1.
class GammatoneFilter {
 public:
  static constexpr int kOrder = 4;

  GammatoneFilter(double center_hz, double sample_rate);

  double center() const { return center_; }

  // Real band signal for the whole input.
  void process(std::span<const double> in, std::span<double> out) const;

  // |H(f)| of the real output for 0 < f < fs/2, image included.
  double magnitude(double f) const;

 private:
  double center_;
  double sample_rate_;
  std::complex<double> pole_;
  double gain_;  // per section
};

}  // namespace srosync::binaural
