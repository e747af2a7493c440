#include "srosync/binaural/gammatone.hpp"

#include <cmath>
#include <numbers>

#include "srosync/error.hpp"

namespace srosync::binaural {

namespace {
constexpr double kPi = std::numbers::pi;
double erb_number(double f) { return 21.4 * std::log10(1.0 + 0.00437 * f); }
double erb_number_inverse(double e) { return (std::pow(10.0, e / 21.4) - 1.0) / 0.00437; }
}  // namespace

double erb_bandwidth(double f) { return 24.7 * (4.37 * f / 1000.0 + 1.0); }

std::vector<double> erb_space(double f_lo, double f_hi, std::size_t count) {
  if (count == 0 || !(f_lo > 0.0) || !(f_hi > f_lo)) {
    throw Error(ErrorKind::kConfig, "ERB spacing needs 0 < f_lo < f_hi and at least one band");
  }
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = erb_number_inverse(0.5 * (erb_number(f_lo) + erb_number(f_hi)));
    return out;
  }
  const double e0 = erb_number(f_lo), e1 = erb_number(f_hi);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = erb_number_inverse(e0 + (e1 - e0) * static_cast<double>(i) /
                                         static_cast<double>(count - 1));
  }
  return out;
}

GammatoneFilter::GammatoneFilter(double center_hz, double sample_rate)
    : center_(center_hz), sample_rate_(sample_rate) {
  if (!(center_hz > 0.0) || !(center_hz < sample_rate / 2.0)) {
    throw Error(ErrorKind::kConfig, "gammatone centre must lie in (0, fs/2)");
  }
  // Bandwidth factor 1.019 ERB for a fourth-order filter.
  const double b = 1.019 * erb_bandwidth(center_hz);
  const double lambda = std::exp(-2.0 * kPi * b / sample_rate);
  pole_ = std::polar(lambda, 2.0 * kPi * center_hz / sample_rate);
  // Unit gain at the centre for the real output, which also carries the
  // negative-frequency image (not negligible for the top bands).
  gain_ = 1.0 - lambda;
  gain_ /= std::pow(magnitude(center_hz), 1.0 / kOrder);
}

void GammatoneFilter::process(std::span<const double> in, std::span<double> out) const {
  if (in.size() != out.size()) throw Error(ErrorKind::kShape, "gammatone: length mismatch");
  std::complex<double> s1{}, s2{}, s3{}, s4{};
  const std::complex<double> p = pole_;
  const double g = gain_;
  for (std::size_t n = 0; n < in.size(); ++n) {
    s1 = g * in[n] + p * s1;
    s2 = g * s1 + p * s2;
    s3 = g * s2 + p * s3;
    s4 = g * s3 + p * s4;
    out[n] = 2.0 * s4.real();
  }
}

double GammatoneFilter::magnitude(double f) const {
  // Output is 2 Re(h * x), i.e. the response H(f) + conj(H(-f)) of the cascade.
  const double w = 2.0 * kPi * f / sample_rate_;
  const auto cascade = [&](double omega) {
    return std::pow(gain_ / (1.0 - pole_ * std::polar(1.0, -omega)), kOrder);
  };
  return std::abs(cascade(w) + std::conj(cascade(-w)));
}

}  // namespace srosync::binaural
