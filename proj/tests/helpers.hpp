#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "srosync/dsp/fft.hpp"
#include "srosync/signal.hpp"

namespace srosync::test {

inline std::vector<double> white_noise(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<double> out(n);
  for (double& v : out) v = normal(rng);
  return out;
}

inline std::vector<std::complex<double>> complex_noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::complex<double>> out(n);
  for (auto& v : out) v = {normal(rng), normal(rng)};
  return out;
}

// Windowed-sinc lowpass FIR (Blackman), cutoff as a fraction of Nyquist.
inline std::vector<double> lowpass(std::span<const double> x, double cutoff, std::size_t taps = 255) {
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(taps / 2);
  std::vector<double> h(taps);
  for (std::ptrdiff_t i = -half; i <= half; ++i) {
    const double t = static_cast<double>(i);
    const double sinc = i == 0 ? cutoff : std::sin(std::numbers::pi * cutoff * t) / (std::numbers::pi * t);
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i + half) / static_cast<double>(taps - 1);
    h[static_cast<std::size_t>(i + half)] = sinc * (0.42 - 0.5 * std::cos(a) + 0.08 * std::cos(2 * a));
  }
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    double acc = 0.0;
    for (std::ptrdiff_t k = -half; k <= half; ++k) {
      const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(n) - k;
      if (m >= 0 && m < static_cast<std::ptrdiff_t>(x.size())) acc += h[static_cast<std::size_t>(k + half)] * x[static_cast<std::size_t>(m)];
    }
    y[n] = acc;
  }
  return y;
}

// Time-domain fractional resampler used as an independent oracle:
// y[n] = sum_k x[k] sinc(t - k) w(t - k), t = n / (1 + eps), Kaiser window.
inline double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  for (int k = 1; k < 50; ++k) {
    term *= (x / (2.0 * k)) * (x / (2.0 * k));
    sum += term;
  }
  return sum;
}

// Kaiser-windowed sinc interpolation of x at fractional position t.
inline double sinc_at(std::span<const double> x, double t, int half_taps = 32, double beta = 8.0) {
  const double norm = bessel_i0(beta);
  const long centre = static_cast<long>(std::floor(t));
  double acc = 0.0;
  for (long k = centre - half_taps + 1; k <= centre + half_taps; ++k) {
    if (k < 0 || k >= static_cast<long>(x.size())) continue;
    const double d = t - static_cast<double>(k);
    const double sinc = d == 0.0 ? 1.0 : std::sin(std::numbers::pi * d) / (std::numbers::pi * d);
    const double r = d / static_cast<double>(half_taps);
    const double w = std::abs(r) >= 1.0 ? 0.0 : bessel_i0(beta * std::sqrt(1.0 - r * r)) / norm;
    acc += x[static_cast<std::size_t>(k)] * sinc * w;
  }
  return acc;
}

// y[n] = x(n / (1 + eps)).
inline std::vector<double> sinc_resample(std::span<const double> x, double eps) {
  std::vector<double> y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) y[n] = sinc_at(x, static_cast<double>(n) / (1.0 + eps));
  return y;
}

// y[n] = x(n - delay).
inline std::vector<double> fractional_delay(std::span<const double> x, double delay) {
  std::vector<double> y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) y[n] = sinc_at(x, static_cast<double>(n) - delay);
  return y;
}

// 10 log10(signal power / error power) over [begin, end).
inline double snr_db(std::span<const double> ref, std::span<const double> test, std::size_t begin,
                     std::size_t end) {
  double s = 0.0, e = 0.0;
  for (std::size_t n = begin; n < end; ++n) {
    s += ref[n] * ref[n];
    e += (ref[n] - test[n]) * (ref[n] - test[n]);
  }
  return 10.0 * std::log10(s / e);
}

// Delay (samples) of y relative to x around `centre`, from the PHAT-weighted
// cross-spectrum of Hann-tapered blocks of `len` samples. Searches integer
// lags within +/-max_lag, then refines on a 1e-4 grid below 0.9 Nyquist.
inline double measure_delay(std::span<const double> x, std::span<const double> y,
                            std::size_t centre, std::size_t len, int max_lag = 64) {
  const std::size_t n = 2 * len;
  std::vector<double> bx(n, 0.0), by(n, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t idx = centre - len / 2 + i;
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (static_cast<double>(i) + 0.5) /
                                          static_cast<double>(len));
    bx[i] = w * x[idx];
    by[i] = w * y[idx];
  }
  dsp::RealFft fft(n);
  std::vector<std::complex<double>> fx(fft.num_bins()), fy(fft.num_bins());
  fft.forward(bx, fx);
  fft.forward(by, fy);
  const std::size_t kmax = static_cast<std::size_t>(0.9 * static_cast<double>(n / 2));
  std::vector<std::complex<double>> c(kmax);
  for (std::size_t k = 1; k < kmax; ++k) {
    const auto v = fy[k] * std::conj(fx[k]);
    c[k] = std::abs(v) > 0 ? v / std::abs(v) : 0.0;
  }
  auto score = [&](double d) {
    double acc = 0.0;
    for (std::size_t k = 1; k < kmax; ++k) {
      acc += (c[k] * std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(k) * d /
                                         static_cast<double>(n))).real();
    }
    return acc;
  };
  double best = score(0.0), at = 0.0;
  for (int d = -max_lag; d <= max_lag; ++d) {
    const double s = score(d);
    if (s > best) best = s, at = d;
  }
  double lo = at - 1.0, hi = at + 1.0;
  for (int iter = 0; iter < 4; ++iter) {
    const double step = (hi - lo) / 20.0;
    double b = -1e300, a = lo;
    for (double d = lo; d <= hi + 1e-12; d += step) {
      const double s = score(d);
      if (s > b) b = s, a = d;
    }
    lo = a - step;
    hi = a + step;
  }
  return 0.5 * (lo + hi);
}

}  // namespace srosync::test
