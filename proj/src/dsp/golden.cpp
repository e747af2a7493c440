#include "srosync/dsp/golden.hpp"

#include <cmath>
#include <numbers>

#include "srosync/error.hpp"

namespace srosync::dsp {

namespace {

double checked(const std::function<double(double)>& f, double x) {
  const double v = f(x);
  if (!std::isfinite(v)) {
    throw Error(ErrorKind::kNumeric, "objective is not finite at x = " + std::to_string(x));
  }
  return v;
}

}  // namespace

int golden_iteration_bound(double lo, double hi, double tol) {
  return static_cast<int>(std::ceil(std::log((hi - lo) / tol) / std::log(1.618))) + 2;
}

GoldenResult golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                                double tol) {
  if (!(lo < hi)) throw Error(ErrorKind::kDomain, "golden search needs lo < hi");
  if (!(tol > 0.0)) throw Error(ErrorKind::kDomain, "golden search needs tol > 0");

  constexpr double inv_phi = 1.0 / std::numbers::phi;
  double a = lo, b = hi;
  double c = b - (b - a) * inv_phi;
  double d = a + (b - a) * inv_phi;
  double fc = checked(f, c);
  double fd = checked(f, d);
  int iterations = 0;

  while (b - a > 2.0 * tol) {
    ++iterations;
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - (b - a) * inv_phi;
      fc = checked(f, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + (b - a) * inv_phi;
      fd = checked(f, d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, checked(f, x), iterations};
}

}  // namespace srosync::dsp
