#pragma once

#include <functional>

namespace srosync::dsp {

struct GoldenResult {
  double x = 0.0;
  double value = 0.0;
  int iterations = 0;
};

// Golden-section search for the maximum of a unimodal f on [lo, hi]. Stops when
// the bracket is no wider than 2*tol and returns its midpoint, so the result
// lies within tol of the maximiser. Throws kNumeric if f returns a non-finite
// value and kDomain unless lo < hi and tol > 0.
GoldenResult golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                                double tol);

// Upper bound on iterations for a bracket of width (hi - lo).
int golden_iteration_bound(double lo, double hi, double tol);

}  // namespace srosync::dsp
