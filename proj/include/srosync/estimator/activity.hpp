#pragma once

#include <cmath>
#include <complex>
#include <span>

namespace srosync::estimator {

// Energy gate: a frame is active when its energy lies within `threshold_db` of
// a running peak that decays by `peak_decay` per frame.
class ActivityDetector {
 public:
  explicit ActivityDetector(double threshold_db = 40.0, double peak_decay = 0.999)
      : threshold_(std::pow(10.0, -threshold_db / 10.0)), decay_(peak_decay) {}

  bool update(std::span<const std::complex<double>> frame);
  bool update_energy(double energy);

  double peak() const { return peak_; }

 private:
  double threshold_;
  double decay_;
  double peak_ = 0.0;
};

}  // namespace srosync::estimator
