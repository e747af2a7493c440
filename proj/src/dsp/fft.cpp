#include "srosync/dsp/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

#include "srosync/error.hpp"

namespace srosync::dsp {

struct RealFft::Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
  ~Plans() {
    if (forward) fftw_destroy_plan(forward);
    if (inverse) fftw_destroy_plan(inverse);
  }
};

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::shared_ptr<const RealFft::Plans> plans_for(std::size_t n) {
  static std::map<std::size_t, std::shared_ptr<const RealFft::Plans>> cache;
  std::lock_guard lock(planner_mutex());
  if (auto it = cache.find(n); it != cache.end()) return it->second;

  std::vector<double> re(n);
  std::vector<fftw_complex> spec(n / 2 + 1);
  auto plans = std::make_shared<RealFft::Plans>();
  const int len = static_cast<int>(n);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  plans->forward = fftw_plan_dft_r2c_1d(len, re.data(), spec.data(), flags);
  plans->inverse = fftw_plan_dft_c2r_1d(len, spec.data(), re.data(), flags);
  if (!plans->forward || !plans->inverse) {
    throw Error(ErrorKind::kNumeric, "FFTW failed to plan length " + std::to_string(n));
  }
  cache.emplace(n, plans);
  return plans;
}

}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
  if (n < 2 || n % 2 != 0) {
    throw Error(ErrorKind::kConfig, "FFT length must be even and >= 2, got " + std::to_string(n));
  }
  plans_ = plans_for(n);
}

void RealFft::forward(std::span<const double> in, std::span<cplx> out) const {
  if (in.size() != n_ || out.size() != num_bins()) {
    throw Error(ErrorKind::kShape, "RealFft::forward size mismatch");
  }
  fftw_execute_dft_r2c(plans_->forward, const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void RealFft::inverse(std::span<const cplx> in, std::span<double> out) const {
  if (in.size() != num_bins() || out.size() != n_) {
    throw Error(ErrorKind::kShape, "RealFft::inverse size mismatch");
  }
  // c2r destroys its input.
  thread_local std::vector<cplx> scratch;
  scratch.assign(in.begin(), in.end());
  fftw_execute_dft_c2r(plans_->inverse, reinterpret_cast<fftw_complex*>(scratch.data()),
                       out.data());
  const double scale = 1.0 / static_cast<double>(n_);
  for (double& v : out) v *= scale;
}

}  // namespace srosync::dsp
