#pragma once

#include <complex>
#include <span>
#include <string_view>

// Inner-loop kernels. Every kernel has a scalar reference implementation; wider
// variants are compiled separately and selected at runtime from CPU features.
// The scalar versions define the semantics; the others are tested against them.

namespace srosync::simd {

using cplx = std::complex<double>;

struct KernelTable {
  const char* name;

  // data[i] *= factors[i]
  void (*complex_multiply)(std::span<cplx> data, std::span<const cplx> factors);

  // out[i] += conj(w[i]) * y[i]
  void (*conj_multiply_accumulate)(std::span<cplx> out, std::span<const cplx> w,
                                   std::span<const cplx> y);

  // Exponential PSD recursion with forgetting factor `a`:
  //   cross[i]  = a*cross[i]  + (1-a) * z[i]*conj(x[i])
  //   auto_z[i] = a*auto_z[i] + (1-a) * |z[i]|^2
  //   auto_x[i] = a*auto_x[i] + (1-a) * |x[i]|^2
  void (*psd_update)(std::span<cplx> cross, std::span<double> auto_z, std::span<double> auto_x,
                     std::span<const cplx> z, std::span<const cplx> x, double a);

  // y[i] += a * x[i]
  void (*axpy)(std::span<double> y, double a, std::span<const double> x);

  // sum_i x[i]*y[i]
  double (*dot)(std::span<const double> x, std::span<const double> y);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks the features.
const KernelTable* avx2_kernels();

// Table used by the library. Defaults to the widest supported variant; the
// SROSYNC_KERNELS environment variable ("scalar", "avx2", "auto") overrides.
const KernelTable& active_kernels();

// Returns false (and leaves the selection unchanged) if `name` is unavailable.
bool select_kernels(std::string_view name);

}  // namespace srosync::simd
