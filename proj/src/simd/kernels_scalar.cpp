#include "srosync/simd/kernels.hpp"

#include <cassert>

namespace srosync::simd {
namespace {

void complex_multiply_scalar(std::span<cplx> data, std::span<const cplx> factors) {
  assert(data.size() == factors.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double ar = data[i].real(), ai = data[i].imag();
    const double br = factors[i].real(), bi = factors[i].imag();
    data[i] = cplx(ar * br - ai * bi, ar * bi + ai * br);
  }
}

void conj_multiply_accumulate_scalar(std::span<cplx> out, std::span<const cplx> w,
                                     std::span<const cplx> y) {
  assert(out.size() == w.size() && out.size() == y.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double wr = w[i].real(), wi = w[i].imag();
    const double yr = y[i].real(), yi = y[i].imag();
    out[i] += cplx(wr * yr + wi * yi, wr * yi - wi * yr);
  }
}

void psd_update_scalar(std::span<cplx> cross, std::span<double> auto_z, std::span<double> auto_x,
                       std::span<const cplx> z, std::span<const cplx> x, double a) {
  const double b = 1.0 - a;
  for (std::size_t i = 0; i < cross.size(); ++i) {
    const double zr = z[i].real(), zi = z[i].imag();
    const double xr = x[i].real(), xi = x[i].imag();
    cross[i] = cplx(a * cross[i].real() + b * (zr * xr + zi * xi),
                    a * cross[i].imag() + b * (zi * xr - zr * xi));
    auto_z[i] = a * auto_z[i] + b * (zr * zr + zi * zi);
    auto_x[i] = a * auto_x[i] + b * (xr * xr + xi * xi);
  }
}

void axpy_scalar(std::span<double> y, double a, std::span<const double> x) {
  assert(y.size() == x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

double dot_scalar(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      "scalar",          complex_multiply_scalar, conj_multiply_accumulate_scalar,
      psd_update_scalar, axpy_scalar,             dot_scalar,
  };
  return table;
}

}  // namespace srosync::simd
