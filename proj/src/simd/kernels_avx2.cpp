// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include <cassert>

#include "srosync/simd/kernels.hpp"

namespace srosync::simd {
namespace {

// Two complex doubles per register: [re0 im0 re1 im1].
inline __m256d cmul(__m256d a, __m256d b) {
  const __m256d b_re = _mm256_movedup_pd(b);
  const __m256d b_im = _mm256_permute_pd(b, 0xF);
  const __m256d a_sw = _mm256_permute_pd(a, 0x5);
  return _mm256_fmaddsub_pd(a, b_re, _mm256_mul_pd(a_sw, b_im));
}

// y * conj(w)
inline __m256d cmul_conj(__m256d y, __m256d w) {
  const __m256d w_re = _mm256_movedup_pd(w);
  const __m256d w_im_neg = _mm256_sub_pd(_mm256_setzero_pd(), _mm256_permute_pd(w, 0xF));
  const __m256d y_sw = _mm256_permute_pd(y, 0x5);
  return _mm256_fmaddsub_pd(y, w_re, _mm256_mul_pd(y_sw, w_im_neg));
}

inline double* dptr(cplx* p) { return reinterpret_cast<double*>(p); }
inline const double* dptr(const cplx* p) { return reinterpret_cast<const double*>(p); }

void complex_multiply_avx2(std::span<cplx> data, std::span<const cplx> factors) {
  assert(data.size() == factors.size());
  const std::size_t n = data.size();
  double* d = dptr(data.data());
  const double* f = dptr(factors.data());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d a = _mm256_loadu_pd(d + 2 * i);
    const __m256d b = _mm256_loadu_pd(f + 2 * i);
    _mm256_storeu_pd(d + 2 * i, cmul(a, b));
  }
  for (; i < n; ++i) {
    const double ar = data[i].real(), ai = data[i].imag();
    const double br = factors[i].real(), bi = factors[i].imag();
    data[i] = cplx(ar * br - ai * bi, ar * bi + ai * br);
  }
}

void conj_multiply_accumulate_avx2(std::span<cplx> out, std::span<const cplx> w,
                                   std::span<const cplx> y) {
  assert(out.size() == w.size() && out.size() == y.size());
  const std::size_t n = out.size();
  double* o = dptr(out.data());
  const double* wp = dptr(w.data());
  const double* yp = dptr(y.data());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d prod = cmul_conj(_mm256_loadu_pd(yp + 2 * i), _mm256_loadu_pd(wp + 2 * i));
    _mm256_storeu_pd(o + 2 * i, _mm256_add_pd(_mm256_loadu_pd(o + 2 * i), prod));
  }
  for (; i < n; ++i) {
    const double wr = w[i].real(), wi = w[i].imag();
    const double yr = y[i].real(), yi = y[i].imag();
    out[i] += cplx(wr * yr + wi * yi, wr * yi - wi * yr);
  }
}

void psd_update_avx2(std::span<cplx> cross, std::span<double> auto_z, std::span<double> auto_x,
                     std::span<const cplx> z, std::span<const cplx> x, double a) {
  const std::size_t n = cross.size();
  const double b = 1.0 - a;
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  const __m128d va2 = _mm_set1_pd(a);
  const __m128d vb2 = _mm_set1_pd(b);
  double* c = dptr(cross.data());
  const double* zp = dptr(z.data());
  const double* xp = dptr(x.data());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d zv = _mm256_loadu_pd(zp + 2 * i);
    const __m256d xv = _mm256_loadu_pd(xp + 2 * i);
    const __m256d zx = cmul_conj(zv, xv);
    const __m256d cv = _mm256_loadu_pd(c + 2 * i);
    _mm256_storeu_pd(c + 2 * i, _mm256_fmadd_pd(va, cv, _mm256_mul_pd(vb, zx)));

    // [zr0^2+zi0^2, ., zr1^2+zi1^2, .] -> gather lanes 0 and 2
    const __m256d zz = _mm256_hadd_pd(_mm256_mul_pd(zv, zv), _mm256_mul_pd(zv, zv));
    const __m256d xx = _mm256_hadd_pd(_mm256_mul_pd(xv, xv), _mm256_mul_pd(xv, xv));
    const __m128d zz2 = _mm_unpacklo_pd(_mm256_castpd256_pd128(zz), _mm256_extractf128_pd(zz, 1));
    const __m128d xx2 = _mm_unpacklo_pd(_mm256_castpd256_pd128(xx), _mm256_extractf128_pd(xx, 1));
    const __m128d az = _mm_loadu_pd(auto_z.data() + i);
    const __m128d ax = _mm_loadu_pd(auto_x.data() + i);
    _mm_storeu_pd(auto_z.data() + i, _mm_fmadd_pd(va2, az, _mm_mul_pd(vb2, zz2)));
    _mm_storeu_pd(auto_x.data() + i, _mm_fmadd_pd(va2, ax, _mm_mul_pd(vb2, xx2)));
  }
  for (; i < n; ++i) {
    const double zr = z[i].real(), zi = z[i].imag();
    const double xr = x[i].real(), xi = x[i].imag();
    cross[i] = cplx(a * cross[i].real() + b * (zr * xr + zi * xi),
                    a * cross[i].imag() + b * (zi * xr - zr * xi));
    auto_z[i] = a * auto_z[i] + b * (zr * zr + zi * zi);
    auto_x[i] = a * auto_x[i] + b * (xr * xr + xi * xi);
  }
}

void axpy_avx2(std::span<double> y, double a, std::span<const double> x) {
  assert(y.size() == x.size());
  const std::size_t n = y.size();
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d yv = _mm256_loadu_pd(y.data() + i);
    _mm256_storeu_pd(y.data() + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x.data() + i), yv));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double dot_avx2(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  const std::size_t n = x.size();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x.data() + i), _mm256_loadu_pd(y.data() + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x.data() + i + 4), _mm256_loadu_pd(y.data() + i + 4),
                           acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x.data() + i), _mm256_loadu_pd(y.data() + i), acc0);
  }
  const __m256d acc = _mm256_add_pd(acc0, acc1);
  const __m128d lo = _mm256_castpd256_pd128(acc);
  const __m128d hi = _mm256_extractf128_pd(acc, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  double total = _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
  for (; i < n; ++i) total += x[i] * y[i];
  return total;
}

}  // namespace

const KernelTable& avx2_kernels_table() {
  static const KernelTable table{
      "avx2",          complex_multiply_avx2, conj_multiply_accumulate_avx2,
      psd_update_avx2, axpy_avx2,             dot_avx2,
  };
  return table;
}

}  // namespace srosync::simd
