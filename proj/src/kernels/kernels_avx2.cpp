// AVX2/FMA variants of the kernels in kernels_scalar.cpp. Compiled with
// -mavx2 -mfma; only reachable through avx2_table() after a CPU check.

#include <immintrin.h>

#include <cmath>

#include "dapr/kernels.hpp"

namespace dapr::kernels::avx2 {
namespace {

inline const double* dp(const cplx* p) { return reinterpret_cast<const double*>(p); }
inline double* dp(cplx* p) { return reinterpret_cast<double*>(p); }

// [|x0|^2, |x1|^2, |x2|^2, |x3|^2] from two registers holding x0..x3.
inline __m256d abs2_4(__m256d v0, __m256d v1) {
  const __m256d s0 = _mm256_mul_pd(v0, v0);
  const __m256d s1 = _mm256_mul_pd(v1, v1);
  return _mm256_permute4x64_pd(_mm256_hadd_pd(s0, s1), 0xD8);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

const __m256d kAbsMask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7FFFFFFFFFFFFFFFLL));

void cmul_inplace(cplx* x, const cplx* h, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d xv = _mm256_loadu_pd(dp(x + i));
    const __m256d hv = _mm256_loadu_pd(dp(h + i));
    const __m256d hr = _mm256_movedup_pd(hv);
    const __m256d hi = _mm256_permute_pd(hv, 0xF);
    const __m256d xs = _mm256_permute_pd(xv, 0x5);
    _mm256_storeu_pd(dp(x + i), _mm256_fmaddsub_pd(xv, hr, _mm256_mul_pd(xs, hi)));
  }
  for (; i < n; ++i) x[i] *= h[i];
}

void scale_inplace(cplx* x, double s, std::size_t n) {
  const __m256d sv = _mm256_set1_pd(s);
  double* d = dp(x);
  const std::size_t m = 2 * n;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) _mm256_storeu_pd(d + i, _mm256_mul_pd(_mm256_loadu_pd(d + i), sv));
  for (; i < m; ++i) d[i] *= s;
}

void abs2(const cplx* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v0 = _mm256_loadu_pd(dp(x + i));
    const __m256d v1 = _mm256_loadu_pd(dp(x + i + 2));
    _mm256_storeu_pd(out + i, abs2_4(v0, v1));
  }
  for (; i < n; ++i) out[i] = x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
}

void impose_magnitude(cplx* y, const double* amp, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v0 = _mm256_loadu_pd(dp(y + i));
    const __m256d v1 = _mm256_loadu_pd(dp(y + i + 2));
    const __m256d a = _mm256_loadu_pd(amp + i);
    const __m256d m = _mm256_sqrt_pd(abs2_4(v0, v1));
    const __m256d nz = _mm256_cmp_pd(m, zero, _CMP_GT_OQ);
    const __m256d s = _mm256_and_pd(_mm256_div_pd(a, m), nz);
    const __m256d fill = _mm256_andnot_pd(nz, a);
    const __m256d s0 = _mm256_permute4x64_pd(s, 0x50);
    const __m256d s1 = _mm256_permute4x64_pd(s, 0xFA);
    const __m256d f0 = _mm256_blend_pd(_mm256_permute4x64_pd(fill, 0x50), zero, 0xA);
    const __m256d f1 = _mm256_blend_pd(_mm256_permute4x64_pd(fill, 0xFA), zero, 0xA);
    _mm256_storeu_pd(dp(y + i), _mm256_add_pd(_mm256_mul_pd(v0, s0), f0));
    _mm256_storeu_pd(dp(y + i + 2), _mm256_add_pd(_mm256_mul_pd(v1, s1), f1));
  }
  for (; i < n; ++i) {
    const double m = std::sqrt(y[i].real() * y[i].real() + y[i].imag() * y[i].imag());
    if (m > 0.0) {
      const double s = amp[i] / m;
      y[i] = cplx(y[i].real() * s, y[i].imag() * s);
    } else {
      y[i] = cplx(amp[i], 0.0);
    }
  }
}

double magnitude_abs_error(const cplx* y, const double* amp, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v0 = _mm256_loadu_pd(dp(y + i));
    const __m256d v1 = _mm256_loadu_pd(dp(y + i + 2));
    const __m256d m = _mm256_sqrt_pd(abs2_4(v0, v1));
    acc = _mm256_add_pd(acc, _mm256_and_pd(_mm256_sub_pd(m, _mm256_loadu_pd(amp + i)), kAbsMask));
  }
  double total = hsum(acc);
  for (; i < n; ++i) total += std::fabs(std::abs(y[i]) - amp[i]);
  return total;
}

double scaled_abs_diff(const double* a, double sa, const double* b, double sb, std::size_t n) {
  const __m256d va = _mm256_set1_pd(sa);
  const __m256d vb = _mm256_set1_pd(sb);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_mul_pd(_mm256_loadu_pd(a + i), va),
                                    _mm256_mul_pd(_mm256_loadu_pd(b + i), vb));
    acc = _mm256_add_pd(acc, _mm256_and_pd(d, kAbsMask));
  }
  double total = hsum(acc);
  for (; i < n; ++i) total += std::fabs(a[i] * sa - b[i] * sb);
  return total;
}

void blend(const cplx* a, const cplx* b, double w, cplx* out, std::size_t n) {
  const __m256d vw = _mm256_set1_pd(w);
  const __m256d vv = _mm256_set1_pd(1.0 - w);
  const double* pa = dp(a);
  const double* pb = dp(b);
  double* po = dp(out);
  const std::size_t m = 2 * n;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const __m256d r = _mm256_add_pd(_mm256_mul_pd(vv, _mm256_loadu_pd(pa + i)),
                                    _mm256_mul_pd(vw, _mm256_loadu_pd(pb + i)));
    _mm256_storeu_pd(po + i, r);
  }
  for (; i < m; ++i) po[i] = (1.0 - w) * pa[i] + w * pb[i];
}

void cubic_rails(cplx* x, double c2_i, double c3_i, double c2_q, double c3_q, std::size_t n) {
  const __m256d c2 = _mm256_setr_pd(c2_i, c2_q, c2_i, c2_q);
  const __m256d c3 = _mm256_setr_pd(c3_i, c3_q, c3_i, c3_q);
  double* d = dp(x);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d r = _mm256_loadu_pd(d + 2 * i);
    const __m256d poly = _mm256_fmadd_pd(c3, r, c2);
    _mm256_storeu_pd(d + 2 * i, _mm256_fmadd_pd(_mm256_mul_pd(r, r), poly, r));
  }
  for (; i < n; ++i) {
    const double r = x[i].real(), q = x[i].imag();
    x[i] = cplx(r + r * r * (c2_i + c3_i * r), q + q * q * (c2_q + c3_q * q));
  }
}

double sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double total = hsum(acc);
  for (; i < n; ++i) total += x[i];
  return total;
}

}  // namespace

const KernelTable& table() {
  static const KernelTable t{
      "avx2",          cmul_inplace, scale_inplace, abs2, impose_magnitude, magnitude_abs_error,
      scaled_abs_diff, blend,        cubic_rails,   sum,
  };
  return t;
}

}  // namespace dapr::kernels::avx2
