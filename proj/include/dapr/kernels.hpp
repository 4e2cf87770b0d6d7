#pragma once
// Data-parallel inner loops shared by the propagation, detection and
// phase-retrieval code. Each kernel has a scalar reference implementation and
// (on x86-64) an AVX2/FMA variant; the active table is chosen once at startup.

#include <complex>
#include <cstddef>
#include <string_view>

namespace dapr::kernels {

using cplx = std::complex<double>;

struct KernelTable {
  std::string_view name;

  // x[i] *= h[i]
  void (*cmul_inplace)(cplx* x, const cplx* h, std::size_t n);
  // x[i] *= s
  void (*scale_inplace)(cplx* x, double s, std::size_t n);
  // out[i] = |x[i]|^2
  void (*abs2)(const cplx* x, double* out, std::size_t n);
  // y[i] <- amp[i] * y[i] / |y[i]|; samples with |y[i]| == 0 take phase 0.
  void (*impose_magnitude)(cplx* y, const double* amp, std::size_t n);
  // sum_i | |y[i]| - amp[i] |
  double (*magnitude_abs_error)(const cplx* y, const double* amp, std::size_t n);
  // sum_i |a[i] * sa - b[i] * sb|
  double (*scaled_abs_diff)(const double* a, double sa, const double* b, double sb,
                            std::size_t n);
  // out[i] = (1 - w) * a[i] + w * b[i]
  void (*blend)(const cplx* a, const cplx* b, double w, cplx* out, std::size_t n);
  // Memoryless cubic on each rail: r + c2 r^2 + c3 r^3, separate coefficients per rail.
  void (*cubic_rails)(cplx* x, double c2_i, double c3_i, double c2_q, double c3_q,
                      std::size_t n);
  // sum_i x[i]
  double (*sum)(const double* x, std::size_t n);
};

const KernelTable& scalar_table();

// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

// The table used by the library. Set DAPR_SIMD=scalar in the environment to
// force the reference kernels.
const KernelTable& active();

}  // namespace dapr::kernels
