#include "dapr/kernels.hpp"

#include <cmath>

namespace dapr::kernels {
namespace {

void cmul_inplace(cplx* x, const cplx* h, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    const double hr = h[i].real(), hi = h[i].imag();
    x[i] = cplx(xr * hr - xi * hi, xr * hi + xi * hr);
  }
}

void scale_inplace(cplx* x, double s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= s;
}

void abs2(const cplx* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
  }
}

void impose_magnitude(cplx* y, const double* amp, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
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
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = std::sqrt(y[i].real() * y[i].real() + y[i].imag() * y[i].imag());
    acc += std::fabs(m - amp[i]);
  }
  return acc;
}

double scaled_abs_diff(const double* a, double sa, const double* b, double sb, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::fabs(a[i] * sa - b[i] * sb);
  return acc;
}

void blend(const cplx* a, const cplx* b, double w, cplx* out, std::size_t n) {
  const double v = 1.0 - w;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = cplx(v * a[i].real() + w * b[i].real(), v * a[i].imag() + w * b[i].imag());
  }
}

void cubic_rails(cplx* x, double c2_i, double c3_i, double c2_q, double c3_q, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double r = x[i].real(), q = x[i].imag();
    x[i] = cplx(r + r * r * (c2_i + c3_i * r), q + q * q * (c2_q + c3_q * q));
  }
}

double sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{
      "scalar",       cmul_inplace, scale_inplace, abs2, impose_magnitude, magnitude_abs_error,
      scaled_abs_diff, blend,       cubic_rails,   sum,
  };
  return table;
}

}  // namespace dapr::kernels
