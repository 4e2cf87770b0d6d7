#include "dapr/widely_linear.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "dapr/channelsim.hpp"
#include "dapr/fft.hpp"
#include "dapr/kernels.hpp"

namespace dapr {

WidelyLinear::WidelyLinear(CVec direct, CVec conjugate)
    : direct_(std::move(direct)), conjugate_(std::move(conjugate)) {
  if (direct_.size() != conjugate_.size()) throw std::invalid_argument("WidelyLinear: branch length mismatch");
  strictly_ = std::all_of(conjugate_.begin(), conjugate_.end(), [](cplx c) { return c == cplx(0.0, 0.0); });
}

WidelyLinear WidelyLinear::identity(std::size_t n) {
  return strictly_linear(CVec(n, cplx(1.0, 0.0)));
}

WidelyLinear WidelyLinear::strictly_linear(CVec h) {
  WidelyLinear w;
  w.conjugate_.assign(h.size(), cplx(0.0, 0.0));
  w.direct_ = std::move(h);
  w.strictly_ = true;
  return w;
}

WidelyLinear WidelyLinear::from_rail_responses(std::span<const cplx> hi_taps, std::span<const cplx> hq_taps,
                                               std::size_t n) {
  const CVec hi = fir_transfer(hi_taps, n);
  const CVec hq = fir_transfer(hq_taps, n);
  CVec d(n), c(n);
  for (std::size_t k = 0; k < n; ++k) {
    d[k] = 0.5 * (hi[k] + hq[k]);
    c[k] = 0.5 * (hi[k] - hq[k]);
  }
  return WidelyLinear(std::move(d), std::move(c));
}

WidelyLinear WidelyLinear::from_iq(const IqImpairment& iq, std::size_t n, double sample_rate_hz) {
  iq.validate();
  const cplx g = std::sqrt(1.0 + iq.rho) * std::polar(1.0, iq.phi);
  const auto f = fft::frequencies(n, sample_rate_hz);
  CVec d(n), c(n);
  for (std::size_t k = 0; k < n; ++k) {
    cplx e = std::polar(1.0, 2.0 * std::numbers::pi * f[k] * iq.tau_s);
    // The Nyquist bin is its own mirror; keep the delayed rail real there.
    if (fft::mirror_bin(k, n) == k) e = cplx(e.real(), 0.0);
    d[k] = 0.5 * (1.0 + g * e);
    c[k] = 0.5 * (1.0 - g * e);
  }
  return WidelyLinear(std::move(d), std::move(c));
}

void WidelyLinear::apply_spectrum(CVec& x) const {
  const std::size_t n = size();
  if (x.size() != n) throw std::invalid_argument("WidelyLinear::apply_spectrum: length mismatch");
  if (strictly_) {
    kernels::active().cmul_inplace(x.data(), direct_.data(), n);
    return;
  }
  const CVec in = x;
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = direct_[k] * in[k] + conjugate_[k] * std::conj(in[fft::mirror_bin(k, n)]);
  }
}

void WidelyLinear::apply_time(CVec& x) const {
  fft::forward(x);
  apply_spectrum(x);
  fft::inverse(x);
}

WidelyLinear WidelyLinear::then(const WidelyLinear& next) const {
  const std::size_t n = size();
  if (next.size() != n) throw std::invalid_argument("WidelyLinear::then: length mismatch");
  if (strictly_ && next.strictly_) {
    CVec d(n);
    for (std::size_t k = 0; k < n; ++k) d[k] = next.direct_[k] * direct_[k];
    return strictly_linear(std::move(d));
  }
  CVec d(n), c(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t m = fft::mirror_bin(k, n);
    const cplx d1t = std::conj(direct_[m]);
    const cplx c1t = std::conj(conjugate_[m]);
    d[k] = next.direct_[k] * direct_[k] + next.conjugate_[k] * c1t;
    c[k] = next.direct_[k] * conjugate_[k] + next.conjugate_[k] * d1t;
  }
  return WidelyLinear(std::move(d), std::move(c));
}

WidelyLinear WidelyLinear::then(std::span<const cplx> h) const {
  if (h.size() != size()) throw std::invalid_argument("WidelyLinear::then: length mismatch");
  WidelyLinear w = *this;
  for (std::size_t k = 0; k < size(); ++k) {
    w.direct_[k] *= h[k];
    w.conjugate_[k] *= h[k];
  }
  return w;
}

WidelyLinear WidelyLinear::then(std::span<const double> h) const {
  if (h.size() != size()) throw std::invalid_argument("WidelyLinear::then: length mismatch");
  WidelyLinear w = *this;
  for (std::size_t k = 0; k < size(); ++k) {
    w.direct_[k] *= h[k];
    w.conjugate_[k] *= h[k];
  }
  return w;
}

WidelyLinear WidelyLinear::inverse(double clamp_rel, std::span<const double> band_mask) const {
  const std::size_t n = size();
  if (!band_mask.empty() && band_mask.size() != n) {
    throw std::invalid_argument("WidelyLinear::inverse: mask length mismatch");
  }
  if (!(clamp_rel >= 0.0)) throw std::invalid_argument("WidelyLinear::inverse: clamp must be non-negative");
  auto in_band = [&](std::size_t k) { return band_mask.empty() || band_mask[k] != 0.0; };

  if (strictly_) {
    double peak = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (in_band(k)) peak = std::max(peak, std::abs(direct_[k]));
    }
    const double floor = clamp_rel * peak;
    CVec d(n, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) {
      if (!in_band(k)) continue;
      const double a = std::abs(direct_[k]);
      if (a >= floor && a > 0.0) {
        d[k] = 1.0 / direct_[k];
      } else if (floor > 0.0) {
        d[k] = a > 0.0 ? std::conj(direct_[k]) / (a * floor) : cplx(1.0 / floor, 0.0);
      }
    }
    return strictly_linear(std::move(d));
  }

  using M2 = Eigen::Matrix2cd;
  auto pair_matrix = [&](std::size_t k) {
    const std::size_t m = fft::mirror_bin(k, n);
    M2 a;
    a << direct_[k], conjugate_[k], std::conj(conjugate_[m]), std::conj(direct_[m]);
    return a;
  };
  double peak = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!in_band(k)) continue;
    Eigen::JacobiSVD<M2> svd(pair_matrix(k));
    peak = std::max(peak, svd.singularValues()(0));
  }
  const double floor = clamp_rel * peak;
  CVec d(n, cplx(0.0, 0.0)), c(n, cplx(0.0, 0.0));
  for (std::size_t k = 0; k < n; ++k) {
    if (!in_band(k)) continue;
    Eigen::JacobiSVD<M2> svd(pair_matrix(k), Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Vector2d s = svd.singularValues();
    Eigen::Vector2cd sinv;
    for (int i = 0; i < 2; ++i) {
      const double v = std::max(s(i), floor);
      sinv(i) = v > 0.0 ? 1.0 / v : 0.0;
    }
    const M2 inv = svd.matrixV() * sinv.asDiagonal() * svd.matrixU().adjoint();
    d[k] = inv(0, 0);
    c[k] = inv(0, 1);
  }
  return WidelyLinear(std::move(d), std::move(c));
}

}  // namespace dapr
