#pragma once
// Widely-linear filters on a circular grid:
//
//   Y(f) = direct(f) X(f) + conjugate(f) conj(X(-f))
//
// Independent I/Q rail responses and IQ skew/imbalance both have this form,
// which lets the whole transmitter model stay in the frequency domain and be
// inverted bin pair by bin pair.

#include <cstddef>
#include <span>

#include "dapr/fieldcore.hpp"

namespace dapr {

struct IqImpairment;

class WidelyLinear {
 public:
  WidelyLinear() = default;
  WidelyLinear(CVec direct, CVec conjugate);

  static WidelyLinear identity(std::size_t n);
  static WidelyLinear strictly_linear(CVec h);
  /// Real-rail convolution: I -> hi * I, Q -> hq * Q, recombined as I + jQ.
  static WidelyLinear from_rail_responses(std::span<const cplx> hi_taps, std::span<const cplx> hq_taps,
                                          std::size_t n);
  /// I(t) + j sqrt(1+rho) Q(t+tau) e^{j phi}; tau applied as a linear phase.
  static WidelyLinear from_iq(const IqImpairment& iq, std::size_t n, double sample_rate_hz);

  std::size_t size() const { return direct_.size(); }
  const CVec& direct() const { return direct_; }
  const CVec& conjugate() const { return conjugate_; }
  bool is_strictly_linear() const { return strictly_; }

  /// Apply to a spectrum in place.
  void apply_spectrum(CVec& spectrum) const;
  /// Apply to time-domain samples in place (FFT round trip).
  void apply_time(CVec& samples) const;

  /// Operator equal to `next` applied after `*this`.
  WidelyLinear then(const WidelyLinear& next) const;
  /// Multiply both branches by a strictly-linear response applied afterwards.
  WidelyLinear then(std::span<const cplx> h) const;
  WidelyLinear then(std::span<const double> h) const;

  /// Pairwise 2x2 inverse. Singular values below clamp_rel * (largest singular
  /// value over all bins) are raised to that floor. Bins where band_mask is 0
  /// map to 0.
  WidelyLinear inverse(double clamp_rel, std::span<const double> band_mask = {}) const;

 private:
  CVec direct_;
  CVec conjugate_;
  bool strictly_ = false;
};

}  // namespace dapr
