#pragma once
// Ground-truth link model: transmitter rail responses, modulator
// nonlinearity, IQ imbalance/skew, fiber dispersion, the 2-way splitter with a
// dispersive element on one arm, and noisy square-law photodetection.

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>

#include "dapr/fieldcore.hpp"
#include "dapr/rng.hpp"

namespace dapr {

struct IqImpairment {
  double rho = 0.0;    // power imbalance; Q rail scaled by sqrt(1 + rho)
  double tau_s = 0.0;  // Q rail time skew, seconds
  double phi = 0.0;    // phase error of the Q contribution, radians

  void validate() const;
  bool is_identity() const { return rho == 0.0 && tau_s == 0.0 && phi == 0.0; }
  bool operator==(const IqImpairment&) const = default;
};

/// Per-rail memoryless cubic x + c2 x^2 + c3 x^3.
struct NonlinearCoeffs {
  double c2_i = 0.0;
  double c3_i = 0.0;
  double c2_q = 0.0;
  double c3_q = 0.0;
  double range = 1.0;  // A: the cubics must be strictly increasing on [-A, A]

  bool is_identity() const { return c2_i == 0.0 && c3_i == 0.0 && c2_q == 0.0 && c3_q == 0.0; }
  bool is_monotonic() const;
  /// Throws std::invalid_argument when either rail is not strictly increasing on [-A, A].
  void validate() const;
  double eval_i(double x) const { return x + c2_i * x * x + c3_i * x * x * x; }
  double eval_q(double x) const { return x + c2_q * x * x + c3_q * x * x * x; }
  bool operator==(const NonlinearCoeffs&) const = default;
};

struct ChannelModel {
  FirResponse tx_response_i = FirResponse::identity(FirRole::tx_i);
  FirResponse tx_response_q = FirResponse::identity(FirRole::tx_q);
  NonlinearCoeffs nl;
  IqImpairment iq;
  DispersionSpec fiber;
  double splitter_ratio = 0.5;  // power fraction routed to the dispersed branch
  DispersionSpec element;       // dispersed branch only
  double element_loss_db = 0.0;
  std::array<FirResponse, 2> rx_response{FirResponse::identity(FirRole::rx_branch1),
                                         FirResponse::identity(FirRole::rx_branch2)};
  /// Added after the Rx response, as a fraction of the branch mean photocurrent.
  std::array<double, 2> dc_offset{0.0, 0.0};
  double osnr_db = std::numeric_limits<double>::infinity();
  double thermal_noise_a_per_sqrt_hz = 0.0;
  double responsivity_a_per_w = 1.0;
  double enob = std::numeric_limits<double>::infinity();
  /// Total optical power at the receiver input. Unset: the field is used as is.
  std::optional<double> rx_power_dbm;

  void validate() const;
};

ComplexWaveform apply_tx_response(const ComplexWaveform& w, const FirResponse& hi, const FirResponse& hq);
ComplexWaveform apply_nonlinearity(const ComplexWaveform& w, const NonlinearCoeffs& nl);
ComplexWaveform apply_iq(const ComplexWaveform& w, const IqImpairment& iq);

/// Noise variance of a Gaussian quantizer model: full-scale sine power divided
/// by 10^((6.02 enob + 1.76) / 10). Zero for infinite ENOB.
double quantization_noise_variance(double full_scale_amplitude, double enob);

/// 0.1 nm reference bandwidth at the given wavelength, in Hz.
double osnr_reference_bandwidth_hz(double wavelength_nm = kDefaultWavelengthNm);

/// Complex circular white Gaussian noise at the OSNR implied by osnr_db.
ComplexWaveform add_ase(const ComplexWaveform& w, double osnr_db, RngStream& rng,
                        double wavelength_nm = kDefaultWavelengthNm);

/// responsivity |w|^2 plus thermal noise (electrical Nyquist bandwidth) plus
/// ENOB-equivalent ADC noise relative to the trace full scale.
IntensityTrace photodetect(const ComplexWaveform& w, const ChannelModel& m, Branch branch,
                           RngStream& thermal_rng, RngStream& adc_rng);

struct BranchTraces {
  IntensityTrace dispersed;
  IntensityTrace undispersed;
  const IntensityTrace& operator[](Branch b) const { return b == Branch::dispersed ? dispersed : undispersed; }
  IntensityTrace& operator[](Branch b) { return b == Branch::dispersed ? dispersed : undispersed; }
};

/// Full receiver chain; noise streams are derived from master_seed by role.
BranchTraces run_channel(const ComplexWaveform& w, const ChannelModel& m, std::uint64_t master_seed);

}  // namespace dapr
