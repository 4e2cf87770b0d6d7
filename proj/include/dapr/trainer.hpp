#pragma once
// Training stage: per-branch dispersion search and sync, Rx FFE + DC,
// single-PD transmitter response estimation, greedy IQ/nonlinearity search
// and the forward/reverse distortion model used by the reconstructor.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dapr/channelsim.hpp"
#include "dapr/txchain.hpp"
#include "dapr/widely_linear.hpp"

namespace dapr {

struct GridAxis {
  double span = 0.2;  // symmetric: [-span, span]
  double step = 0.01;
  std::vector<double> values() const;
};

struct TrainingConfig {
  int ffe_taps = 101;
  int tx_est_taps = 511;
  int tx_est_max_iters = 20;
  int refinement_loops = 0;
  struct CdSearch {
    double center_ps_per_nm = -2500.0;
    double span_ps_per_nm = 4000.0;
    double step_ps_per_nm = 10.0;
  } cd_search;
  GridAxis phi{0.2, 0.01};
  GridAxis tau_samples{1.0, 0.05};
  GridAxis rho{0.3, 0.01};
  GridAxis c2{0.2, 0.01};
  GridAxis c3{0.2, 0.01};
  int grid_rounds = 3;
  double nl_range = 1.0;
  int nl_table_points = 4096;
  /// Relative singular-value floor for the frequency-domain inversions.
  double inverse_clamp = 1e-2;
  /// Ridge added to the Tx response normal equations, relative to trace/dim.
  double tx_est_ridge = 1e-6;
  bool train_ffe = true;
  bool estimate_tx = true;
  bool estimate_iq_nl = true;

  void validate() const;
};

struct CdEstimate {
  DispersionSpec total;  // from the unpremixed Tx plane to the photodiode
  long lag_samples = 0;
  double peak = 0.0;
  bool ambiguous = false;
};

struct BranchEstimate {
  DispersionSpec total_cd;  // premix included
  long lag_samples = 0;
  bool cd_ambiguous = false;
  RVec ffe_taps{1.0};  // real, odd length, centre at zero delay
  double dc_offset = 0.0;
  double trace_scale = 1.0;  // applied when no FFE is trained
};

struct StageRecord {
  int loop = 0;
  std::string stage;
  std::array<double, 2> mae{0.0, 0.0};  // per branch, normalized intensity MAE
};

struct TxSnapshot {
  int loop = 0;
  CVec tx_i;
  CVec tx_q;
  IqImpairment iq;
  NonlinearCoeffs nl;
};

struct ChannelEstimate {
  std::array<BranchEstimate, 2> branches;  // indexed by Branch
  FirResponse tx_response_i = FirResponse::identity(FirRole::tx_i);
  FirResponse tx_response_q = FirResponse::identity(FirRole::tx_q);
  IqImpairment iq;
  NonlinearCoeffs nl;

  std::vector<StageRecord> stages;
  std::vector<TxSnapshot> snapshots;
  std::vector<std::vector<double>> tx_est_mae;  // Algorithm history per estimate run
  int tx_est_iterations = 0;
  std::vector<std::string> warnings;

  /// Negated triple reported alongside the exact inverse used internally.
  IqImpairment reverse_iq() const { return {-iq.rho, -iq.tau_s, -iq.phi}; }
  const BranchEstimate& branch(Branch b) const { return branches[static_cast<std::size_t>(b)]; }
  BranchEstimate& branch(Branch b) { return branches[static_cast<std::size_t>(b)]; }
};

/// Same dispersion and sync, everything else identity: no FFE, no Tx, IQ or
/// nonlinearity compensation.
ChannelEstimate conventional_estimate(const ChannelEstimate& est);

/// Monotone tabulated inverse of x + c2 x^2 + c3 x^3 on [-A, A], linearly
/// extrapolated outside.
class CubicInverse {
 public:
  CubicInverse() = default;
  CubicInverse(double c2, double c3, double range, int points);
  double operator()(double y) const;
  bool is_identity() const { return identity_; }

 private:
  bool identity_ = true;
  RVec x_;
  RVec y_;
};

/// Forward and reverse distortion between the Tx digital plane (after pulse
/// shaping, before premix) and the field at each photodiode, on an n-sample
/// circular grid.
class DistortionModel {
 public:
  DistortionModel(const ChannelEstimate& est, const FrameSpec& spec, std::size_t n, double clamp_rel,
                  double bandwidth_cutoff_hz, double nl_range, int nl_table_points);

  std::size_t size() const { return n_; }
  bool has_nonlinearity() const { return has_nl_; }

  /// Time-domain samples in, time-domain samples out.
  void forward(CVec& x, Branch b) const;
  void backward(CVec& y, Branch b) const;
  /// Spectrum in (unnormalized DFT), time-domain field out.
  void forward_from_spectrum(CVec& spectrum, Branch b) const;
  /// Time-domain field in, Tx-plane spectrum out (band-limited).
  void backward_to_spectrum(CVec& y, Branch b) const;

 private:
  std::size_t n_;
  bool has_nl_;
  NonlinearCoeffs nl_;
  CubicInverse inv_i_;
  CubicInverse inv_q_;
  WidelyLinear pre_;
  WidelyLinear pre_inv_;
  std::array<WidelyLinear, 2> post_;
  std::array<WidelyLinear, 2> post_inv_;
};

/// mean | I_m / mean(I_m) - I_e / mean(I_e) |; the objective used everywhere in training.
double normalized_intensity_mae(std::span<const double> measured, std::span<const double> expected);

/// 10 log10(var(I_e) / mean((I_m - I_e)^2)) on mean-normalized intensities.
double intensity_snr_db(std::span<const double> measured, std::span<const double> expected);

CdEstimate estimate_cd(const IntensityTrace& trace, const ComplexWaveform& training,
                       const TrainingConfig& cfg, long expected_lag_samples);

struct FfeResult {
  RVec taps;
  double dc_offset = 0.0;
  double mae_before = 0.0;
  double mae_after = 0.0;
};

/// LS real FIR from DC-removed measured to DC-removed expected intensity,
/// then the DC offset minimizing the absolute error of the equalized trace.
FfeResult train_rx_ffe(std::span<const double> measured, std::span<const double> expected, int taps);

/// Apply a branch estimate (sync, FFE or scale, DC) to a whole trace.
RVec equalize_trace(const IntensityTrace& trace, const BranchEstimate& be, long expected_lag_samples);

struct KnownDistortion {
  IqImpairment iq;
  NonlinearCoeffs nl;
};

struct TxEstimate {
  CVec hi;
  CVec hq;
  std::vector<double> mae;  // per iteration, up to and including the breaking one
  int best_iteration = 0;
  bool converged = true;
};

/// Single-PD transmitter response estimator. `tx_plane` is the premixed,
/// gain-scaled training waveform; `amplitude_trace` is the equalized intensity.
TxEstimate estimate_tx_response(std::span<const double> amplitude_trace, const ComplexWaveform& tx_plane,
                                const DispersionSpec& after_tx, const TrainingConfig& cfg,
                                double bandwidth_cutoff_hz, const KnownDistortion* known = nullptr);

struct IqNlEstimate {
  IqImpairment iq;
  NonlinearCoeffs nl;
  double objective_start = 0.0;
  double objective_end = 0.0;
  std::vector<std::string> boundary_warnings;
};

/// Greedy coordinate search in the order phi, tau, rho, c2_I, c2_Q, c3_I, c3_Q.
/// `tx_distorted` is the training waveform after the estimated Tx response.
/// `use` selects which branches (dispersed, undispersed) enter the objective.
IqNlEstimate estimate_iq_nl(const std::array<RVec, 2>& measured, const CVec& tx_distorted,
                            const std::array<DispersionSpec, 2>& after_tx, double sample_rate_hz,
                            const TrainingConfig& cfg, std::array<bool, 2> use = {true, true});

/// Training-sequence intensity SNR per branch for a given estimate.
std::array<double, 2> training_intensity_snr_db(const BranchTraces& traces, const ChannelEstimate& est,
                                                const FrameSpec& spec, const CVec& training_symbols,
                                                const TrainingConfig& cfg);

ChannelEstimate run_training(const BranchTraces& traces, const FrameSpec& spec, const CVec& training_symbols,
                             const TrainingConfig& cfg);

/// Default bandwidth constraint: half the RRC occupied bandwidth.
double default_bandwidth_cutoff(const FrameSpec& spec);

}  // namespace dapr
