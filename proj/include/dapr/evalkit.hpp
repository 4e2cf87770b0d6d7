#pragma once
// Metrics and experiment harnesses: BER, GMI, EVM, threshold-rule net rate,
// the amplitude-constraint noise-floor Monte Carlo and parameter sweeps.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dapr/config.hpp"
#include "dapr/txchain.hpp"

namespace dapr {

double compute_ber(std::span<const cplx> recovered, std::span<const std::uint8_t> truth_bits,
                   const QamConstellation& c);

/// Bit-wise GMI under a Gaussian channel whose variance is pooled from the
/// recovered cloud around the transmitted points.
double compute_gmi(std::span<const cplx> recovered, std::span<const std::uint8_t> truth_bits,
                   const QamConstellation& c);

/// rms |y - x| / rms |x|.
double compute_evm(std::span<const cplx> recovered, std::span<const std::uint8_t> truth_bits,
                   const QamConstellation& c);

struct CodeRateThreshold {
  double code_rate;
  double max_pre_fec_ber;
};

/// Pre-FEC BER admissibility per LDPC rate (a modeling table, not decoder results).
const std::vector<CodeRateThreshold>& ldpc_admissibility();

inline constexpr double kOuterFecOverhead = 1.0625;

struct NetRate {
  double bits_per_second = 0.0;
  double code_rate = 0.0;  // 0 when nothing is admissible
};

NetRate estimate_net_rate(double pre_fec_ber, double pilot_ratio, double symbol_rate_baud, int order);

struct NoiseFloor {
  double field = 0.0;      // E|b~ e^{j psi} - H(a~ e^{j theta})|^2
  double amplitude = 0.0;  // E(b~ - |H(a~ e^{j theta})|)^2
};

/// Monte Carlo of the one-step residual at the true phase. Amplitude noises
/// are Gaussian with variances n0_var (Tx plane) and w0_var (Rx plane); the
/// circular kernel must have unit energy. Field samples are unit-power
/// complex Gaussian.
NoiseFloor noise_floor_montecarlo(double n0_var, double w0_var, std::size_t n_samples, std::span<const cplx> kernel,
                                  std::uint64_t seed = 1);

struct PointResult {
  double pre_fec_ber = 0.0;
  double gmi = 0.0;
  double evm = 0.0;
  int iterations_used = 0;
  bool converged = false;
  NetRate net_rate;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<double> per_iteration_ber;
};

struct PipelineArtifacts {
  FrameLayout frame;
  BranchTraces traces;
  ChannelEstimate estimate;
  ReconstructionResult reconstruction;
};

/// Training settings after applying the receiver mode: the conventional
/// receivers skip the transmitter-side estimates, and the plain one the FFE too.
TrainingConfig receiver_training_config(const ExperimentConfig& cfg);

/// Metrics of a finished reconstruction against the frame's payload bits.
PointResult summarize(const ReconstructionResult& rec, const FrameLayout& frame, const ExperimentConfig& cfg,
                      std::uint64_t seed);

/// Frame -> Tx -> channel -> training -> reconstruction -> metrics for one seed.
PointResult run_point(const ExperimentConfig& cfg, std::uint64_t seed, PipelineArtifacts* artifacts = nullptr,
                      bool record_ber_per_iteration = false);

struct SweepRow {
  double axis_value = 0.0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  PointResult result;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::osnr;
  std::vector<double> values;
  std::vector<SweepRow> rows;  // value-major, seed-minor
  int failures() const;
  /// Mean pre-FEC BER per axis value over successful rows.
  std::vector<double> mean_ber() const;
};

struct SweepOptions {
  int threads = 1;
  /// Return true to skip a (value, seed) pair, e.g. already present on disk.
  std::function<bool(double, std::uint64_t)> skip;
  /// Called (serialized) as each row completes.
  std::function<void(const SweepRow&)> on_row;
};

SweepResult run_sweep(SweepAxis axis, const ExperimentConfig& base, const std::vector<double>& points,
                      const std::vector<std::uint64_t>& seeds, const SweepOptions& opt = {});

/// Canonical JSON of a point result (stable key order and formatting).
std::string serialize(const PointResult& r);

}  // namespace dapr
