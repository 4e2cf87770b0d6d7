#pragma once
// Dual-trace Gerchberg-Saxton reconstruction between the Tx digital plane and
// the two photodiode planes, with distortion-aware propagation, pilot and
// bandwidth constraints and discrepancy-triggered phase reset.

#include <array>
#include <limits>
#include <optional>
#include <vector>

#include "dapr/trainer.hpp"
#include "dapr/txchain.hpp"

namespace dapr {

enum class TraceSchedule {
  opposite_alternation,  // A: 1,2,1,2...  B: 2,1,2,1...
  same_alternation,      // both: 1,2,1,2...
};

struct PrConfig {
  int max_iters = 100;
  double convergence_rel_change = 1e-3;
  int convergence_hold_iters = 10;
  bool phase_reset_enabled = false;
  double phase_reset_threshold = 0.5;
  double bandwidth_cutoff_hz = 0.0;  // 0 selects half the RRC occupied bandwidth
  TraceSchedule trace_schedule = TraceSchedule::opposite_alternation;
  double mix_weight = 0.5;
  /// false: forward/reverse propagation ignores the Tx, IQ and nonlinearity estimates.
  bool distortion_aware = true;
  bool stop_at_convergence = true;
  /// Payload repeat to reconstruct; -1 selects the middle one.
  int payload_repeat = -1;
  double inverse_clamp = 1e-2;
  int nl_table_points = 4096;

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  double amp_error_a = 0.0;
  double amp_error_b = 0.0;
  int resets = 0;
  std::optional<double> ber;
};

struct ReconstructionResult {
  CVec recovered_symbols;  // payload data symbols (pilots removed), unit mean power
  int iterations_used = 0;
  std::vector<double> per_iteration_amp_error;
  std::vector<double> per_iteration_ber;
  std::vector<IterationRecord> diagnostics;
  bool converged = false;
};

struct GsState {
  CVec trace_a;  // Tx-plane symbols, one payload block
  CVec trace_b;
};

/// Fixed per-run data shared by every iteration.
struct GsContext {
  std::size_t block_len = 0;
  int sps = 2;
  RVec shaping;  // RRC response scaled by sqrt(sps) on the sps*L grid
  RVec band_mask;
  std::vector<bool> pilot_mask;
  CVec pilot_values;  // full-length, meaningful at pilot positions only
  std::array<RVec, 2> amplitude;  // measured sqrt(max(I, 0)) per branch

  GsContext(const FrameSpec& spec, std::size_t block_len, double cutoff_hz, const CVec& pilots,
            std::array<RVec, 2> amplitude);
  CVec shape_spectrum(const CVec& symbols) const;
  CVec matched_decimate(const CVec& spectrum) const;
  void apply_pilots(CVec& symbols) const;
};

struct StepStats {
  double amp_error_a = 0.0;
  double amp_error_b = 0.0;
  int resets = 0;
};

Branch scheduled_branch(const PrConfig& cfg, int iteration, int trace);

GsState initial_state(const GsContext& ctx);

StepStats gs_iteration_step(GsState& state, const GsContext& ctx, const DistortionModel& model, const PrConfig& cfg,
                            int iteration);

/// Zero the phase wherever |ampA - ampB| / mean amplitude exceeds the
/// threshold; returns the number of samples reset.
int selective_phase_reset(CVec& a, CVec& b, double threshold);

bool check_convergence(const std::vector<double>& history, const PrConfig& cfg);

/// `pilots` are the known pilot values of one payload block (pilot_symbols()).
/// When truth is supplied BER is recorded each iteration (observer only).
ReconstructionResult reconstruct(const BranchTraces& traces, const ChannelEstimate& est, const FrameSpec& spec,
                                 const CVec& pilots, const PrConfig& cfg, const Bits* truth_bits = nullptr);

/// Scale symbols to unit mean power.
CVec normalize_power(const CVec& s);

}  // namespace dapr
