#include "dapr/reconstructor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dapr/evalkit.hpp"
#include "dapr/fft.hpp"
#include "dapr/kernels.hpp"

namespace dapr {

void PrConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("pr.max_iters must be >= 1");
  if (!(convergence_rel_change > 0.0)) throw std::invalid_argument("pr.convergence_rel_change must be positive");
  if (convergence_hold_iters < 1) throw std::invalid_argument("pr.convergence_hold_iters must be >= 1");
  if (!(phase_reset_threshold > 0.0)) throw std::invalid_argument("pr.phase_reset_threshold must be positive");
  if (bandwidth_cutoff_hz < 0.0) throw std::invalid_argument("pr.bandwidth_cutoff_hz must not be negative");
  if (mix_weight < 0.0 || mix_weight > 1.0) throw std::invalid_argument("pr.mix_weight must lie in [0, 1]");
  if (!(inverse_clamp >= 0.0)) throw std::invalid_argument("pr.inverse_clamp must not be negative");
}

GsContext::GsContext(const FrameSpec& spec, std::size_t l, double cutoff_hz, const CVec& pilots,
                     std::array<RVec, 2> amp)
    : block_len(l), sps(spec.sps), amplitude(std::move(amp)) {
  const std::size_t n = l * static_cast<std::size_t>(sps);
  shaping = rrc_transfer(n, spec.rolloff, sps);
  const double g = std::sqrt(static_cast<double>(sps));
  for (auto& v : shaping) v *= g;
  band_mask = brickwall_mask(n, spec.sample_rate_hz(), cutoff_hz);
  pilot_mask.resize(l);
  pilot_values.assign(l, cplx(0.0, 0.0));
  std::size_t ip = 0;
  for (std::size_t i = 0; i < l; ++i) {
    pilot_mask[i] = spec.is_pilot(i);
    if (pilot_mask[i]) {
      if (ip >= pilots.size()) throw std::invalid_argument("reconstruct: too few pilot values");
      pilot_values[i] = pilots[ip++];
    }
  }
  if (ip != pilots.size()) throw std::invalid_argument("reconstruct: pilot count mismatch");
}

CVec GsContext::shape_spectrum(const CVec& symbols) const {
  CVec s = symbols;
  fft::forward(s);
  const std::size_t n = shaping.size();
  CVec x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = s[k % block_len] * shaping[k];
  return x;
}

CVec GsContext::matched_decimate(const CVec& z) const {
  CVec s(block_len, cplx(0.0, 0.0));
  for (std::size_t k = 0; k < z.size(); ++k) s[k % block_len] += z[k] * shaping[k];
  const double inv = 1.0 / static_cast<double>(sps);
  for (auto& v : s) v *= inv;
  fft::inverse(s);
  return s;
}

void GsContext::apply_pilots(CVec& s) const {
  for (std::size_t i = 0; i < block_len; ++i) {
    if (pilot_mask[i]) s[i] = pilot_values[i];
  }
}

Branch scheduled_branch(const PrConfig& cfg, int iteration, int trace) {
  int phase = iteration % 2;
  if (trace == 1 && cfg.trace_schedule == TraceSchedule::opposite_alternation) phase ^= 1;
  return phase == 0 ? Branch::dispersed : Branch::undispersed;
}

GsState initial_state(const GsContext& ctx) {
  GsState s;
  s.trace_a.assign(ctx.block_len, cplx(0.0, 0.0));
  ctx.apply_pilots(s.trace_a);
  s.trace_b = s.trace_a;
  return s;
}

int selective_phase_reset(CVec& a, CVec& b, double threshold) {
  if (a.size() != b.size()) throw std::invalid_argument("selective_phase_reset: length mismatch");
  if (std::isinf(threshold) || a.empty()) return 0;
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += std::abs(a[i]) + std::abs(b[i]);
  mean /= 2.0 * static_cast<double>(a.size());
  if (mean == 0.0) return 0;
  int count = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ma = std::abs(a[i]);
    const double mb = std::abs(b[i]);
    if (std::fabs(ma - mb) / mean > threshold) {
      a[i] = ma;
      b[i] = mb;
      ++count;
    }
  }
  return count;
}

StepStats gs_iteration_step(GsState& state, const GsContext& ctx, const DistortionModel& model, const PrConfig& cfg,
                            int iteration) {
  StepStats st;
  std::array<CVec*, 2> traces{&state.trace_a, &state.trace_b};
  std::array<CVec, 2> tx;
  const auto& k = kernels::active();
  for (int t = 0; t < 2; ++t) {
    const Branch b = scheduled_branch(cfg, iteration, t);
    const RVec& amp = ctx.amplitude[static_cast<std::size_t>(b)];
    CVec y = ctx.shape_spectrum(*traces[static_cast<std::size_t>(t)]);
    model.forward_from_spectrum(y, b);
    const double mean_amp = k.sum(amp.data(), amp.size()) / static_cast<double>(amp.size());
    const double err = k.magnitude_abs_error(y.data(), amp.data(), y.size()) / static_cast<double>(y.size()) / mean_amp;
    (t == 0 ? st.amp_error_a : st.amp_error_b) = err;
    k.impose_magnitude(y.data(), amp.data(), y.size());
    model.backward_to_spectrum(y, b);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= ctx.band_mask[i];
    tx[static_cast<std::size_t>(t)] = std::move(y);
  }
  if (cfg.phase_reset_enabled) {
    for (auto& v : tx) fft::inverse(v);
    st.resets = selective_phase_reset(tx[0], tx[1], cfg.phase_reset_threshold);
    for (auto& v : tx) fft::forward(v);
  }
  std::array<CVec, 2> sym;
  for (std::size_t t = 0; t < 2; ++t) {
    sym[t] = ctx.matched_decimate(tx[t]);
    ctx.apply_pilots(sym[t]);
  }
  k.blend(sym[0].data(), sym[1].data(), cfg.mix_weight, state.trace_a.data(), ctx.block_len);
  k.blend(sym[1].data(), sym[0].data(), cfg.mix_weight, state.trace_b.data(), ctx.block_len);
  return st;
}

bool check_convergence(const std::vector<double>& h, const PrConfig& cfg) {
  const auto hold = static_cast<std::size_t>(cfg.convergence_hold_iters);
  if (h.size() < hold + 1) return false;
  for (std::size_t i = h.size() - hold; i < h.size(); ++i) {
    const double prev = h[i - 1];
    const double change = prev == 0.0 ? (h[i] == 0.0 ? 0.0 : 1.0) : std::fabs(h[i] - prev) / prev;
    if (!(change < cfg.convergence_rel_change)) return false;
  }
  return true;
}

CVec normalize_power(const CVec& s) {
  double p = 0.0;
  for (const auto& v : s) p += std::norm(v);
  if (s.empty() || p == 0.0) return s;
  const double g = 1.0 / std::sqrt(p / static_cast<double>(s.size()));
  CVec o(s);
  for (auto& v : o) v *= g;
  return o;
}

namespace {

CVec data_symbols(const GsState& s, const GsContext& ctx) {
  CVec out;
  out.reserve(ctx.block_len);
  for (std::size_t i = 0; i < ctx.block_len; ++i) {
    if (!ctx.pilot_mask[i]) out.push_back(0.5 * (s.trace_a[i] + s.trace_b[i]));
  }
  return normalize_power(out);
}

}  // namespace

ReconstructionResult reconstruct(const BranchTraces& traces, const ChannelEstimate& est, const FrameSpec& spec,
                                 const CVec& pilots, const PrConfig& cfg, const Bits* truth_bits) {
  cfg.validate();
  spec.validate();
  const auto l = static_cast<std::size_t>(spec.payload_block_len);
  const std::size_t n = l * static_cast<std::size_t>(spec.sps);
  const int repeat = cfg.payload_repeat >= 0 ? cfg.payload_repeat : spec.payload_repeats / 2;
  if (repeat >= spec.payload_repeats) throw std::invalid_argument("pr.payload_repeat out of range");
  const long lag0 = static_cast<long>(spec.guard_len) * spec.sps;
  const auto start = static_cast<long>(spec.payload_offset(repeat)) * spec.sps;

  std::array<RVec, 2> amp;
  for (std::size_t b = 0; b < 2; ++b) {
    const auto br = static_cast<Branch>(b);
    if (traces[br].size() != spec.frame_symbols() * static_cast<std::size_t>(spec.sps)) {
      throw std::invalid_argument("reconstruct: trace length does not match the frame");
    }
    const RVec eq = equalize_trace(traces[br], est.branches[b], lag0);
    amp[b].resize(n);
    for (std::size_t i = 0; i < n; ++i) amp[b][i] = std::sqrt(std::max(eq[static_cast<std::size_t>(start) + i], 0.0));
  }

  const double cutoff = cfg.bandwidth_cutoff_hz > 0.0 ? cfg.bandwidth_cutoff_hz : default_bandwidth_cutoff(spec);
  const GsContext ctx(spec, l, cutoff, pilots, std::move(amp));
  const ChannelEstimate model_est = cfg.distortion_aware ? est : [&] {
    ChannelEstimate e = est;
    e.tx_response_i = FirResponse::identity(FirRole::tx_i);
    e.tx_response_q = FirResponse::identity(FirRole::tx_q);
    e.iq = {};
    e.nl = NonlinearCoeffs{};
    return e;
  }();
  const DistortionModel model(model_est, spec, n, cfg.inverse_clamp, cutoff, model_est.nl.range,
                              cfg.nl_table_points);

  std::optional<QamConstellation> qam;
  if (truth_bits) qam.emplace(spec.order);

  ReconstructionResult res;
  GsState state = initial_state(ctx);
  for (int it = 0; it < cfg.max_iters; ++it) {
    const StepStats st = gs_iteration_step(state, ctx, model, cfg, it);
    IterationRecord rec{it + 1, st.amp_error_a, st.amp_error_b, st.resets, std::nullopt};
    res.per_iteration_amp_error.push_back(0.5 * (st.amp_error_a + st.amp_error_b));
    if (truth_bits) {
      const double ber = compute_ber(data_symbols(state, ctx), *truth_bits, *qam);
      rec.ber = ber;
      res.per_iteration_ber.push_back(ber);
    }
    res.diagnostics.push_back(rec);
    res.iterations_used = it + 1;
    if (check_convergence(res.per_iteration_amp_error, cfg)) {
      res.converged = true;
      if (cfg.stop_at_convergence) break;
    }
  }
  res.recovered_symbols = data_symbols(state, ctx);
  return res;
}

}  // namespace dapr
