#include "dapr/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "dapr/channelsim.hpp"
#include "dapr/fft.hpp"
#include "dapr/reconstructor.hpp"
#include "dapr/rng.hpp"
#include "dapr/trainer.hpp"

namespace dapr {

double compute_ber(std::span<const cplx> recovered, std::span<const std::uint8_t> truth, const QamConstellation& c) {
  const auto m = static_cast<std::size_t>(c.bits_per_symbol());
  if (recovered.size() * m != truth.size()) throw std::invalid_argument("compute_ber: length mismatch");
  if (truth.empty()) return 0.0;
  const Bits got = qam_demap(recovered, c);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < got.size(); ++i) errors += got[i] != truth[i];
  return static_cast<double>(errors) / static_cast<double>(truth.size());
}

double compute_evm(std::span<const cplx> recovered, std::span<const std::uint8_t> truth, const QamConstellation& c) {
  const CVec x = qam_map(truth, c);
  if (x.size() != recovered.size()) throw std::invalid_argument("compute_evm: length mismatch");
  double e = 0.0, p = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    e += std::norm(recovered[i] - x[i]);
    p += std::norm(x[i]);
  }
  return std::sqrt(e / p);
}

double compute_gmi(std::span<const cplx> recovered, std::span<const std::uint8_t> truth, const QamConstellation& c) {
  const CVec x = qam_map(truth, c);
  if (x.size() != recovered.size()) throw std::invalid_argument("compute_gmi: length mismatch");
  if (x.empty()) throw std::invalid_argument("compute_gmi: no symbols");
  bool degenerate = true;
  for (const auto& v : recovered) {
    if (v != recovered[0]) {
      degenerate = false;
      break;
    }
  }
  if (degenerate) throw std::invalid_argument("compute_gmi: degenerate zero-variance cloud");
  double var = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) var += std::norm(recovered[i] - x[i]);
  var = std::max(var / static_cast<double>(x.size()), 1e-12);

  const int m = c.bits_per_symbol();
  const auto& pts = c.points();
  const auto& labels = c.labels();
  std::vector<double> d(pts.size());
  double acc = 0.0;
  for (std::size_t s = 0; s < x.size(); ++s) {
    double dmax = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pts.size(); ++j) {
      d[j] = -std::norm(recovered[s] - pts[j]) / var;
      dmax = std::max(dmax, d[j]);
    }
    double all = 0.0;
    for (double v : d) all += std::exp(v - dmax);
    for (int b = 0; b < m; ++b) {
      const std::uint32_t bit = truth[s * static_cast<std::size_t>(m) + static_cast<std::size_t>(b)];
      double same = 0.0;
      for (std::size_t j = 0; j < pts.size(); ++j) {
        if (((labels[j] >> (m - 1 - b)) & 1u) == bit) same += std::exp(d[j] - dmax);
      }
      acc += std::log2(all / same);
    }
  }
  const double gmi = m - acc / static_cast<double>(x.size());
  return std::clamp(gmi, 0.0, static_cast<double>(m));
}

const std::vector<CodeRateThreshold>& ldpc_admissibility() {
  static const std::vector<CodeRateThreshold> table{
      {1.0, 4.7e-3}, {9.0 / 10.0, 1.5e-2}, {5.0 / 6.0, 2.5e-2}, {3.0 / 4.0, 4.0e-2}, {2.0 / 3.0, 5.5e-2}};
  return table;
}

NetRate estimate_net_rate(double pre_fec_ber, double pilot_ratio, double symbol_rate_baud, int order) {
  if (pilot_ratio < 0.0 || pilot_ratio > 0.5) throw std::invalid_argument("estimate_net_rate: pilot ratio out of range");
  NetRate r;
  for (const auto& t : ldpc_admissibility()) {
    if (pre_fec_ber < t.max_pre_fec_ber) {
      r.code_rate = t.code_rate;
      r.bits_per_second = symbol_rate_baud * std::log2(static_cast<double>(order)) * (1.0 - pilot_ratio) *
                          t.code_rate / kOuterFecOverhead;
      break;
    }
  }
  return r;
}

NoiseFloor noise_floor_montecarlo(double n0_var, double w0_var, std::size_t n_samples, std::span<const cplx> kernel,
                                  std::uint64_t seed) {
  if (kernel.empty()) throw std::invalid_argument("noise_floor_montecarlo: empty kernel");
  if (n0_var < 0.0 || w0_var < 0.0) throw std::invalid_argument("noise_floor_montecarlo: negative variance");
  double e = 0.0;
  for (const auto& v : kernel) e += std::norm(v);
  if (std::fabs(e - 1.0) > 1e-9) throw std::invalid_argument("noise_floor_montecarlo: kernel must have unit energy");
  const std::size_t block = std::max<std::size_t>(4096, kernel.size());
  CVec h(block, cplx(0.0, 0.0));
  std::copy(kernel.begin(), kernel.end(), h.begin());
  fft::forward(h);

  RngStream rng(seed, "noise_floor");
  const double sn = std::sqrt(n0_var), sw = std::sqrt(w0_var);
  const double sx = std::sqrt(0.5);
  double field = 0.0, amp = 0.0;
  std::size_t done = 0;
  CVec x(block), xn(block);
  while (done < n_samples) {
    for (std::size_t i = 0; i < block; ++i) {
      const double re = rng.normal();
      const double im = rng.normal();
      x[i] = cplx(sx * re, sx * im);
      const double a = std::abs(x[i]);
      const double noisy = a + sn * rng.normal();
      xn[i] = a > 0.0 ? x[i] * (noisy / a) : cplx(noisy, 0.0);
    }
    apply_transfer(x, h);
    apply_transfer(xn, h);
    const std::size_t take = std::min(block, n_samples - done);
    for (std::size_t i = 0; i < take; ++i) {
      const double b = std::abs(x[i]);
      const double bt = b + sw * rng.normal();
      const cplx ref = b > 0.0 ? x[i] * (bt / b) : cplx(bt, 0.0);
      field += std::norm(ref - xn[i]);
      const double d = bt - std::abs(xn[i]);
      amp += d * d;
    }
    done += take;
  }
  return {field / static_cast<double>(n_samples), amp / static_cast<double>(n_samples)};
}

TrainingConfig receiver_training_config(const ExperimentConfig& cfg) {
  TrainingConfig t = cfg.training;
  if (cfg.receiver != ReceiverMode::distortion_aware) {
    t.estimate_tx = false;
    t.estimate_iq_nl = false;
    t.refinement_loops = 0;
    t.train_ffe = cfg.receiver == ReceiverMode::conventional_ffe;
  }
  return t;
}

PointResult summarize(const ReconstructionResult& rec, const FrameLayout& frame, const ExperimentConfig& cfg,
                      std::uint64_t seed) {
  const QamConstellation qam(cfg.frame.order);
  PointResult r;
  r.seed = seed;
  r.config_hash = config_hash(cfg);
  r.pre_fec_ber = compute_ber(rec.recovered_symbols, frame.payload_bits, qam);
  r.gmi = compute_gmi(rec.recovered_symbols, frame.payload_bits, qam);
  r.evm = compute_evm(rec.recovered_symbols, frame.payload_bits, qam);
  r.iterations_used = rec.iterations_used;
  r.converged = rec.converged;
  r.net_rate = estimate_net_rate(r.pre_fec_ber, cfg.frame.pilot_ratio(), cfg.frame.symbol_rate_baud, cfg.frame.order);
  r.per_iteration_ber = rec.per_iteration_ber;
  return r;
}

PointResult run_point(const ExperimentConfig& cfg, std::uint64_t seed, PipelineArtifacts* artifacts,
                      bool record_ber) {
  cfg.validate();
  const QamConstellation qam(cfg.frame.order);
  FrameLayout frame = build_frame(cfg.frame, qam, seed);
  const ComplexWaveform tx = build_tx_waveform(frame, cfg.frame, seed);
  BranchTraces traces = run_channel(tx, cfg.channel, seed);
  ChannelEstimate est = run_training(traces, cfg.frame, frame.training_symbols, receiver_training_config(cfg));
  const CVec pilots = pilot_symbols(cfg.frame, seed);
  ReconstructionResult rec =
      reconstruct(traces, est, cfg.frame, pilots, cfg.pr, record_ber ? &frame.payload_bits : nullptr);
  PointResult r = summarize(rec, frame, cfg, seed);
  if (artifacts) {
    artifacts->frame = std::move(frame);
    artifacts->traces = std::move(traces);
    artifacts->estimate = std::move(est);
    artifacts->reconstruction = std::move(rec);
  }
  return r;
}

int SweepResult::failures() const {
  return static_cast<int>(std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return !r.ok; }));
}

std::vector<double> SweepResult::mean_ber() const {
  std::vector<double> out;
  for (double v : values) {
    double s = 0.0;
    int n = 0;
    for (const auto& r : rows) {
      if (r.ok && r.axis_value == v) {
        s += r.result.pre_fec_ber;
        ++n;
      }
    }
    out.push_back(n ? s / n : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

SweepResult run_sweep(SweepAxis axis, const ExperimentConfig& base, const std::vector<double>& points,
                      const std::vector<std::uint64_t>& seeds, const SweepOptions& opt) {
  SweepResult res;
  res.axis = axis;
  res.values = points;
  struct Job {
    double value;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double v : points) {
    for (auto s : seeds) {
      if (opt.skip && opt.skip(v, s)) continue;
      jobs.push_back({v, s});
    }
  }
  res.rows.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      SweepRow row;
      row.axis_value = jobs[i].value;
      row.seed = jobs[i].seed;
      try {
        row.result = run_point(apply_axis(base, axis, jobs[i].value), jobs[i].seed);
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
      res.rows[i] = row;
      if (opt.on_row) {
        const std::lock_guard<std::mutex> lock(mu);
        opt.on_row(row);
      }
    }
  };
  const int n = std::max(1, std::min<int>(opt.threads, static_cast<int>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return res;
}

std::string serialize(const PointResult& r) {
  nlohmann::ordered_json j;
  j["seed"] = r.seed;
  j["config_hash"] = r.config_hash;
  j["pre_fec_ber"] = r.pre_fec_ber;
  j["gmi_bits_per_symbol"] = r.gmi;
  j["evm"] = r.evm;
  j["iterations_used"] = r.iterations_used;
  j["converged"] = r.converged;
  j["net_rate_bps"] = r.net_rate.bits_per_second;
  j["code_rate"] = r.net_rate.code_rate;
  j["per_iteration_ber"] = r.per_iteration_ber;
  return j.dump(2) + "\n";
}

}  // namespace dapr
