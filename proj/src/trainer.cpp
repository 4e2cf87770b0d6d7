#include "dapr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "dapr/fft.hpp"
#include "dapr/kernels.hpp"

namespace dapr {

std::vector<double> GridAxis::values() const {
  if (!(step > 0.0) || span < 0.0) throw std::invalid_argument("grid axis needs a positive step");
  const auto n = static_cast<long>(std::floor(span / step + 1e-9));
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(2 * n + 1));
  for (long i = -n; i <= n; ++i) v.push_back(static_cast<double>(i) * step);
  return v;
}

void TrainingConfig::validate() const {
  if (ffe_taps < 1 || ffe_taps % 2 == 0) throw std::invalid_argument("training.ffe_taps must be odd and >= 1");
  if (tx_est_taps < 1 || tx_est_taps % 2 == 0) throw std::invalid_argument("training.tx_est_taps must be odd and >= 1");
  if (tx_est_max_iters < 1) throw std::invalid_argument("training.tx_est_max_iters must be >= 1");
  if (refinement_loops < 0) throw std::invalid_argument("training.refinement_loops must be >= 0");
  if (!(cd_search.step_ps_per_nm > 0.0) || cd_search.span_ps_per_nm < 0.0) {
    throw std::invalid_argument("training.cd_search needs a positive step");
  }
  for (const GridAxis* a : {&phi, &tau_samples, &rho, &c2, &c3}) {
    if (!(a->step > 0.0)) throw std::invalid_argument("training grid steps must be positive");
  }
  if (grid_rounds < 1) throw std::invalid_argument("training.grid_rounds must be >= 1");
  if (nl_table_points < 2) throw std::invalid_argument("training.nl_table_points must be >= 2");
}

ChannelEstimate conventional_estimate(const ChannelEstimate& est) {
  ChannelEstimate c;
  for (std::size_t b = 0; b < 2; ++b) {
    c.branches[b].total_cd = est.branches[b].total_cd;
    c.branches[b].lag_samples = est.branches[b].lag_samples;
    c.branches[b].cd_ambiguous = est.branches[b].cd_ambiguous;
    c.branches[b].trace_scale = est.branches[b].trace_scale;
  }
  return c;
}

double default_bandwidth_cutoff(const FrameSpec& spec) {
  return 0.5 * spec.symbol_rate_baud * (1.0 + spec.rolloff);
}

// ---------------------------------------------------------------------------

CubicInverse::CubicInverse(double c2, double c3, double range, int points) {
  if (c2 == 0.0 && c3 == 0.0) return;
  identity_ = false;
  x_.resize(static_cast<std::size_t>(points));
  y_.resize(x_.size());
  for (std::size_t k = 0; k < x_.size(); ++k) {
    const double x = -range + 2.0 * range * static_cast<double>(k) / static_cast<double>(points - 1);
    x_[k] = x;
    y_[k] = x + c2 * x * x + c3 * x * x * x;
  }
  for (std::size_t k = 1; k < y_.size(); ++k) {
    if (!(y_[k] > y_[k - 1])) throw std::invalid_argument("CubicInverse: cubic is not increasing on the range");
  }
}

double CubicInverse::operator()(double y) const {
  if (identity_) return y;
  const std::size_t n = y_.size();
  std::size_t k;
  if (y <= y_.front()) {
    k = 0;
  } else if (y >= y_.back()) {
    k = n - 2;
  } else {
    k = static_cast<std::size_t>(std::upper_bound(y_.begin(), y_.end(), y) - y_.begin()) - 1;
  }
  const double t = (y - y_[k]) / (y_[k + 1] - y_[k]);
  return x_[k] + t * (x_[k + 1] - x_[k]);
}

// ---------------------------------------------------------------------------

DistortionModel::DistortionModel(const ChannelEstimate& est, const FrameSpec& spec, std::size_t n, double clamp_rel,
                                 double cutoff_hz, double nl_range, int nl_table_points)
    : n_(n), has_nl_(!est.nl.is_identity()), nl_(est.nl) {
  const double fs = spec.sample_rate_hz();
  const double g = drive_gain(spec);
  CVec hp = cd_transfer(n, fs, spec.premix);
  for (auto& v : hp) v *= g;
  pre_ = WidelyLinear::strictly_linear(std::move(hp));
  const bool tx_identity = est.tx_response_i.taps.size() == 1 && est.tx_response_q.taps.size() == 1 &&
                           est.tx_response_i.taps[0] == cplx(1.0, 0.0) && est.tx_response_q.taps[0] == cplx(1.0, 0.0);
  if (!tx_identity) {
    pre_ = pre_.then(WidelyLinear::from_rail_responses(est.tx_response_i.taps, est.tx_response_q.taps, n));
  }
  const RVec mask = brickwall_mask(n, fs, cutoff_hz);
  pre_inv_ = pre_.inverse(clamp_rel, mask);
  if (has_nl_) {
    inv_i_ = CubicInverse(nl_.c2_i, nl_.c3_i, nl_range, nl_table_points);
    inv_q_ = CubicInverse(nl_.c2_q, nl_.c3_q, nl_range, nl_table_points);
  }
  const WidelyLinear iq = est.iq.is_identity() ? WidelyLinear::identity(n) : WidelyLinear::from_iq(est.iq, n, fs);
  for (std::size_t b = 0; b < 2; ++b) {
    const DispersionSpec after = est.branches[b].total_cd.plus(-spec.premix.ps_per_nm);
    const CVec hcd = cd_transfer(n, fs, after);
    post_[b] = iq.then(std::span<const cplx>(hcd));
    post_inv_[b] = post_[b].inverse(clamp_rel);
    if (!has_nl_) {
      post_inv_[b] = post_inv_[b].then(pre_inv_);
      post_[b] = pre_.then(post_[b]);
    }
  }
}

void DistortionModel::forward_from_spectrum(CVec& s, Branch b) const {
  const auto bi = static_cast<std::size_t>(b);
  if (!has_nl_) {
    post_[bi].apply_spectrum(s);
    fft::inverse(s);
    return;
  }
  pre_.apply_spectrum(s);
  fft::inverse(s);
  kernels::active().cubic_rails(s.data(), nl_.c2_i, nl_.c3_i, nl_.c2_q, nl_.c3_q, s.size());
  fft::forward(s);
  post_[bi].apply_spectrum(s);
  fft::inverse(s);
}

void DistortionModel::backward_to_spectrum(CVec& y, Branch b) const {
  const auto bi = static_cast<std::size_t>(b);
  fft::forward(y);
  post_inv_[bi].apply_spectrum(y);
  if (!has_nl_) return;
  fft::inverse(y);
  for (auto& v : y) v = cplx(inv_i_(v.real()), inv_q_(v.imag()));
  fft::forward(y);
  pre_inv_.apply_spectrum(y);
}

void DistortionModel::forward(CVec& x, Branch b) const {
  fft::forward(x);
  forward_from_spectrum(x, b);
}

void DistortionModel::backward(CVec& y, Branch b) const {
  backward_to_spectrum(y, b);
  fft::inverse(y);
}

// ---------------------------------------------------------------------------

double normalized_intensity_mae(std::span<const double> m, std::span<const double> e) {
  if (m.size() != e.size() || m.empty()) throw std::invalid_argument("normalized_intensity_mae: length mismatch");
  const auto& k = kernels::active();
  const double n = static_cast<double>(m.size());
  const double mm = k.sum(m.data(), m.size()) / n;
  const double me = k.sum(e.data(), e.size()) / n;
  if (mm == 0.0 || me == 0.0) throw std::invalid_argument("normalized_intensity_mae: zero-mean intensity");
  return k.scaled_abs_diff(m.data(), 1.0 / mm, e.data(), 1.0 / me, m.size()) / n;
}

double intensity_snr_db(std::span<const double> m, std::span<const double> e) {
  if (m.size() != e.size() || m.empty()) throw std::invalid_argument("intensity_snr_db: length mismatch");
  const double n = static_cast<double>(m.size());
  const double mm = std::accumulate(m.begin(), m.end(), 0.0) / n;
  const double me = std::accumulate(e.begin(), e.end(), 0.0) / n;
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double en = e[i] / me;
    const double d = m[i] / mm - en;
    sig += (en - 1.0) * (en - 1.0);
    err += d * d;
  }
  return 10.0 * std::log10(sig / err);
}

namespace {

// c[d] = sum_m x[m] conj(y[m - d]), circular.
CVec xcorr(CVec x, CVec y) {
  fft::forward(x);
  fft::forward(y);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= std::conj(y[i]);
  fft::inverse(x);
  return x;
}

double median(RVec v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

struct CorrPoint {
  double peak = -2.0;
  long lag = 0;
};

// Normalized correlation of a zero-mean reference against windows of a trace.
class CdCorrelator {
 public:
  CdCorrelator(const IntensityTrace& trace, const ComplexWaveform& training, long expected_lag)
      : training_(training), n_trace_(static_cast<long>(trace.size())), nt_(static_cast<long>(training.size())) {
    if (trace.size() < training.size()) throw std::invalid_argument("estimate_cd: trace shorter than training");
    w_ = std::min(nt_ / 2, std::max<long>(0, (n_trace_ - nt_) / 2));
    start_ = expected_lag - w_;
    seg_len_ = nt_ + 2 * w_;
    seg_.resize(static_cast<std::size_t>(seg_len_));
    for (long i = 0; i < seg_len_; ++i) {
      long k = (start_ + i) % n_trace_;
      if (k < 0) k += n_trace_;
      seg_[static_cast<std::size_t>(i)] = trace.samples[static_cast<std::size_t>(k)];
    }
    const double mean = std::accumulate(seg_.begin(), seg_.end(), 0.0) / static_cast<double>(seg_len_);
    for (auto& v : seg_) v -= mean;
    s1_.assign(seg_.size() + 1, 0.0);
    s2_.assign(seg_.size() + 1, 0.0);
    for (std::size_t i = 0; i < seg_.size(); ++i) {
      s1_[i + 1] = s1_[i] + seg_[i];
      s2_[i + 1] = s2_[i] + seg_[i] * seg_[i];
    }
    nfft_ = next_pow2(static_cast<std::size_t>(seg_len_ + nt_));
    seg_spec_.assign(nfft_, cplx(0.0, 0.0));
    std::copy(seg_.begin(), seg_.end(), seg_spec_.begin());
    fft::forward(seg_spec_);
  }

  RVec reference(double d_ps_per_nm) const {
    const ComplexWaveform p = propagate_cd(training_, DispersionSpec{d_ps_per_nm, wavelength_});
    RVec r(p.size());
    kernels::active().abs2(p.samples.data(), r.data(), r.size());
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    for (auto& v : r) v -= mean;
    return r;
  }

  double window_norm(long off) const {
    const auto a = static_cast<std::size_t>(off);
    const auto b = static_cast<std::size_t>(off + nt_);
    const double s1 = s1_[b] - s1_[a];
    const double s2 = s2_[b] - s2_[a];
    return std::sqrt(std::max(s2 - s1 * s1 / static_cast<double>(nt_), 1e-300));
  }

  static double norm(const RVec& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return std::sqrt(s);
  }

  // All lags in the search window; fills the per-lag curve when requested.
  CorrPoint full(double d, RVec* curve = nullptr) const {
    const RVec r = reference(d);
    CVec rs(nfft_, cplx(0.0, 0.0));
    std::copy(r.begin(), r.end(), rs.begin());
    fft::forward(rs);
    for (std::size_t i = 0; i < nfft_; ++i) rs[i] = seg_spec_[i] * std::conj(rs[i]);
    fft::inverse(rs);
    const double rn = norm(r);
    CorrPoint best;
    if (curve) curve->assign(static_cast<std::size_t>(2 * w_ + 1), 0.0);
    for (long off = 0; off <= 2 * w_; ++off) {
      const double c = rs[static_cast<std::size_t>(off)].real() / (rn * window_norm(off));
      if (curve) (*curve)[static_cast<std::size_t>(off)] = c;
      if (c > best.peak) {
        best.peak = c;
        best.lag = start_ + off;
      }
    }
    return best;
  }

  // Only lags within +-radius of `lag`, by direct summation.
  CorrPoint local(double d, long lag, long radius) const {
    const RVec r = reference(d);
    const double rn = norm(r);
    CorrPoint best;
    for (long l = lag - radius; l <= lag + radius; ++l) {
      const long off = l - start_;
      if (off < 0 || off > 2 * w_) continue;
      double acc = 0.0;
      for (long i = 0; i < nt_; ++i) acc += r[static_cast<std::size_t>(i)] * seg_[static_cast<std::size_t>(off + i)];
      const double c = acc / (rn * window_norm(off));
      if (c > best.peak) {
        best.peak = c;
        best.lag = l;
      }
    }
    return best;
  }

  void set_wavelength(double w) { wavelength_ = w; }
  long window() const { return w_; }
  long start() const { return start_; }

 private:
  const ComplexWaveform& training_;
  long n_trace_;
  long nt_;
  long w_ = 0;
  long start_ = 0;
  long seg_len_ = 0;
  RVec seg_;
  RVec s1_, s2_;
  std::size_t nfft_ = 0;
  CVec seg_spec_;
  double wavelength_ = kDefaultWavelengthNm;
};

}  // namespace

CdEstimate estimate_cd(const IntensityTrace& trace, const ComplexWaveform& training, const TrainingConfig& cfg,
                       long expected_lag) {
  const CdCorrelator corr(trace, training, expected_lag);
  const double step = cfg.cd_search.step_ps_per_nm;
  const double coarse = 5.0 * step;
  const double lo = cfg.cd_search.center_ps_per_nm - cfg.cd_search.span_ps_per_nm;
  const auto n_coarse = static_cast<long>(std::floor(2.0 * cfg.cd_search.span_ps_per_nm / coarse + 1e-9)) + 1;

  std::vector<CorrPoint> curve(static_cast<std::size_t>(n_coarse));
  long ib = 0;
  for (long i = 0; i < n_coarse; ++i) {
    curve[static_cast<std::size_t>(i)] = corr.full(lo + static_cast<double>(i) * coarse);
    if (curve[static_cast<std::size_t>(i)].peak > curve[static_cast<std::size_t>(ib)].peak) ib = i;
  }
  const long lag = curve[static_cast<std::size_t>(ib)].lag;

  CdEstimate est;
  double best_d = lo + static_cast<double>(ib) * coarse;
  CorrPoint best = curve[static_cast<std::size_t>(ib)];
  for (double grid : {step, 0.1 * step}) {
    const double centre = best_d;
    const double half = grid == step ? coarse : step;
    const auto m = static_cast<long>(std::round(half / grid));
    for (long k = -m; k <= m; ++k) {
      if (k == 0) continue;
      const double d = centre + static_cast<double>(k) * grid;
      const CorrPoint c = corr.local(d, lag, 2);
      if (c.peak > best.peak) {
        best = c;
        best_d = d;
      }
    }
  }
  // Snap to the configured step so estimates are reported on the declared grid.
  est.total = DispersionSpec{std::round(best_d / (0.1 * step)) * (0.1 * step), kDefaultWavelengthNm};
  est.lag_samples = best.lag;
  est.peak = best.peak;

  // Ambiguity: another local maximum of the coarse curve, more than one
  // coarse step away, within 3x the correlation noise floor of the best.
  RVec lag_curve;
  corr.full(lo + static_cast<double>(ib) * coarse, &lag_curve);
  const long peak_off = lag - corr.start();
  double s = 0.0, s2 = 0.0;
  long cnt = 0;
  for (long off = 0; off < static_cast<long>(lag_curve.size()); ++off) {
    if (std::labs(off - peak_off) <= 16) continue;
    const double v = lag_curve[static_cast<std::size_t>(off)];
    s += v;
    s2 += v * v;
    ++cnt;
  }
  const double floor = cnt > 1 ? std::sqrt(std::max(s2 / cnt - (s / cnt) * (s / cnt), 0.0)) : 0.0;
  double runner = -2.0;
  for (long i = 0; i < n_coarse; ++i) {
    if (std::labs(i - ib) <= 1) continue;
    const double v = curve[static_cast<std::size_t>(i)].peak;
    const bool left = i == 0 || v >= curve[static_cast<std::size_t>(i - 1)].peak;
    const bool right = i == n_coarse - 1 || v >= curve[static_cast<std::size_t>(i + 1)].peak;
    if (left && right) runner = std::max(runner, v);
  }
  est.ambiguous = runner > -2.0 && curve[static_cast<std::size_t>(ib)].peak - runner < 3.0 * floor;
  return est;
}

// ---------------------------------------------------------------------------

FfeResult train_rx_ffe(std::span<const double> measured, std::span<const double> expected, int taps) {
  if (measured.size() != expected.size()) throw std::invalid_argument("train_rx_ffe: length mismatch");
  if (taps < 1 || taps % 2 == 0) throw std::invalid_argument("train_rx_ffe: tap count must be odd");
  const std::size_t n = measured.size();
  if (static_cast<std::size_t>(taps) >= n) throw std::invalid_argument("train_rx_ffe: too many taps");
  const double mm = std::accumulate(measured.begin(), measured.end(), 0.0) / static_cast<double>(n);
  const double me = std::accumulate(expected.begin(), expected.end(), 0.0) / static_cast<double>(n);
  CVec mt(n), et(n);
  for (std::size_t i = 0; i < n; ++i) {
    mt[i] = measured[i] - mm;
    et[i] = expected[i] - me;
  }
  const CVec r = xcorr(mt, mt);
  const CVec c = xcorr(et, mt);
  const auto t = static_cast<long>(taps);
  const long ctr = t / 2;
  const auto nn = static_cast<long>(n);
  auto wrap = [nn](long d) { return static_cast<std::size_t>(((d % nn) + nn) % nn); };
  Eigen::MatrixXd a(t, t);
  Eigen::VectorXd b(t);
  for (long k = 0; k < t; ++k) {
    for (long l = 0; l < t; ++l) a(k, l) = r[wrap(l - k)].real();
    b(k) = c[wrap(k - ctr)].real();
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-13)) {
    throw std::runtime_error("train_rx_ffe: rank-deficient normal equations (rcond " + std::to_string(ldlt.rcond()) +
                             ")");
  }
  const Eigen::VectorXd h = ldlt.solve(b);

  FfeResult res;
  res.taps.assign(h.data(), h.data() + t);
  const RVec eq = fir_filter_real(measured, res.taps);
  RVec diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = eq[i] - expected[i];
  res.dc_offset = median(diff);
  RVec out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = eq[i] - res.dc_offset;
  res.mae_before = normalized_intensity_mae(measured, expected);
  res.mae_after = normalized_intensity_mae(out, expected);
  return res;
}

RVec equalize_trace(const IntensityTrace& trace, const BranchEstimate& be, long expected_lag) {
  const auto n = static_cast<long>(trace.size());
  const long shift = be.lag_samples - expected_lag;
  RVec x(trace.size());
  for (long i = 0; i < n; ++i) {
    x[static_cast<std::size_t>(i)] = trace.samples[static_cast<std::size_t>((((i + shift) % n) + n) % n)];
  }
  if (!(be.ffe_taps.size() == 1 && be.ffe_taps[0] == 1.0)) x = fir_filter_real(x, be.ffe_taps);
  for (auto& v : x) v = be.trace_scale * v - be.dc_offset;
  return x;
}

// ---------------------------------------------------------------------------

namespace {

// Normal equations for y = hi * Re(p) + j hq * Im(p), factored once.
class WlLeastSquares {
 public:
  WlLeastSquares(const CVec& p, int taps, double ridge_rel) : t_(taps), n_(p.size()) {
    CVec i(n_), q(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      i[k] = p[k].real();
      q[k] = p[k].imag();
    }
    const CVec rii = xcorr(i, i), rqq = xcorr(q, q), riq = xcorr(i, q);
    const long t = t_;
    Eigen::MatrixXd a(2 * t, 2 * t);
    for (long k = 0; k < t; ++k) {
      for (long l = 0; l < t; ++l) {
        const std::size_t d = wrap(l - k);
        a(k, l) = rii[d].real();
        a(t + k, t + l) = rqq[d].real();
        a(k, t + l) = riq[d].real();
        a(t + l, k) = riq[d].real();
      }
    }
    const double ridge = ridge_rel * a.trace() / static_cast<double>(2 * t);
    a.diagonal().array() += ridge;
    llt_.compute(a);
    if (llt_.info() != Eigen::Success) throw std::runtime_error("Tx response LS: factorization failed");
    i_ = std::move(i);
    q_ = std::move(q);
  }

  void solve(const CVec& target, CVec& hi, CVec& hq) const {
    const CVec ci = xcorr(target, i_);
    const CVec cq = xcorr(target, q_);
    const long t = t_;
    const long c = t / 2;
    Eigen::MatrixXd rhs(2 * t, 2);
    for (long k = 0; k < t; ++k) {
      const cplx bi = ci[wrap(k - c)];
      const cplx bq = cq[wrap(k - c)];
      rhs(k, 0) = bi.real();
      rhs(k, 1) = bi.imag();
      rhs(t + k, 0) = bq.real();
      rhs(t + k, 1) = bq.imag();
    }
    const Eigen::MatrixXd u = llt_.solve(rhs);
    hi.resize(static_cast<std::size_t>(t));
    hq.resize(static_cast<std::size_t>(t));
    for (long k = 0; k < t; ++k) {
      hi[static_cast<std::size_t>(k)] = cplx(u(k, 0), u(k, 1));
      // u_Q = j hq
      hq[static_cast<std::size_t>(k)] = cplx(u(t + k, 1), -u(t + k, 0));
    }
  }

 private:
  std::size_t wrap(long d) const {
    const auto nn = static_cast<long>(n_);
    return static_cast<std::size_t>(((d % nn) + nn) % nn);
  }
  long t_;
  std::size_t n_;
  CVec i_, q_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

}  // namespace

TxEstimate estimate_tx_response(std::span<const double> trace, const ComplexWaveform& tx_plane,
                                const DispersionSpec& after_tx, const TrainingConfig& cfg, double cutoff_hz,
                                const KnownDistortion* known) {
  const std::size_t n = tx_plane.size();
  if (trace.size() != n) throw std::invalid_argument("estimate_tx_response: length mismatch");
  const double fs = tx_plane.sample_rate_hz;
  const auto taps = static_cast<std::size_t>(cfg.tx_est_taps);

  RVec amp(n);
  for (std::size_t i = 0; i < n; ++i) amp[i] = std::sqrt(std::max(trace[i], 0.0));

  const CVec hcd = cd_transfer(n, fs, after_tx);
  const bool use_known = known != nullptr && (!known->iq.is_identity() || !known->nl.is_identity());
  WidelyLinear post = WidelyLinear::strictly_linear(hcd);
  WidelyLinear post_inv = WidelyLinear::strictly_linear(CVec(n));
  const RVec mask = brickwall_mask(n, fs, cutoff_hz);
  CubicInverse inv_i, inv_q;
  if (use_known) {
    if (!known->iq.is_identity()) post = WidelyLinear::from_iq(known->iq, n, fs).then(std::span<const cplx>(hcd));
    inv_i = CubicInverse(known->nl.c2_i, known->nl.c3_i, known->nl.range, cfg.nl_table_points);
    inv_q = CubicInverse(known->nl.c2_q, known->nl.c3_q, known->nl.range, cfg.nl_table_points);
  }
  post_inv = post.inverse(cfg.inverse_clamp);

  const WlLeastSquares ls(tx_plane.samples, cfg.tx_est_taps, cfg.tx_est_ridge);
  CVec hi(taps, cplx(0.0, 0.0)), hq(taps, cplx(0.0, 0.0));
  hi[taps / 2] = 1.0;
  hq[taps / 2] = 1.0;

  TxEstimate out;
  out.hi = hi;
  out.hq = hq;
  double best = std::numeric_limits<double>::infinity();
  double prev = std::numeric_limits<double>::infinity();
  out.converged = false;
  RVec inten(n);
  for (int k = 1; k <= cfg.tx_est_max_iters; ++k) {
    // line 3-4: distort by the current estimate and propagate
    CVec y = tx_plane.samples;
    WidelyLinear tx = WidelyLinear::from_rail_responses(hi, hq, n);
    if (use_known) {
      tx.apply_time(y);
      if (!known->nl.is_identity()) {
        kernels::active().cubic_rails(y.data(), known->nl.c2_i, known->nl.c3_i, known->nl.c2_q, known->nl.c3_q, n);
      }
      post.apply_time(y);
    } else {
      tx.then(std::span<const cplx>(hcd)).apply_time(y);
    }
    // line 5-6
    kernels::active().abs2(y.data(), inten.data(), n);
    const double mae = normalized_intensity_mae(inten, trace);
    out.mae.push_back(mae);
    if (mae > prev) {
      out.converged = true;
      break;
    }
    prev = mae;
    if (mae < best) {
      best = mae;
      out.hi = hi;
      out.hq = hq;
      out.best_iteration = k;
    }
    if (k == cfg.tx_est_max_iters) break;
    // line 7-8: measured amplitude with estimated phase, band limit, undo propagation
    kernels::active().impose_magnitude(y.data(), amp.data(), n);
    fft::forward(y);
    for (std::size_t i = 0; i < n; ++i) y[i] *= mask[i];
    post_inv.apply_spectrum(y);
    fft::inverse(y);
    if (use_known && !known->nl.is_identity()) {
      for (auto& v : y) v = cplx(inv_i(v.real()), inv_q(v.imag()));
    }
    // line 9
    ls.solve(y, hi, hq);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

class IqNlObjective {
 public:
  IqNlObjective(const std::array<RVec, 2>& measured, const CVec& u, const std::array<DispersionSpec, 2>& after,
                double fs, std::array<bool, 2> use)
      : measured_(measured), u_(u), fs_(fs), n_(u.size()), use_(use) {
    for (std::size_t b = 0; b < 2; ++b) hcd_[b] = cd_transfer(n_, fs, after[b]);
    inten_.resize(n_);
  }

  double operator()(const IqImpairment& iq, const NonlinearCoeffs& nl) {
    if (!nl.is_monotonic()) return std::numeric_limits<double>::infinity();
    CVec v = u_;
    if (!nl.is_identity()) kernels::active().cubic_rails(v.data(), nl.c2_i, nl.c3_i, nl.c2_q, nl.c3_q, n_);
    fft::forward(v);
    const WidelyLinear wl = iq.is_identity() ? WidelyLinear::identity(n_) : WidelyLinear::from_iq(iq, n_, fs_);
    double total = 0.0;
    for (std::size_t b = 0; b < 2; ++b) {
      if (!use_[b]) continue;
      CVec y = v;
      wl.then(std::span<const cplx>(hcd_[b])).apply_spectrum(y);
      fft::inverse(y);
      kernels::active().abs2(y.data(), inten_.data(), n_);
      total += normalized_intensity_mae(measured_[b], inten_);
    }
    return total;
  }

 private:
  const std::array<RVec, 2>& measured_;
  const CVec& u_;
  double fs_;
  std::size_t n_;
  std::array<bool, 2> use_;
  std::array<CVec, 2> hcd_;
  RVec inten_;
};

}  // namespace

IqNlEstimate estimate_iq_nl(const std::array<RVec, 2>& measured, const CVec& tx_distorted,
                            const std::array<DispersionSpec, 2>& after_tx, double fs, const TrainingConfig& cfg,
                            std::array<bool, 2> use) {
  if (!use[0] && !use[1]) throw std::invalid_argument("estimate_iq_nl needs at least one branch");
  IqNlObjective obj(measured, tx_distorted, after_tx, fs, use);
  IqNlEstimate est;
  est.nl.range = cfg.nl_range;
  double tau_samples = 0.0;
  double best = obj(est.iq, est.nl);
  est.objective_start = best;

  struct Axis {
    const char* name;
    const GridAxis* grid;
    double* value;
  };
  const Axis axes[] = {
      {"phi", &cfg.phi, &est.iq.phi},       {"tau", &cfg.tau_samples, &tau_samples}, {"rho", &cfg.rho, &est.iq.rho},
      {"c2_i", &cfg.c2, &est.nl.c2_i},      {"c2_q", &cfg.c2, &est.nl.c2_q},         {"c3_i", &cfg.c3, &est.nl.c3_i},
      {"c3_q", &cfg.c3, &est.nl.c3_q},
  };
  for (int round = 0; round < cfg.grid_rounds; ++round) {
    for (const Axis& a : axes) {
      double best_v = *a.value;
      for (double v : a.grid->values()) {
        if (a.grid == &cfg.rho && !(v > -1.0)) continue;
        *a.value = v;
        est.iq.tau_s = tau_samples / fs;
        const double o = obj(est.iq, est.nl);
        if (o < best) {
          best = o;
          best_v = v;
        }
      }
      *a.value = best_v;
      est.iq.tau_s = tau_samples / fs;
    }
  }
  for (const Axis& a : axes) {
    const auto vals = a.grid->values();
    if (*a.value == vals.front() || *a.value == vals.back()) {
      est.boundary_warnings.push_back(std::string(a.name) + " estimate on the grid boundary");
    }
  }
  est.objective_end = best;
  return est;
}

// ---------------------------------------------------------------------------

namespace {

struct TrainingContext {
  const FrameSpec& spec;
  const TrainingConfig& cfg;
  double fs;
  double cutoff;
  std::size_t nt;
  long lag0;
  ComplexWaveform shaped;  // unpremixed training block
  ComplexWaveform tx_plane;
};

TrainingContext make_context(const FrameSpec& spec, const CVec& training, const TrainingConfig& cfg) {
  if (training.size() != static_cast<std::size_t>(spec.training_len)) {
    throw std::invalid_argument("training symbol count does not match frame.training_len");
  }
  TrainingContext c{spec, cfg, spec.sample_rate_hz(), default_bandwidth_cutoff(spec),
                    training.size() * static_cast<std::size_t>(spec.sps),
                    static_cast<long>(spec.guard_len) * spec.sps, {}, {}};
  c.shaped = rrc_shape(training, spec.rolloff, spec.sps, spec.symbol_rate_baud);
  c.tx_plane = premix(c.shaped, spec);
  const double g = drive_gain(spec);
  for (auto& v : c.tx_plane.samples) v *= g;
  return c;
}

RVec window(const RVec& x, long start, std::size_t n) {
  return RVec(x.begin() + start, x.begin() + start + static_cast<long>(n));
}

RVec model_intensity(const ChannelEstimate& est, const TrainingContext& c, Branch b) {
  const DistortionModel dm(est, c.spec, c.nt, c.cfg.inverse_clamp, c.cutoff, c.cfg.nl_range, c.cfg.nl_table_points);
  CVec x = c.shaped.samples;
  dm.forward(x, b);
  RVec r(x.size());
  kernels::active().abs2(x.data(), r.data(), r.size());
  return r;
}

std::array<double, 2> stage_mae(const ChannelEstimate& est, const TrainingContext& c,
                                const std::array<RVec, 2>& eq) {
  std::array<double, 2> m{};
  for (std::size_t b = 0; b < 2; ++b) {
    m[b] = normalized_intensity_mae(eq[b], model_intensity(est, c, static_cast<Branch>(b)));
  }
  return m;
}

CVec shift_taps_phase(const CVec& h, cplx r) {
  CVec o(h);
  for (auto& v : o) v *= r;
  return o;
}

}  // namespace

std::array<double, 2> training_intensity_snr_db(const BranchTraces& traces, const ChannelEstimate& est,
                                                const FrameSpec& spec, const CVec& training_symbols,
                                                const TrainingConfig& cfg) {
  const TrainingContext c = make_context(spec, training_symbols, cfg);
  std::array<double, 2> out{};
  for (std::size_t b = 0; b < 2; ++b) {
    const auto br = static_cast<Branch>(b);
    const RVec eq = window(equalize_trace(traces[br], est.branches[b], c.lag0), c.lag0, c.nt);
    out[b] = intensity_snr_db(eq, model_intensity(est, c, br));
  }
  return out;
}

ChannelEstimate run_training(const BranchTraces& traces, const FrameSpec& spec, const CVec& training_symbols,
                             const TrainingConfig& cfg) {
  cfg.validate();
  spec.validate();
  const TrainingContext c = make_context(spec, training_symbols, cfg);
  ChannelEstimate est;
  est.nl.range = cfg.nl_range;

  std::array<RVec, 2> raw;
  for (std::size_t b = 0; b < 2; ++b) {
    const auto br = static_cast<Branch>(b);
    CdEstimate cd;
    try {
      cd = estimate_cd(traces[br], c.shaped, cfg, c.lag0);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("training/cd[") + std::string(to_string(br)) + "]: " + e.what());
    }
    BranchEstimate& be = est.branches[b];
    be.total_cd = cd.total;
    be.lag_samples = cd.lag_samples;
    be.cd_ambiguous = cd.ambiguous;
    if (cd.ambiguous) est.warnings.push_back("ambiguous dispersion estimate on branch " + std::string(to_string(br)));
    BranchEstimate sync_only;
    sync_only.lag_samples = cd.lag_samples;
    raw[b] = window(equalize_trace(traces[br], sync_only, c.lag0), c.lag0, c.nt);
  }
  std::array<DispersionSpec, 2> after;
  for (std::size_t b = 0; b < 2; ++b) after[b] = est.branches[b].total_cd.plus(-spec.premix.ps_per_nm);

  for (int loop = 0; loop <= cfg.refinement_loops; ++loop) {
    std::array<RVec, 2> eq;
    for (std::size_t b = 0; b < 2; ++b) {
      const auto br = static_cast<Branch>(b);
      const RVec expected = model_intensity(est, c, br);
      BranchEstimate& be = est.branches[b];
      const double mean_e = std::accumulate(expected.begin(), expected.end(), 0.0);
      const double mean_m = std::accumulate(raw[b].begin(), raw[b].end(), 0.0);
      be.trace_scale = mean_e / mean_m;
      if (cfg.train_ffe) {
        try {
          const FfeResult f = train_rx_ffe(raw[b], expected, cfg.ffe_taps);
          be.ffe_taps = f.taps;
          be.dc_offset = f.dc_offset;
          be.trace_scale = 1.0;
        } catch (const std::exception& e) {
          throw std::runtime_error(std::string("training/ffe[") + std::string(to_string(br)) + "]: " + e.what());
        }
      }
      eq[b] = window(equalize_trace(traces[br], be, c.lag0), c.lag0, c.nt);
    }
    est.stages.push_back({loop, "ffe", stage_mae(est, c, eq)});

    if (cfg.estimate_tx) {
      const KnownDistortion known{est.iq, est.nl};
      std::array<TxEstimate, 2> te;
      for (std::size_t b = 0; b < 2; ++b) {
        te[b] = estimate_tx_response(eq[b], c.tx_plane, after[b], cfg, c.cutoff, loop > 0 ? &known : nullptr);
        est.tx_est_mae.push_back(te[b].mae);
        if (!te[b].converged) {
          est.warnings.push_back("transmitter response estimate still improving at the iteration limit");
        }
      }
      est.tx_est_iterations = std::max(te[0].best_iteration, te[1].best_iteration);
      cplx dot(0.0, 0.0);
      for (std::size_t k = 0; k < te[0].hi.size(); ++k) {
        dot += std::conj(te[1].hi[k]) * te[0].hi[k] + std::conj(te[1].hq[k]) * te[0].hq[k];
      }
      const cplx rot = std::abs(dot) > 0.0 ? dot / std::abs(dot) : cplx(1.0, 0.0);
      const CVec hi2 = shift_taps_phase(te[1].hi, rot), hq2 = shift_taps_phase(te[1].hq, rot);
      est.tx_response_i.taps.resize(te[0].hi.size());
      est.tx_response_q.taps.resize(te[0].hq.size());
      for (std::size_t k = 0; k < te[0].hi.size(); ++k) {
        est.tx_response_i.taps[k] = 0.5 * (te[0].hi[k] + hi2[k]);
        est.tx_response_q.taps[k] = 0.5 * (te[0].hq[k] + hq2[k]);
      }
      est.stages.push_back({loop, "tx_response", stage_mae(est, c, eq)});
    }

    if (cfg.estimate_iq_nl) {
      CVec u = c.tx_plane.samples;
      WidelyLinear::from_rail_responses(est.tx_response_i.taps, est.tx_response_q.taps, c.nt).apply_time(u);
      const IqNlEstimate r = estimate_iq_nl(eq, u, after, c.fs, cfg);
      est.iq = r.iq;
      est.nl = r.nl;
      for (const auto& w : r.boundary_warnings) est.warnings.push_back(w);
      est.stages.push_back({loop, "iq_nl", stage_mae(est, c, eq)});
    }
    est.snapshots.push_back({loop, est.tx_response_i.taps, est.tx_response_q.taps, est.iq, est.nl});
  }
  return est;
}

}  // namespace dapr
