#include "dapr/fieldcore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dapr/fft.hpp"
#include "dapr/kernels.hpp"

namespace dapr {

ComplexWaveform::ComplexWaveform(CVec s, double fs) : samples(std::move(s)), sample_rate_hz(fs) {
  if (samples.empty()) throw std::invalid_argument("ComplexWaveform: empty sample block");
  if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("ComplexWaveform: sample rate must be positive");
}

double ComplexWaveform::energy() const {
  RVec p(samples.size());
  kernels::active().abs2(samples.data(), p.data(), p.size());
  return kernels::active().sum(p.data(), p.size());
}

double IntensityTrace::mean() const {
  if (samples.empty()) return 0.0;
  return kernels::active().sum(samples.data(), samples.size()) / static_cast<double>(samples.size());
}

std::string_view to_string(Branch b) { return b == Branch::dispersed ? "dispersed" : "undispersed"; }

Branch branch_from_string(std::string_view s) {
  if (s == "dispersed") return Branch::dispersed;
  if (s == "undispersed") return Branch::undispersed;
  throw std::invalid_argument("unknown branch id");
}

FirResponse FirResponse::identity(FirRole role, std::size_t n_taps) {
  if (n_taps % 2 == 0) throw std::invalid_argument("FIR tap count must be odd");
  FirResponse f;
  f.role = role;
  f.taps.assign(n_taps, cplx(0.0, 0.0));
  f.taps[n_taps / 2] = 1.0;
  return f;
}

void FirResponse::validate() const {
  if (taps.empty() || taps.size() % 2 == 0) {
    throw std::invalid_argument("FIR tap count must be odd and at least 1");
  }
}

namespace {

void require_finite(std::span<const cplx> x, const char* what) {
  for (const auto& v : x) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw std::invalid_argument(std::string(what) + ": non-finite sample");
    }
  }
}

}  // namespace

CVec cd_transfer(std::size_t n, double sample_rate_hz, const DispersionSpec& d) {
  const double d_si = d.ps_per_nm * 1e-3;  // ps/nm -> s/m^2
  const double lambda = d.center_wavelength_nm * 1e-9;
  const double k = std::numbers::pi * d_si * lambda * lambda / kSpeedOfLight;
  const auto f = fft::frequencies(n, sample_rate_hz);
  CVec h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = std::polar(1.0, -k * f[i] * f[i]);
  return h;
}

CVec cd_kernel(std::size_t n, double sample_rate_hz, const DispersionSpec& d) {
  CVec h = cd_transfer(n, sample_rate_hz, d);
  fft::inverse(h);
  return h;
}

RVec rrc_transfer(std::size_t n, double rolloff, int sps) {
  if (rolloff < 0.0 || rolloff > 1.0) throw std::invalid_argument("rolloff must lie in [0, 1]");
  const auto f = fft::frequencies(n, static_cast<double>(sps));  // symbol-rate units
  const double f1 = 0.5 * (1.0 - rolloff);
  const double f2 = 0.5 * (1.0 + rolloff);
  RVec h(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::fabs(f[i]);
    if (rolloff == 0.0) {
      h[i] = a < 0.5 ? 1.0 : (a == 0.5 ? std::sqrt(0.5) : 0.0);
    } else if (a <= f1) {
      h[i] = 1.0;
    } else if (a <= f2) {
      h[i] = std::sqrt(0.5 * (1.0 + std::cos(std::numbers::pi / rolloff * (a - f1))));
    }
  }
  return h;
}

RVec brickwall_mask(std::size_t n, double sample_rate_hz, double cutoff_hz) {
  const auto f = fft::frequencies(n, sample_rate_hz);
  RVec m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = std::fabs(f[i]) <= cutoff_hz ? 1.0 : 0.0;
  return m;
}

CVec fir_transfer(std::span<const cplx> taps, std::size_t n) {
  CVec h(n, cplx(0.0, 0.0));
  const auto c = static_cast<long long>(taps.size() / 2);
  const auto nn = static_cast<long long>(n);
  for (std::size_t k = 0; k < taps.size(); ++k) {
    long long idx = (static_cast<long long>(k) - c) % nn;
    if (idx < 0) idx += nn;
    h[static_cast<std::size_t>(idx)] += taps[k];
  }
  fft::forward(h);
  return h;
}

double rrc_pulse(double t, double rolloff) {
  const double pi = std::numbers::pi;
  const double b = rolloff;
  if (std::fabs(t) < 1e-12) return 1.0 - b + 4.0 * b / pi;
  if (b > 0.0 && std::fabs(std::fabs(4.0 * b * t) - 1.0) < 1e-12) {
    return b / std::sqrt(2.0) *
           ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * b)) + (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * b)));
  }
  const double num = std::sin(pi * t * (1.0 - b)) + 4.0 * b * t * std::cos(pi * t * (1.0 + b));
  const double den = pi * t * (1.0 - (4.0 * b * t) * (4.0 * b * t));
  return num / den;
}

void apply_transfer(CVec& x, std::span<const cplx> h) {
  if (h.size() != x.size()) throw std::invalid_argument("apply_transfer: length mismatch");
  fft::forward(x);
  kernels::active().cmul_inplace(x.data(), h.data(), x.size());
  fft::inverse(x);
}

void apply_transfer(CVec& x, std::span<const double> h) {
  if (h.size() != x.size()) throw std::invalid_argument("apply_transfer: length mismatch");
  fft::forward(x);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= h[i];
  fft::inverse(x);
}

ComplexWaveform propagate_cd(const ComplexWaveform& w, const DispersionSpec& d) {
  require_finite(w.samples, "propagate_cd");
  ComplexWaveform out = w;
  if (d.ps_per_nm == 0.0) return out;
  apply_transfer(out.samples, cd_transfer(w.size(), w.sample_rate_hz, d));
  return out;
}

ComplexWaveform toeplitz_propagate(const ComplexWaveform& w, std::span<const cplx> kernel) {
  if (kernel.empty()) throw std::invalid_argument("toeplitz_propagate: empty kernel");
  const std::size_t n = w.size();
  if (kernel.size() > n) throw std::invalid_argument("toeplitz_propagate: kernel longer than waveform");
  CVec out(n, cplx(0.0, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    cplx acc(0.0, 0.0);
    for (std::size_t m = 0; m < kernel.size(); ++m) {
      const std::size_t k = (i + n - m) % n;
      acc += kernel[m] * w.samples[k];
    }
    out[i] = acc;
  }
  return ComplexWaveform(std::move(out), w.sample_rate_hz);
}

ComplexWaveform rrc_shape(std::span<const cplx> symbols, double rolloff, int sps, double symbol_rate_baud) {
  if (sps < 1) throw std::invalid_argument("rrc_shape: sps must be >= 1");
  if (symbols.empty()) throw std::invalid_argument("rrc_shape: no symbols");
  if (rolloff < 0.0 || rolloff > 1.0) throw std::invalid_argument("rrc_shape: rolloff must lie in [0, 1]");
  const std::size_t n = symbols.size() * static_cast<std::size_t>(sps);
  CVec up(n, cplx(0.0, 0.0));
  for (std::size_t i = 0; i < symbols.size(); ++i) up[i * static_cast<std::size_t>(sps)] = symbols[i];
  RVec h = rrc_transfer(n, rolloff, sps);
  const double g = std::sqrt(static_cast<double>(sps));
  for (auto& v : h) v *= g;
  apply_transfer(up, h);
  return ComplexWaveform(std::move(up), symbol_rate_baud * sps);
}

CVec matched_filter_decimate(const ComplexWaveform& w, double rolloff, int sps) {
  if (sps < 1) throw std::invalid_argument("matched_filter_decimate: sps must be >= 1");
  const auto s = static_cast<std::size_t>(sps);
  if (w.size() % s != 0) throw std::invalid_argument("matched_filter_decimate: length not a multiple of sps");
  CVec x = w.samples;
  RVec h = rrc_transfer(x.size(), rolloff, sps);
  const double g = std::sqrt(static_cast<double>(sps));
  for (auto& v : h) v *= g;
  apply_transfer(x, h);
  CVec out(x.size() / s);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i * s];
  return out;
}

ComplexWaveform bandwidth_filter(const ComplexWaveform& w, double cutoff_hz) {
  if (!(cutoff_hz > 0.0)) throw std::invalid_argument("bandwidth_filter: cutoff must be positive");
  const double nyquist = 0.5 * w.sample_rate_hz;
  if (cutoff_hz > nyquist * (1.0 + 1e-12)) {
    throw std::invalid_argument("bandwidth_filter: cutoff above Nyquist");
  }
  ComplexWaveform out = w;
  if (cutoff_hz >= nyquist) return out;
  apply_transfer(out.samples, brickwall_mask(w.size(), w.sample_rate_hz, cutoff_hz));
  return out;
}

IntensityTrace square_law(const ComplexWaveform& w, Branch branch) {
  IntensityTrace t;
  t.sample_rate_hz = w.sample_rate_hz;
  t.branch = branch;
  t.samples.resize(w.size());
  kernels::active().abs2(w.samples.data(), t.samples.data(), w.size());
  return t;
}

CVec fir_filter(std::span<const cplx> x, std::span<const cplx> taps) {
  CVec y(x.begin(), x.end());
  if (taps.size() == 1) {
    for (auto& v : y) v *= taps[0];
    return y;
  }
  apply_transfer(y, fir_transfer(taps, y.size()));
  return y;
}

RVec fir_filter_real(std::span<const double> x, std::span<const double> taps) {
  CVec xc(x.begin(), x.end());
  CVec tc(taps.begin(), taps.end());
  CVec y = fir_filter(xc, tc);
  RVec out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i].real();
  return out;
}

double papr_db(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double peak = 0.0, acc = 0.0;
  for (double v : x) {
    peak = std::max(peak, v * v);
    acc += v * v;
  }
  const double mean = acc / static_cast<double>(x.size());
  return mean > 0.0 ? 10.0 * std::log10(peak / mean) : 0.0;
}

double relative_l2(std::span<const cplx> a, std::span<const cplx> b) {
  if (a.size() != b.size()) throw std::invalid_argument("relative_l2: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

double relative_l2(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("relative_l2: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace dapr
