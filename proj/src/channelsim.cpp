#include "dapr/channelsim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dapr/kernels.hpp"
#include "dapr/widely_linear.hpp"

namespace dapr {

void IqImpairment::validate() const {
  if (!(rho > -1.0)) throw std::invalid_argument("IqImpairment: rho must exceed -1");
  if (!std::isfinite(tau_s) || !std::isfinite(phi)) throw std::invalid_argument("IqImpairment: non-finite value");
}

namespace {

bool rail_monotonic(double c2, double c3, double a) {
  // derivative 1 + 2 c2 x + 3 c3 x^2 must stay positive on [-a, a]
  auto d = [&](double x) { return 1.0 + 2.0 * c2 * x + 3.0 * c3 * x * x; };
  if (d(-a) <= 0.0 || d(a) <= 0.0) return false;
  if (c3 != 0.0) {
    const double xv = -c2 / (3.0 * c3);
    if (std::fabs(xv) <= a && d(xv) <= 0.0) return false;
  }
  return true;
}

}  // namespace

bool NonlinearCoeffs::is_monotonic() const {
  return rail_monotonic(c2_i, c3_i, range) && rail_monotonic(c2_q, c3_q, range);
}

void NonlinearCoeffs::validate() const {
  if (!(range > 0.0)) throw std::invalid_argument("NonlinearCoeffs: range must be positive");
  if (!is_monotonic()) {
    throw std::invalid_argument("NonlinearCoeffs: cubic is not strictly increasing on the declared range");
  }
}

void ChannelModel::validate() const {
  auto part = [](const char* path, auto&& check) {
    try {
      check();
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string("channel.") + path + ": " + e.what());
    }
  };
  part("tx_response_i", [&] { tx_response_i.validate(); });
  part("tx_response_q", [&] { tx_response_q.validate(); });
  part("rx_response[0]", [&] { rx_response[0].validate(); });
  part("rx_response[1]", [&] { rx_response[1].validate(); });
  part("nl", [&] { nl.validate(); });
  part("iq", [&] { iq.validate(); });
  if (!(splitter_ratio > 0.0 && splitter_ratio < 1.0)) {
    throw std::invalid_argument("channel.splitter_ratio must lie in (0, 1)");
  }
  if (!(responsivity_a_per_w > 0.0)) throw std::invalid_argument("channel.responsivity_a_per_w must be positive");
  if (thermal_noise_a_per_sqrt_hz < 0.0) throw std::invalid_argument("channel.thermal_noise_a_per_sqrt_hz must not be negative");
  if (!(enob > 0.0)) throw std::invalid_argument("channel.enob must be positive");
}

ComplexWaveform apply_tx_response(const ComplexWaveform& w, const FirResponse& hi, const FirResponse& hq) {
  hi.validate();
  hq.validate();
  ComplexWaveform out = w;
  if (hi.taps.size() == 1 && hq.taps.size() == 1 && hi.taps[0] == cplx(1.0, 0.0) && hq.taps[0] == cplx(1.0, 0.0)) {
    return out;
  }
  WidelyLinear::from_rail_responses(hi.taps, hq.taps, w.size()).apply_time(out.samples);
  return out;
}

ComplexWaveform apply_nonlinearity(const ComplexWaveform& w, const NonlinearCoeffs& nl) {
  nl.validate();
  ComplexWaveform out = w;
  if (nl.is_identity()) return out;
  kernels::active().cubic_rails(out.samples.data(), nl.c2_i, nl.c3_i, nl.c2_q, nl.c3_q, out.size());
  return out;
}

ComplexWaveform apply_iq(const ComplexWaveform& w, const IqImpairment& iq) {
  iq.validate();
  ComplexWaveform out = w;
  if (iq.is_identity()) return out;
  WidelyLinear::from_iq(iq, w.size(), w.sample_rate_hz).apply_time(out.samples);
  return out;
}

double quantization_noise_variance(double full_scale_amplitude, double enob) {
  if (!(enob > 0.0)) throw std::invalid_argument("enob must be positive");
  if (std::isinf(enob)) return 0.0;
  const double sine_power = 0.5 * full_scale_amplitude * full_scale_amplitude;
  return sine_power / std::pow(10.0, (6.02 * enob + 1.76) / 10.0);
}

double osnr_reference_bandwidth_hz(double wavelength_nm) {
  const double lam = wavelength_nm * 1e-9;
  return kSpeedOfLight * 0.1e-9 / (lam * lam);
}

ComplexWaveform add_ase(const ComplexWaveform& w, double osnr_db, RngStream& rng, double wavelength_nm) {
  ComplexWaveform out = w;
  if (std::isinf(osnr_db) && osnr_db > 0.0) return out;
  const double p = w.mean_power();
  const double var = p * w.sample_rate_hz / (std::pow(10.0, osnr_db / 10.0) * osnr_reference_bandwidth_hz(wavelength_nm));
  const double s = std::sqrt(0.5 * var);
  for (auto& v : out.samples) {
    const double re = rng.normal();
    const double im = rng.normal();
    v += cplx(s * re, s * im);
  }
  return out;
}

IntensityTrace photodetect(const ComplexWaveform& w, const ChannelModel& m, Branch branch, RngStream& thermal_rng,
                           RngStream& adc_rng) {
  IntensityTrace t = square_law(w, branch);
  if (m.responsivity_a_per_w != 1.0) {
    for (auto& v : t.samples) v *= m.responsivity_a_per_w;
  }
  if (m.thermal_noise_a_per_sqrt_hz > 0.0) {
    const double sigma = m.thermal_noise_a_per_sqrt_hz * std::sqrt(0.5 * w.sample_rate_hz);
    for (auto& v : t.samples) v += sigma * thermal_rng.normal();
  }
  if (!std::isinf(m.enob)) {
    const auto [lo, hi] = std::minmax_element(t.samples.begin(), t.samples.end());
    const double sigma = std::sqrt(quantization_noise_variance(0.5 * (*hi - *lo), m.enob));
    for (auto& v : t.samples) v += sigma * adc_rng.normal();
  }
  return t;
}

BranchTraces run_channel(const ComplexWaveform& w, const ChannelModel& m, std::uint64_t master_seed) {
  m.validate();
  ComplexWaveform x = apply_tx_response(w, m.tx_response_i, m.tx_response_q);
  x = apply_nonlinearity(x, m.nl);
  x = apply_iq(x, m.iq);
  x = propagate_cd(x, m.fiber);
  if (m.rx_power_dbm) {
    const double target = 1e-3 * std::pow(10.0, *m.rx_power_dbm / 10.0);
    const double p = x.mean_power();
    if (p > 0.0) kernels::active().scale_inplace(x.samples.data(), std::sqrt(target / p), x.size());
  }
  RngStream ase(master_seed, streams::kAse);
  x = add_ase(x, m.osnr_db, ase, m.fiber.center_wavelength_nm);

  ComplexWaveform b1 = x;
  ComplexWaveform b2 = x;
  const double g1 = std::sqrt(m.splitter_ratio * std::pow(10.0, -m.element_loss_db / 10.0));
  const double g2 = std::sqrt(1.0 - m.splitter_ratio);
  kernels::active().scale_inplace(b1.samples.data(), g1, b1.size());
  kernels::active().scale_inplace(b2.samples.data(), g2, b2.size());
  b1 = propagate_cd(b1, m.element);

  RngStream th1(master_seed, streams::kThermalB1), th2(master_seed, streams::kThermalB2);
  RngStream adc1(master_seed, streams::kEnobAdcB1), adc2(master_seed, streams::kEnobAdcB2);
  BranchTraces out{photodetect(b1, m, Branch::dispersed, th1, adc1),
                   photodetect(b2, m, Branch::undispersed, th2, adc2)};

  for (int b = 0; b < 2; ++b) {
    IntensityTrace& t = out[static_cast<Branch>(b)];
    const FirResponse& rx = m.rx_response[static_cast<std::size_t>(b)];
    rx.validate();
    if (!(rx.taps.size() == 1 && rx.taps[0] == cplx(1.0, 0.0))) {
      CVec taps = rx.taps;
      CVec xc(t.samples.begin(), t.samples.end());
      CVec y = fir_filter(xc, taps);
      for (std::size_t i = 0; i < y.size(); ++i) t.samples[i] = y[i].real();
    }
    const double dc = m.dc_offset[static_cast<std::size_t>(b)];
    if (dc != 0.0) {
      const double add = dc * t.mean();
      for (auto& v : t.samples) v += add;
    }
  }
  return out;
}

}  // namespace dapr
