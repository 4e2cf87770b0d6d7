#include <gtest/gtest.h>

#include "dapr/channelsim.hpp"
#include "dapr/fft.hpp"
#include "dapr/txchain.hpp"
#include "test_util.hpp"

using namespace dapr;
using dapr::test::random_field;

namespace {

constexpr double kFs = 100e9;

ComplexWaveform wave(std::size_t n, std::uint64_t seed) { return ComplexWaveform(random_field(n, seed), kFs); }

ComplexWaveform qam_wave(std::size_t n_sym, std::uint64_t seed) {
  const QamConstellation c(16);
  RngStream rng(seed, "bits");
  Bits b(4 * n_sym);
  for (auto& v : b) v = static_cast<std::uint8_t>(rng.bit());
  return rrc_shape(qam_map(b, c), 0.01, 2, 50e9);
}

}  // namespace

TEST(TxResponse, IdentityAndDelay) {
  const ComplexWaveform w = wave(256, 1);
  const FirResponse id = FirResponse::identity(FirRole::tx_i);
  EXPECT_EQ(apply_tx_response(w, id, id).samples, w.samples);
  FirResponse d;
  d.taps = {cplx(0), cplx(0), cplx(1)};
  const ComplexWaveform y = apply_tx_response(w, d, FirResponse::identity(FirRole::tx_q));
  const std::size_t n = w.size();
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(y.samples[i].real(), w.samples[(i + n - 1) % n].real(), 1e-12);
    EXPECT_NEAR(y.samples[i].imag(), w.samples[i].imag(), 1e-12);
  }
}

TEST(TxResponse, MatchesDirectConvolution) {
  const std::size_t n = 2048, t = 511;
  const ComplexWaveform w = wave(n, 2);
  FirResponse hi, hq;
  hi.taps = random_field(t, 3);
  hq.taps = random_field(t, 4);
  const ComplexWaveform y = apply_tx_response(w, hi, hq);
  CVec want(n, cplx(0.0));
  const std::ptrdiff_t c = static_cast<std::ptrdiff_t>(t / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < t; ++k) {
      const std::ptrdiff_t j = (static_cast<std::ptrdiff_t>(i) - (static_cast<std::ptrdiff_t>(k) - c) +
                                static_cast<std::ptrdiff_t>(n)) % static_cast<std::ptrdiff_t>(n);
      want[i] += hi.taps[k] * w.samples[static_cast<std::size_t>(j)].real() +
                 cplx(0, 1) * hq.taps[k] * w.samples[static_cast<std::size_t>(j)].imag();
    }
  }
  EXPECT_LT(relative_l2(y.samples, want), 1e-10);
}

TEST(Nonlinearity, PolynomialValueAndIdentity) {
  NonlinearCoeffs nl;
  nl.c2_i = 0.1;
  nl.c3_i = -0.05;
  const ComplexWaveform w(CVec{cplx(0.5, 0.5)}, kFs);
  const ComplexWaveform y = apply_nonlinearity(w, nl);
  EXPECT_NEAR(y.samples[0].real(), 0.51875, 1e-15);
  EXPECT_NEAR(y.samples[0].imag(), 0.5, 1e-15);
  const ComplexWaveform r = wave(64, 5);
  EXPECT_EQ(apply_nonlinearity(r, NonlinearCoeffs{}).samples, r.samples);
}

TEST(Nonlinearity, RejectsNonMonotonic) {
  NonlinearCoeffs nl;
  nl.c3_q = -0.5;  // derivative 1 - 1.5 x^2 crosses zero inside [-1, 1]
  EXPECT_FALSE(nl.is_monotonic());
  EXPECT_THROW(nl.validate(), std::invalid_argument);
  EXPECT_THROW(apply_nonlinearity(wave(8, 6), nl), std::invalid_argument);
}

TEST(Iq, IdentityAndImbalance) {
  const ComplexWaveform w = wave(512, 7);
  EXPECT_LT(relative_l2(apply_iq(w, IqImpairment{}).samples, w.samples), 1e-15);
  const ComplexWaveform y = apply_iq(w, IqImpairment{1.0, 0.0, 0.0});
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_NEAR(y.samples[i].real(), w.samples[i].real(), 1e-12);
    EXPECT_NEAR(y.samples[i].imag(), std::sqrt(2.0) * w.samples[i].imag(), 1e-12);
  }
  EXPECT_THROW((IqImpairment{-1.0, 0.0, 0.0}.validate()), std::invalid_argument);
}

TEST(Iq, HalfSampleSkewOnTone) {
  const std::size_t n = 1024;
  const double k = 37.0;
  CVec x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = cplx(0.0, std::cos(2.0 * M_PI * k * static_cast<double>(i) / n));
  const ComplexWaveform y = apply_iq(ComplexWaveform(x, kFs), IqImpairment{0.0, 0.5 / kFs, 0.0});
  // Q(t + tau): advance by half a sample
  for (std::size_t i = 0; i < n; ++i) {
    const double want = std::cos(2.0 * M_PI * k * (static_cast<double>(i) + 0.5) / n);
    EXPECT_NEAR(y.samples[i].imag(), want, 1e-9);
    EXPECT_NEAR(y.samples[i].real(), 0.0, 1e-9);
  }
}

TEST(Iq, PhaseRotatesQContribution) {
  const ComplexWaveform w(CVec{cplx(0.3, 0.4)}, kFs);
  const ComplexWaveform y = apply_iq(w, IqImpairment{0.0, 0.0, 0.2});
  const cplx want = 0.3 + cplx(0, 1) * 0.4 * std::polar(1.0, 0.2);
  EXPECT_NEAR(std::abs(y.samples[0] - want), 0.0, 1e-14);
}

TEST(Noise, QuantizationVariance) {
  EXPECT_EQ(quantization_noise_variance(1.0, std::numeric_limits<double>::infinity()), 0.0);
  EXPECT_NEAR(10.0 * std::log10(0.5 / quantization_noise_variance(1.0, 8.0)), 49.92, 1e-9);
}

TEST(Noise, OsnrGivesInBandSnr) {
  const ComplexWaveform w = qam_wave(1u << 19, 8);
  RngStream rng(1, streams::kAse);
  const ComplexWaveform y = add_ase(w, 35.0, rng);
  CVec noise(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) noise[i] = y.samples[i] - w.samples[i];
  const double b_sig = 50.5e9;
  const ComplexWaveform inband = bandwidth_filter(ComplexWaveform(noise, kFs), b_sig / 2);
  const double snr = 10.0 * std::log10(w.mean_power() / inband.mean_power());
  EXPECT_NEAR(snr, 35.0 - 10.0 * std::log10(b_sig / 12.5e9), 0.2);
  // the estimator used to set it, over the whole simulation band
  const double osnr = 10.0 * std::log10(w.mean_power() * kFs /
                                        (dapr::test::energy(noise) / w.size() * osnr_reference_bandwidth_hz()));
  EXPECT_NEAR(osnr, 35.0, 0.1);
}

TEST(Channel, IdentityIsScaledSquareLaw) {
  ChannelModel m;
  m.fiber = DispersionSpec{680.0};
  m.splitter_ratio = 0.7;
  const ComplexWaveform w = qam_wave(2048, 9);
  const BranchTraces t = run_channel(w, m, 1);
  const IntensityTrace ref = square_law(propagate_cd(w, m.fiber));
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_NEAR(t.dispersed.samples[i], 0.7 * ref.samples[i], 1e-12);
    EXPECT_NEAR(t.undispersed.samples[i], 0.3 * ref.samples[i], 1e-12);
  }
  EXPECT_EQ(t.dispersed.branch, Branch::dispersed);
}

TEST(Channel, SplitterBalanceWithElementLoss) {
  const ExperimentConfig c = dapr::test::default_config();
  const ComplexWaveform w = qam_wave(4096, 10);
  const BranchTraces t = run_channel(w, c.channel, 1);
  const double ratio_db = 10.0 * std::log10(t.dispersed.mean() / t.undispersed.mean());
  EXPECT_LT(std::abs(ratio_db), 1.0);
}

TEST(Channel, NonlinearityPrecedesIq) {
  const ComplexWaveform w = qam_wave(1024, 11);
  NonlinearCoeffs nl;
  nl.c2_i = 0.05;
  nl.c3_q = -0.1;
  const IqImpairment iq{0.1, 0.3 / kFs, 0.1};
  ChannelModel m;
  m.nl = nl;
  m.iq = iq;
  const BranchTraces t = run_channel(w, m, 1);
  const RVec order_a = square_law(apply_iq(apply_nonlinearity(w, nl), iq)).samples;
  const RVec order_b = square_law(apply_nonlinearity(apply_iq(w, iq), nl)).samples;
  RVec scaled(t.undispersed.samples);
  for (auto& v : scaled) v /= 0.5;
  EXPECT_LT(relative_l2(scaled, order_a), 1e-12);
  EXPECT_GT(relative_l2(order_b, order_a), 1e-4);
}

TEST(Channel, SeededNoiseIsReproducible) {
  const ExperimentConfig c = dapr::test::default_config();
  const ComplexWaveform w = qam_wave(4096, 12);
  const BranchTraces a = run_channel(w, c.channel, 5), b = run_channel(w, c.channel, 5), d = run_channel(w, c.channel, 6);
  EXPECT_EQ(a.dispersed.samples, b.dispersed.samples);
  EXPECT_EQ(a.undispersed.samples, b.undispersed.samples);
  EXPECT_NE(a.dispersed.samples, d.dispersed.samples);
}

TEST(Channel, ValidateRejectsBadSplitter) {
  ChannelModel m;
  m.splitter_ratio = 1.0;
  EXPECT_THROW(m.validate(), std::invalid_argument);
}
