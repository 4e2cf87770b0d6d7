#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "dapr/fft.hpp"
#include "dapr/fieldcore.hpp"
#include "dapr/txchain.hpp"
#include "test_util.hpp"

using namespace dapr;
using dapr::test::energy;
using dapr::test::random_field;

namespace {

constexpr double kFs = 100e9;

ComplexWaveform wave(std::size_t n, std::uint64_t seed) { return ComplexWaveform(random_field(n, seed), kFs); }

}  // namespace

TEST(Waveform, RejectsEmptyAndBadRate) {
  EXPECT_THROW(ComplexWaveform(CVec{}, kFs), std::invalid_argument);
  EXPECT_THROW(ComplexWaveform(CVec(4), 0.0), std::invalid_argument);
}

TEST(Fir, RejectsEvenTaps) {
  FirResponse f;
  f.taps = CVec(4, cplx(0.25));
  EXPECT_THROW(f.validate(), std::invalid_argument);
  f.taps = {};
  EXPECT_THROW(f.validate(), std::invalid_argument);
}

TEST(Dispersion, ZeroIsIdentity) {
  const ComplexWaveform w = wave(512, 1);
  const ComplexWaveform out = propagate_cd(w, DispersionSpec{0.0});
  EXPECT_LT(relative_l2(out.samples, w.samples), 1e-15);
}

TEST(Dispersion, EnergyAndInverse) {
  const ComplexWaveform w = wave(4096, 2);
  for (double d : {-3595.0, -3000.0, -1275.0, 17.0, 680.0, 5000.0}) {
    const ComplexWaveform y = propagate_cd(w, DispersionSpec{d});
    EXPECT_LT(std::abs(y.energy() - w.energy()) / w.energy(), 1e-10) << d;
    const ComplexWaveform back = propagate_cd(y, DispersionSpec{d}.negated());
    EXPECT_LT(relative_l2(back.samples, w.samples), 1e-10) << d;
  }
}

TEST(Dispersion, ValuesCompose) {
  const ComplexWaveform w = wave(1024, 3);
  const ComplexWaveform a = propagate_cd(propagate_cd(w, DispersionSpec{-3000.0}), DispersionSpec{680.0});
  const ComplexWaveform b = propagate_cd(w, DispersionSpec{-2320.0});
  EXPECT_LT(relative_l2(a.samples, b.samples), 1e-10);
}

TEST(Dispersion, RejectsNonFinite) {
  ComplexWaveform w = wave(16, 4);
  w.samples[3] = cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
  EXPECT_THROW(propagate_cd(w, DispersionSpec{-1275.0}), std::invalid_argument);
}

TEST(Dispersion, TransferSignConvention) {
  const std::size_t n = 64;
  const CVec h = cd_transfer(n, kFs, DispersionSpec{-3000.0});
  const auto f = fft::frequencies(n, kFs);
  const double lambda = kDefaultWavelengthNm * 1e-9;
  const double d = -3000.0 * 1e-12 / 1e-9;  // s/m
  for (std::size_t k = 0; k < n; ++k) {
    const cplx want = std::exp(cplx(0.0, -M_PI * d * lambda * lambda * f[k] * f[k] / kSpeedOfLight));
    EXPECT_NEAR(std::abs(h[k] - want), 0.0, 1e-12);
  }
}

TEST(Toeplitz, IdentityKernel) {
  const ComplexWaveform w = wave(64, 5);
  const CVec k{cplx(1.0)};
  EXPECT_LT(relative_l2(toeplitz_propagate(w, k).samples, w.samples), 1e-15);
  EXPECT_THROW(toeplitz_propagate(w, CVec{}), std::invalid_argument);
}

TEST(Toeplitz, UnitEnergyKernelPreservesEnergy) {
  // circulant with a unit-energy row is unitary only if its DFT is all-pass
  const CVec k = cd_kernel(128, kFs, DispersionSpec{-1275.0});
  EXPECT_NEAR(energy(k), 1.0, 1e-12);
  const ComplexWaveform w = wave(128, 6);
  EXPECT_NEAR(toeplitz_propagate(w, k).energy() / w.energy(), 1.0, 1e-10);
}

TEST(Toeplitz, MatchesFftPath) {
  for (std::size_t n : {64u, 128u, 256u}) {
    for (double d : {-3000.0, -1275.0, 0.0, 680.0}) {
      const ComplexWaveform w = wave(n, 7 + n);
      const CVec k = cd_kernel(n, kFs, DispersionSpec{d});
      EXPECT_LT(relative_l2(propagate_cd(w, DispersionSpec{d}).samples, toeplitz_propagate(w, k).samples), 1e-9)
          << n << " " << d;
    }
  }
}

TEST(Dispersion, ImpulseSpreadAboutSixtySymbols) {
  // 99% energy interval of a band-limited impulse after the premix value
  const std::size_t n = 8192;
  CVec sym(n / 2, cplx(0.0));
  sym[n / 4] = cplx(1.0);
  const ComplexWaveform shaped = rrc_shape(sym, 0.01, 2, 50e9);
  const ComplexWaveform y = propagate_cd(shaped, DispersionSpec{-3000.0});
  RVec p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = std::norm(y.samples[i]);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  // shortest window holding 99% of the energy
  std::size_t best = n;
  std::size_t lo = 0;
  double acc = 0.0;
  for (std::size_t hi = 0; hi < n; ++hi) {
    acc += p[hi];
    while (acc - p[lo] >= 0.99 * total) acc -= p[lo++];
    if (acc >= 0.99 * total) best = std::min(best, hi - lo + 1);
  }
  const double symbols = static_cast<double>(best) / 2.0;
  EXPECT_GT(symbols, 50.0);
  EXPECT_LT(symbols, 70.0);
}

TEST(Rrc, SingleSymbolGivesPulse) {
  CVec sym(256, cplx(0.0));
  sym[0] = cplx(1.0);
  const ComplexWaveform w = rrc_shape(sym, 0.25, 2, 50e9);
  // centre sample and symmetric neighbours
  EXPECT_GT(std::abs(w.samples[0]), std::abs(w.samples[1]));
  EXPECT_NEAR(std::abs(w.samples[1] - w.samples[w.size() - 1]), 0.0, 1e-12);
  const double ratio = w.samples[2].real() / w.samples[0].real();
  EXPECT_NEAR(ratio, rrc_pulse(1.0, 0.25) / rrc_pulse(0.0, 0.25), 2e-2);
}

TEST(Rrc, RoundTripQpsk) {
  const QamConstellation q(4);
  RngStream rng(3, "bits");
  Bits bits(2 * 8192);
  for (auto& b : bits) b = static_cast<std::uint8_t>(rng.bit());
  const CVec sym = qam_map(bits, q);
  const ComplexWaveform w = rrc_shape(sym, 0.01, 2, 50e9);
  EXPECT_DOUBLE_EQ(w.sample_rate_hz, 100e9);
  const CVec back = matched_filter_decimate(w, 0.01, 2);
  EXPECT_LT(relative_l2(back, sym), 1e-2);
  double worst = 0.0;
  for (std::size_t i = 0; i < sym.size(); ++i) worst = std::max(worst, std::abs(back[i] - sym[i]));
  EXPECT_LT(worst, 1e-3);
}

TEST(Rrc, OccupiedBandwidth) {
  const QamConstellation q(4);
  RngStream rng(4, "bits");
  Bits bits(2 * 8192);
  for (auto& b : bits) b = static_cast<std::uint8_t>(rng.bit());
  const ComplexWaveform w = rrc_shape(qam_map(bits, q), 0.01, 2, 50e9);
  const RVec h = rrc_transfer(w.size(), 0.01, 2);
  const auto f = fft::frequencies(w.size(), w.sample_rate_hz);
  const double peak = *std::max_element(h.begin(), h.end());
  double edge = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    if (h[k] * h[k] >= 0.01 * peak * peak) edge = std::max(edge, std::abs(f[k]));
  }
  EXPECT_NEAR(2.0 * edge, 50.5e9, 0.5e9);
}

TEST(Bandwidth, NyquistIsIdentityAndIdempotent) {
  const ComplexWaveform w = wave(1000, 8);
  EXPECT_LT(relative_l2(bandwidth_filter(w, kFs / 2).samples, w.samples), 1e-14);
  const ComplexWaveform once = bandwidth_filter(w, 20e9);
  const ComplexWaveform twice = bandwidth_filter(once, 20e9);
  EXPECT_LT(relative_l2(twice.samples, once.samples), 1e-12);
  EXPECT_THROW(bandwidth_filter(w, 0.0), std::invalid_argument);
}

TEST(Bandwidth, RemovesToneAboveCutoff) {
  const std::size_t n = 1024;
  CVec x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::polar(1.0, 2.0 * M_PI * 300.0 * static_cast<double>(i) / n);
  const ComplexWaveform y = bandwidth_filter(ComplexWaveform(x, kFs), 20e9);
  EXPECT_LT(y.energy() / energy(x), 1e-20);
}

TEST(Bandwidth, Linear) {
  const ComplexWaveform a = wave(512, 9), b = wave(512, 10);
  CVec s(512);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = 2.0 * a.samples[i] - cplx(0, 3) * b.samples[i];
  const CVec fs = bandwidth_filter(ComplexWaveform(s, kFs), 25e9).samples;
  const CVec fa = bandwidth_filter(a, 25e9).samples, fb = bandwidth_filter(b, 25e9).samples;
  CVec comb(512);
  for (std::size_t i = 0; i < s.size(); ++i) comb[i] = 2.0 * fa[i] - cplx(0, 3) * fb[i];
  EXPECT_LT(relative_l2(fs, comb), 1e-13);
}

TEST(SquareLaw, Basics) {
  EXPECT_EQ(square_law(ComplexWaveform(CVec(8, cplx(0.0)), kFs)).samples, RVec(8, 0.0));
  const IntensityTrace t = square_law(ComplexWaveform(CVec(8, cplx(2.0)), kFs));
  for (double v : t.samples) EXPECT_DOUBLE_EQ(v, 4.0);
  const IntensityTrace r = square_law(wave(4096, 11));
  EXPECT_TRUE(std::all_of(r.samples.begin(), r.samples.end(), [](double v) { return v >= 0.0; }));
}

TEST(SquareLaw, Dispersed16QamPapr) {
  const QamConstellation q(16);
  RngStream rng(5, "bits");
  Bits bits(4 * 8192);
  for (auto& b : bits) b = static_cast<std::uint8_t>(rng.bit());
  const ComplexWaveform w = propagate_cd(rrc_shape(qam_map(bits, q), 0.01, 2, 50e9), DispersionSpec{-3000.0});
  const IntensityTrace t = square_law(w);
  const double papr = papr_db(t.samples);
  EXPECT_GT(papr, 13.0);
  EXPECT_LT(papr, 17.0);
}

TEST(Fir, CentredTapsAndTransfer) {
  const CVec taps{cplx(0.0), cplx(1.0), cplx(0.0)};
  const CVec x = random_field(64, 12);
  EXPECT_LT(relative_l2(fir_filter(x, taps), x), 1e-14);
  // one-sample delay: tap right of centre
  const CVec delay{cplx(0.0), cplx(0.0), cplx(1.0)};
  const CVec y = fir_filter(x, delay);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(std::abs(y[i] - x[(i + x.size() - 1) % x.size()]), 0.0, 1e-12);
  const CVec h = fir_transfer(delay, 8);
  EXPECT_NEAR(std::abs(h[2] - std::polar(1.0, -2.0 * M_PI * 2.0 / 8.0)), 0.0, 1e-12);
}

TEST(Fft, RoundTripAndMirror) {
  CVec x = random_field(300, 13);
  const CVec orig = x;
  fft::forward(x);
  fft::inverse(x);
  EXPECT_LT(relative_l2(x, orig), 1e-14);
  const auto f = fft::frequencies(10, 10.0);
  for (std::size_t k = 1; k < 10; ++k) {
    if (k != 5) {
      EXPECT_DOUBLE_EQ(f[fft::mirror_bin(k, 10)], -f[k]);
    }
  }
}
