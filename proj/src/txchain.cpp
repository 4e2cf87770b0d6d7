#include "dapr/txchain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dapr/channelsim.hpp"

namespace dapr {
namespace {

std::uint32_t gray(std::uint32_t i) { return i ^ (i >> 1); }

}  // namespace

QamConstellation::QamConstellation(int order) : order_(order) {
  if (order != 4 && order != 16 && order != 32) {
    throw std::invalid_argument("QamConstellation: order must be 4, 16 or 32, got " + std::to_string(order));
  }
  bits_ = std::countr_zero(static_cast<unsigned>(order));
  if (order == 32) {
    // 8x4 Gray rectangle; the outer columns fold onto the rows y = +-5.
    for (std::uint32_t ii = 0; ii < 8; ++ii) {
      for (std::uint32_t iq = 0; iq < 4; ++iq) {
        double x = 2.0 * ii - 7.0;
        double y = 2.0 * iq - 3.0;
        if (std::fabs(x) == 7.0) {
          const double nx = std::copysign(4.0 - std::fabs(y), x);
          const double ny = std::copysign(5.0, y);
          x = nx;
          y = ny;
        }
        points_.emplace_back(x, y);
        labels_.push_back((gray(ii) << 2) | gray(iq));
      }
    }
  } else {
    const std::uint32_t side = order == 4 ? 2 : 4;
    const int half = bits_ / 2;
    for (std::uint32_t ii = 0; ii < side; ++ii) {
      for (std::uint32_t iq = 0; iq < side; ++iq) {
        points_.emplace_back(2.0 * ii - (side - 1.0), 2.0 * iq - (side - 1.0));
        labels_.push_back((gray(ii) << half) | gray(iq));
      }
    }
  }
  double p = 0.0;
  for (const auto& v : points_) p += std::norm(v);
  const double s = 1.0 / std::sqrt(p / points_.size());
  for (auto& v : points_) v *= s;
  by_label_.assign(points_.size(), 0);
  for (std::size_t i = 0; i < points_.size(); ++i) by_label_[labels_[i]] = i;
}

std::size_t QamConstellation::nearest(cplx y) const {
  std::size_t best = 0;
  double bd = std::norm(y - points_[0]);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double d = std::norm(y - points_[i]);
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  return best;
}

int QamConstellation::gray_violations() const {
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points_.size(); ++i) {
    for (std::size_t j = i + 1; j < points_.size(); ++j) dmin = std::min(dmin, std::abs(points_[i] - points_[j]));
  }
  int v = 0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    for (std::size_t j = i + 1; j < points_.size(); ++j) {
      if (std::abs(points_[i] - points_[j]) < dmin * (1.0 + 1e-9) && std::popcount(labels_[i] ^ labels_[j]) != 1) {
        ++v;
      }
    }
  }
  return v;
}

CVec qam_map(std::span<const std::uint8_t> bits, const QamConstellation& c) {
  const auto m = static_cast<std::size_t>(c.bits_per_symbol());
  if (bits.size() % m != 0) {
    throw std::invalid_argument("qam_map: bit count not divisible by bits per symbol");
  }
  CVec out(bits.size() / m);
  for (std::size_t s = 0; s < out.size(); ++s) {
    std::uint32_t label = 0;
    for (std::size_t b = 0; b < m; ++b) label = (label << 1) | (bits[s * m + b] & 1u);
    out[s] = c.points()[c.point_of_label(label)];
  }
  return out;
}

Bits qam_demap(std::span<const cplx> symbols, const QamConstellation& c) {
  const auto m = static_cast<std::size_t>(c.bits_per_symbol());
  Bits out(symbols.size() * m);
  for (std::size_t s = 0; s < symbols.size(); ++s) {
    const std::uint32_t label = c.labels()[c.nearest(symbols[s])];
    for (std::size_t b = 0; b < m; ++b) out[s * m + b] = static_cast<std::uint8_t>((label >> (m - 1 - b)) & 1u);
  }
  return out;
}

void FrameSpec::set_pilot_ratio(double p) {
  if (p == 0.0) {
    pilot_period = 0;
    return;
  }
  if (!(p > 0.0) || p > 0.5) throw std::invalid_argument("pilot_ratio must lie in [0, 1/2]");
  const double k = std::round(1.0 / p);
  if (std::fabs(1.0 / k - p) > 1e-9) throw std::invalid_argument("pilot_ratio must be 0 or 1/k for integer k");
  pilot_period = static_cast<int>(k);
}

std::size_t FrameSpec::frame_symbols() const {
  return static_cast<std::size_t>(2 * guard_len + training_len) +
         static_cast<std::size_t>(payload_block_len) * static_cast<std::size_t>(payload_repeats);
}

std::size_t FrameSpec::payload_offset(int repeat) const {
  return static_cast<std::size_t>(2 * guard_len + training_len) +
         static_cast<std::size_t>(repeat) * static_cast<std::size_t>(payload_block_len);
}

bool FrameSpec::is_pilot(std::size_t i) const {
  return pilot_period != 0 && i % static_cast<std::size_t>(pilot_period) == 0;
}

void FrameSpec::validate() const {
  if (training_len <= 0) throw std::invalid_argument("frame.training_len must be positive");
  if (guard_len < 0 || guard_len > training_len) throw std::invalid_argument("frame.guard_len must lie in [0, training_len]");
  if (payload_block_len <= 0) throw std::invalid_argument("frame.payload_block_len must be positive");
  if (payload_repeats < 1) throw std::invalid_argument("frame.payload_repeats must be >= 1");
  if (pilot_period != 0 && pilot_period < 2) throw std::invalid_argument("frame.pilot_ratio must not exceed 1/2");
  if (!(symbol_rate_baud > 0.0)) throw std::invalid_argument("frame.symbol_rate_baud must be positive");
  if (order != 4 && order != 16 && order != 32) throw std::invalid_argument("frame.order must be 4, 16 or 32");
  if (rolloff < 0.0 || rolloff > 1.0) throw std::invalid_argument("frame.rolloff must lie in [0, 1]");
  if (sps < 2) throw std::invalid_argument("frame.sps must be >= 2");
  if (!(drive_rms > 0.0)) throw std::invalid_argument("frame.drive_rms must be positive");
  if (clip_ratio < 0.0 || clip_ratio >= 1.0) throw std::invalid_argument("frame.clip_ratio must lie in [0, 1)");
  if (!(dac_enob > 0.0)) throw std::invalid_argument("frame.dac_enob must be positive");
}

namespace {

Bits draw_bits(RngStream& rng, std::size_t n) {
  Bits b(n);
  for (auto& v : b) v = static_cast<std::uint8_t>(rng.bit());
  return b;
}

std::size_t pilot_count(const FrameSpec& spec) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(spec.payload_block_len); ++i) n += spec.is_pilot(i);
  return n;
}

}  // namespace

CVec pilot_symbols(const FrameSpec& spec, std::uint64_t seed) {
  static const QamConstellation qpsk(4);
  RngStream rng(seed, streams::kPilots);
  return qam_map(draw_bits(rng, 2 * pilot_count(spec)), qpsk);
}

FrameLayout build_frame(const FrameSpec& spec, const QamConstellation& c, std::uint64_t seed) {
  spec.validate();
  static const QamConstellation qpsk(4);
  FrameLayout f;
  RngStream tr(seed, streams::kTraining);
  f.training_symbols = qam_map(draw_bits(tr, 2 * static_cast<std::size_t>(spec.training_len)), qpsk);

  const auto block = static_cast<std::size_t>(spec.payload_block_len);
  f.pilot_mask.resize(block);
  for (std::size_t i = 0; i < block; ++i) f.pilot_mask[i] = spec.is_pilot(i);
  const std::size_t n_pilots = pilot_count(spec);

  RngStream pr(seed, streams::kPayload);
  f.payload_bits = draw_bits(pr, (block - n_pilots) * static_cast<std::size_t>(c.bits_per_symbol()));
  const CVec data = qam_map(f.payload_bits, c);
  const CVec pilots = pilot_symbols(spec, seed);
  f.payload_block.resize(block);
  for (std::size_t i = 0, ip = 0, id = 0; i < block; ++i) {
    f.payload_block[i] = f.pilot_mask[i] ? pilots[ip++] : data[id++];
  }

  const auto g = static_cast<std::size_t>(spec.guard_len);
  f.symbols.reserve(spec.frame_symbols());
  f.symbols.insert(f.symbols.end(), f.training_symbols.end() - static_cast<std::ptrdiff_t>(g), f.training_symbols.end());
  f.symbols.insert(f.symbols.end(), f.training_symbols.begin(), f.training_symbols.end());
  f.symbols.insert(f.symbols.end(), f.training_symbols.begin(), f.training_symbols.begin() + static_cast<std::ptrdiff_t>(g));
  for (int r = 0; r < spec.payload_repeats; ++r) {
    f.symbols.insert(f.symbols.end(), f.payload_block.begin(), f.payload_block.end());
  }
  return f;
}

ComplexWaveform premix(const ComplexWaveform& w, const FrameSpec& spec) { return propagate_cd(w, spec.premix); }

ComplexWaveform clip(const ComplexWaveform& w, double ratio) {
  if (ratio < 0.0 || ratio >= 1.0) throw std::invalid_argument("clip: ratio must lie in [0, 1)");
  ComplexWaveform out = w;
  if (ratio == 0.0) return out;
  const std::size_t n = w.size();
  const auto k = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n)));
  if (k == 0) return out;
  for (int rail = 0; rail < 2; ++rail) {
    RVec mag(n);
    for (std::size_t i = 0; i < n; ++i) mag[i] = std::fabs(rail == 0 ? w.samples[i].real() : w.samples[i].imag());
    std::nth_element(mag.begin(), mag.begin() + static_cast<std::ptrdiff_t>(k - 1), mag.end(), std::greater<>());
    const double level = mag[k - 1];
    for (auto& v : out.samples) {
      double r = rail == 0 ? v.real() : v.imag();
      if (std::fabs(r) >= level) r = std::copysign(level, r);
      v = rail == 0 ? cplx(r, v.imag()) : cplx(v.real(), r);
    }
  }
  return out;
}

ComplexWaveform dac_model(const ComplexWaveform& w, double enob, RngStream& rng) {
  if (!(enob > 0.0)) throw std::invalid_argument("dac_model: enob must be positive");
  ComplexWaveform out = w;
  if (std::isinf(enob)) return out;
  double fs_i = 0.0, fs_q = 0.0;
  for (const auto& v : w.samples) {
    fs_i = std::max(fs_i, std::fabs(v.real()));
    fs_q = std::max(fs_q, std::fabs(v.imag()));
  }
  const double si = std::sqrt(quantization_noise_variance(fs_i, enob));
  const double sq = std::sqrt(quantization_noise_variance(fs_q, enob));
  for (auto& v : out.samples) {
    const double ni = rng.normal();
    const double nq = rng.normal();
    v += cplx(si * ni, sq * nq);
  }
  return out;
}

double drive_gain(const FrameSpec& spec) { return spec.drive_rms * std::sqrt(2.0 * spec.sps); }

ComplexWaveform build_tx_waveform(const FrameLayout& frame, const FrameSpec& spec, std::uint64_t seed) {
  ComplexWaveform w = rrc_shape(frame.symbols, spec.rolloff, spec.sps, spec.symbol_rate_baud);
  w = premix(w, spec);
  const double g = drive_gain(spec);
  for (auto& v : w.samples) v *= g;
  w = clip(w, spec.clip_ratio);
  RngStream dac(seed, streams::kEnobDac);
  return dac_model(w, spec.dac_enob, dac);
}

}  // namespace dapr
