#pragma once
// Transmitter side: Gray-labelled QAM, the training/guard/payload frame,
// digital dispersion premix, per-rail clipping and the DAC noise model.

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "dapr/fieldcore.hpp"
#include "dapr/rng.hpp"

namespace dapr {

using Bits = std::vector<std::uint8_t>;

class QamConstellation {
 public:
  /// order in {4, 16, 32}; 32 is the cross constellation.
  explicit QamConstellation(int order);

  int order() const { return order_; }
  int bits_per_symbol() const { return bits_; }
  const CVec& points() const { return points_; }
  /// labels()[i] is the bit pattern of points()[i], first transmitted bit as MSB.
  const std::vector<std::uint32_t>& labels() const { return labels_; }
  std::size_t point_of_label(std::uint32_t label) const { return by_label_[label]; }
  std::size_t nearest(cplx y) const;
  /// Minimum-distance neighbour pairs whose labels differ in more than one bit.
  int gray_violations() const;

 private:
  int order_;
  int bits_;
  CVec points_;
  std::vector<std::uint32_t> labels_;
  std::vector<std::size_t> by_label_;
};

CVec qam_map(std::span<const std::uint8_t> bits, const QamConstellation& c);
/// Hard nearest-point decision.
Bits qam_demap(std::span<const cplx> symbols, const QamConstellation& c);

struct FrameSpec {
  int training_len = 8192;
  int guard_len = 64;
  int payload_block_len = 8192;
  int payload_repeats = 3;
  /// Every pilot_period-th payload symbol is a pilot (ratio 1/pilot_period); 0 disables pilots.
  int pilot_period = 2;
  DispersionSpec premix{-3000.0};
  double symbol_rate_baud = 50e9;
  int order = 16;
  double rolloff = 0.01;
  int sps = 2;
  /// RMS of each Tx rail after the drive gain, before clipping.
  double drive_rms = 0.3;
  double clip_ratio = 0.005;
  double dac_enob = std::numeric_limits<double>::infinity();

  double pilot_ratio() const { return pilot_period == 0 ? 0.0 : 1.0 / pilot_period; }
  /// Accepts 0 or 1/k for integer k >= 2.
  void set_pilot_ratio(double p);
  std::size_t frame_symbols() const;
  std::size_t training_offset() const { return static_cast<std::size_t>(guard_len); }
  std::size_t payload_offset(int repeat) const;
  double sample_rate_hz() const { return symbol_rate_baud * sps; }
  bool is_pilot(std::size_t payload_index) const;
  void validate() const;
};

struct FrameLayout {
  CVec symbols;
  std::vector<bool> pilot_mask;  // one entry per payload-block symbol
  CVec training_symbols;
  CVec payload_block;
  Bits payload_bits;  // bits of the non-pilot payload symbols, in order
};

/// Training: QPSK from the training stream. Payload: QAM from the payload
/// stream with pilot slots overwritten by QPSK from the pilot stream. The
/// payload block is repeated payload_repeats times.
FrameLayout build_frame(const FrameSpec& spec, const QamConstellation& c, std::uint64_t seed);

/// Pilot values for one payload block, regenerated from (spec, seed) alone.
CVec pilot_symbols(const FrameSpec& spec, std::uint64_t seed);

ComplexWaveform premix(const ComplexWaveform& w, const FrameSpec& spec);

/// Per-rail hard limit at the level leaving exactly ceil(ratio * N) samples of
/// each rail at +-level.
ComplexWaveform clip(const ComplexWaveform& w, double ratio);

/// Per-rail Gaussian noise at the ENOB-equivalent SNR; full scale is the
/// rail's peak magnitude.
ComplexWaveform dac_model(const ComplexWaveform& w, double enob, RngStream& rng);

/// Gain that brings RRC-shaped unit-power symbols to drive_rms per rail.
double drive_gain(const FrameSpec& spec);

/// shape -> premix -> drive gain -> clip -> DAC.
ComplexWaveform build_tx_waveform(const FrameLayout& frame, const FrameSpec& spec, std::uint64_t seed);

}  // namespace dapr
