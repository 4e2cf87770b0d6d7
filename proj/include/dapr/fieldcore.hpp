#pragma once
// Sampled optical fields and the linear operators acting on them: chromatic
// dispersion, root-raised-cosine shaping, brick-wall band limiting and
// square-law detection. Every operator is circular over the block.

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace dapr {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using RVec = std::vector<double>;

inline constexpr double kSpeedOfLight = 299792458.0;
// Operating wavelength of the reference link.
inline constexpr double kDefaultWavelengthNm = 1541.02;

/// Uniformly sampled complex baseband field.
struct ComplexWaveform {
  CVec samples;
  double sample_rate_hz = 0.0;

  ComplexWaveform() = default;
  /// Throws std::invalid_argument on an empty block or non-positive rate.
  ComplexWaveform(CVec s, double fs);

  std::size_t size() const { return samples.size(); }
  double energy() const;
  double mean_power() const { return energy() / static_cast<double>(size()); }
};

enum class Branch { dispersed = 0, undispersed = 1 };

std::string_view to_string(Branch b);
Branch branch_from_string(std::string_view s);

/// Photocurrent samples of one receiver branch.
struct IntensityTrace {
  RVec samples;
  double sample_rate_hz = 0.0;
  Branch branch = Branch::undispersed;

  std::size_t size() const { return samples.size(); }
  double mean() const;
};

struct DispersionSpec {
  double ps_per_nm = 0.0;
  double center_wavelength_nm = kDefaultWavelengthNm;

  DispersionSpec negated() const { return {-ps_per_nm, center_wavelength_nm}; }
  DispersionSpec plus(double extra_ps_per_nm) const {
    return {ps_per_nm + extra_ps_per_nm, center_wavelength_nm};
  }
  bool operator==(const DispersionSpec&) const = default;
};

enum class FirRole { tx_i, tx_q, rx_branch1, rx_branch2 };

/// Odd-length FIR whose centre tap sits at zero delay.
struct FirResponse {
  CVec taps{cplx(1.0, 0.0)};
  FirRole role = FirRole::tx_i;

  static FirResponse identity(FirRole role, std::size_t n_taps = 1);
  /// Throws std::invalid_argument for even or empty tap vectors.
  void validate() const;
  std::size_t center() const { return taps.size() / 2; }
};

// ---------------------------------------------------------------------------
// Frequency responses on an N-point circular grid (fftfreq bin order).

/// exp(-j*pi*D*lambda^2*f^2/c), D in s/m^2 converted from ps/nm.
CVec cd_transfer(std::size_t n, double sample_rate_hz, const DispersionSpec& d);

/// Inverse DFT of cd_transfer: the circular impulse response, lag 0 at index 0.
CVec cd_kernel(std::size_t n, double sample_rate_hz, const DispersionSpec& d);

/// Root-raised-cosine amplitude response on the grid of an sps-times
/// oversampled block; |H|^2 folds to a constant so the shaping is ISI-free.
RVec rrc_transfer(std::size_t n, double rolloff, int sps);

/// 1 inside |f| <= cutoff, 0 outside.
RVec brickwall_mask(std::size_t n, double sample_rate_hz, double cutoff_hz);

/// DFT of an FIR with its centre tap placed at lag 0.
CVec fir_transfer(std::span<const cplx> taps, std::size_t n);

/// Analytic continuous-time RRC pulse with unit-energy normalization, t in symbol periods.
double rrc_pulse(double t_symbols, double rolloff);

// ---------------------------------------------------------------------------
// Operations on waveforms.

ComplexWaveform propagate_cd(const ComplexWaveform& w, const DispersionSpec& d);

/// Explicit O(N^2) circular Toeplitz product b_i = sum_k H[(i-k) mod N] a_k.
/// Reference only; kernel[m] is the response at lag m.
ComplexWaveform toeplitz_propagate(const ComplexWaveform& w, std::span<const cplx> kernel);

/// Upsample by sps and apply the circular RRC response. Symbol centres land on
/// sample indices that are multiples of sps.
ComplexWaveform rrc_shape(std::span<const cplx> symbols, double rolloff, int sps,
                          double symbol_rate_baud);

/// Matched RRC filter followed by decimation to one sample per symbol.
CVec matched_filter_decimate(const ComplexWaveform& w, double rolloff, int sps);

ComplexWaveform bandwidth_filter(const ComplexWaveform& w, double cutoff_hz);

IntensityTrace square_law(const ComplexWaveform& w, Branch branch = Branch::undispersed);

/// Circular convolution with a centred FIR (FFT based).
CVec fir_filter(std::span<const cplx> x, std::span<const cplx> taps);
RVec fir_filter_real(std::span<const double> x, std::span<const double> taps);

/// Multiply the spectrum of x by h in place: x <- IDFT(DFT(x) * h).
void apply_transfer(CVec& x, std::span<const cplx> h);
void apply_transfer(CVec& x, std::span<const double> h);

/// Electrical PAPR of a real waveform: 10*log10(max x^2 / mean x^2).
double papr_db(std::span<const double> x);

/// ||a - b|| / ||b||.
double relative_l2(std::span<const cplx> a, std::span<const cplx> b);
double relative_l2(std::span<const double> a, std::span<const double> b);

}  // namespace dapr
