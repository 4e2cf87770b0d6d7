#pragma once
// Thin FFTW wrapper: cached in-place plans per length, deterministic
// (FFTW_ESTIMATE) so repeated runs are bit-identical.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace dapr::fft {

using cplx = std::complex<double>;

// Unnormalized forward DFT, in place.
void forward(std::span<cplx> x);

// Inverse DFT scaled by 1/N, in place.
void inverse(std::span<cplx> x);

// Baseband frequency of each DFT bin (numpy fftfreq layout), in Hz.
std::vector<double> frequencies(std::size_t n, double sample_rate_hz);

// Index of the bin holding frequency -f(k).
inline std::size_t mirror_bin(std::size_t k, std::size_t n) { return k == 0 ? 0 : n - k; }

}  // namespace dapr::fft
