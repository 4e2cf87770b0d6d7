#include "dapr/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>

#include "dapr/kernels.hpp"

namespace dapr::fft {
namespace {

struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
};

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [n, p] : plans_) {
      fftw_destroy_plan(p.fwd);
      fftw_destroy_plan(p.inv);
    }
  }

  const PlanPair& get(std::size_t n) {
    std::lock_guard lock(mu_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    // Planning scratch; plans are in-place and unaligned so any buffer of the
    // same length can be passed to fftw_execute_dft later.
    std::vector<cplx> scratch(n);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    const int len = static_cast<int>(n);
    PlanPair p{fftw_plan_dft_1d(len, buf, buf, FFTW_FORWARD, flags),
               fftw_plan_dft_1d(len, buf, buf, FFTW_BACKWARD, flags)};
    if (p.fwd == nullptr || p.inv == nullptr) throw std::runtime_error("fftw planning failed");
    return plans_.emplace(n, p).first->second;
  }

 private:
  std::mutex mu_;
  std::map<std::size_t, PlanPair> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

}  // namespace

void forward(std::span<cplx> x) {
  if (x.empty()) return;
  auto* buf = reinterpret_cast<fftw_complex*>(x.data());
  fftw_execute_dft(cache().get(x.size()).fwd, buf, buf);
}

void inverse(std::span<cplx> x) {
  if (x.empty()) return;
  auto* buf = reinterpret_cast<fftw_complex*>(x.data());
  fftw_execute_dft(cache().get(x.size()).inv, buf, buf);
  kernels::active().scale_inplace(x.data(), 1.0 / static_cast<double>(x.size()), x.size());
}

std::vector<double> frequencies(std::size_t n, double sample_rate_hz) {
  std::vector<double> f(n);
  const double df = sample_rate_hz / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto kk = static_cast<long long>(k);
    const auto nn = static_cast<long long>(n);
    f[k] = static_cast<double>(2 * kk < nn ? kk : kk - nn) * df;
  }
  return f;
}

}  // namespace dapr::fft
