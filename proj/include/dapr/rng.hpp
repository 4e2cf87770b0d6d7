#pragma once
// Named random streams derived from one master seed. Every stochastic role
// (training bits, payload bits, pilots, each noise source) draws from its own
// stream so that adding or removing one source never perturbs the others.

#include <cstdint>
#include <random>
#include <string_view>

namespace dapr {

class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::string_view role);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  int bit() { return static_cast<int>(engine_() >> 63); }
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

namespace streams {
inline constexpr std::string_view kTraining = "training";
inline constexpr std::string_view kPayload = "payload";
inline constexpr std::string_view kPilots = "pilots";
inline constexpr std::string_view kAse = "ase";
inline constexpr std::string_view kThermalB1 = "thermal_b1";
inline constexpr std::string_view kThermalB2 = "thermal_b2";
inline constexpr std::string_view kEnobDac = "enob_dac";
inline constexpr std::string_view kEnobAdcB1 = "enob_adc_b1";
inline constexpr std::string_view kEnobAdcB2 = "enob_adc_b2";
}  // namespace streams

}  // namespace dapr
