#pragma once
// Experiment description: one JSON document (comments allowed) holding the
// frame, ground-truth channel, training, reconstruction and sweep settings.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dapr/channelsim.hpp"
#include "dapr/reconstructor.hpp"
#include "dapr/trainer.hpp"
#include "dapr/txchain.hpp"

namespace dapr {

enum class ReceiverMode {
  distortion_aware,  // trained FFE, Tx response, IQ and nonlinearity
  conventional,      // dispersion and sync only
  conventional_ffe,  // trained FFE, no transmitter-side distortion
};

enum class SweepAxis { osnr, pilot_ratio, iterations, phase_reset_threshold, enob };

struct SweepSpec {
  SweepAxis axis = SweepAxis::osnr;
  std::vector<double> values;
};

struct ExperimentConfig {
  FrameSpec frame;
  ChannelModel channel;
  TrainingConfig training;
  PrConfig pr;
  ReceiverMode receiver = ReceiverMode::distortion_aware;
  std::optional<SweepSpec> sweep;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "out";

  void validate() const;
};

/// Thrown for malformed documents; what() starts with the offending field path.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string to_string(ReceiverMode m);
std::string to_string(SweepAxis a);
SweepAxis sweep_axis_from_string(const std::string& s);

nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);

nlohmann::json to_json(const FrameSpec& f);
nlohmann::json to_json(const ChannelModel& m);
nlohmann::json to_json(const TrainingConfig& t);
nlohmann::json to_json(const PrConfig& p);
nlohmann::json to_json(const ChannelEstimate& e);
ChannelEstimate estimate_from_json(const nlohmann::json& j);

/// Lowercase hex SHA-256 of the canonical (sorted-key, compact) serialization.
std::string config_hash(const ExperimentConfig& c);
std::string sha256_hex(std::string_view data);

/// Copy of `base` with the sweep axis set to `value`.
ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, double value);

}  // namespace dapr
