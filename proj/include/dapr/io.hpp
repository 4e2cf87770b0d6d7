#pragma once
// Binary sample files and output-directory manifests.
//
// Sample file layout (all little-endian):
//   0   char[8]  magic "DAPRTRC1"
//   8   u32      format version (1)
//   12  u32      kind: 0 = intensity (one f64 per sample), 1 = complex (f64 re, f64 im)
//   16  f64      sample rate in Hz
//   24  u64      sample count
//   32  i32      branch id: 0 dispersed, 1 undispersed, -1 none
//   36  zero padding to 64 bytes

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dapr/fieldcore.hpp"

namespace dapr::io {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderBytes = 64;
inline constexpr const char* kToolVersion = "1.0.0";

enum class SampleKind : std::uint32_t { intensity = 0, complex = 1 };

struct SampleHeader {
  SampleKind kind = SampleKind::intensity;
  double sample_rate_hz = 0.0;
  std::uint64_t length = 0;
  std::int32_t branch_id = -1;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_trace(const std::filesystem::path& p, const IntensityTrace& t);
IntensityTrace read_trace(const std::filesystem::path& p);
void write_waveform(const std::filesystem::path& p, const ComplexWaveform& w);
ComplexWaveform read_waveform(const std::filesystem::path& p);
SampleHeader read_header(const std::filesystem::path& p);

std::string sha256_file(const std::filesystem::path& p);
void write_text(const std::filesystem::path& p, const std::string& text);
std::string read_text(const std::filesystem::path& p);

/// Output-directory manifest: config hash, seed, tool versions and a content
/// hash per file. Paths are relative to the directory holding the manifest.
class Manifest {
 public:
  Manifest() = default;
  Manifest(std::string config_hash, std::uint64_t seed);

  const std::string& config_hash() const { return config_hash_; }
  std::uint64_t seed() const { return seed_; }

  /// Hashes `dir / name` and records it (replacing an existing entry).
  void add_file(const std::filesystem::path& dir, const std::string& name, const std::string& kind);
  bool has(const std::string& name) const;
  std::vector<std::string> files_of_kind(const std::string& kind) const;
  nlohmann::json& extra() { return extra_; }
  const nlohmann::json& extra() const { return extra_; }

  nlohmann::json to_json() const;
  static Manifest from_json(const nlohmann::json& j);

  void save(const std::filesystem::path& dir) const;
  static Manifest load(const std::filesystem::path& dir);
  /// Throws IoError when any listed file is missing or its hash differs.
  void verify(const std::filesystem::path& dir) const;
  /// Throws IoError unless the manifest was produced for `expected_hash`.
  void require_config(const std::string& expected_hash) const;

  static constexpr const char* kFileName = "manifest.json";

 private:
  struct Entry {
    std::string name;
    std::string kind;
    std::string sha256;
  };
  std::string config_hash_;
  std::uint64_t seed_ = 0;
  std::vector<Entry> entries_;
  nlohmann::json extra_ = nlohmann::json::object();
};

}  // namespace dapr::io
