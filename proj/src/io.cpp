#include "dapr/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dapr/config.hpp"

namespace dapr::io {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "sample files assume a little-endian host");

constexpr char kMagic[8] = {'D', 'A', 'P', 'R', 'T', 'R', 'C', '1'};

template <typename T>
void put(std::vector<char>& buf, std::size_t off, T v) {
  std::memcpy(buf.data() + off, &v, sizeof(T));
}

template <typename T>
T get(const char* buf, std::size_t off) {
  T v;
  std::memcpy(&v, buf + off, sizeof(T));
  return v;
}

void write_samples(const fs::path& p, const SampleHeader& h, const double* data, std::size_t n_doubles) {
  std::vector<char> head(kHeaderBytes, 0);
  std::memcpy(head.data(), kMagic, 8);
  put<std::uint32_t>(head, 8, kFormatVersion);
  put<std::uint32_t>(head, 12, static_cast<std::uint32_t>(h.kind));
  put<double>(head, 16, h.sample_rate_hz);
  put<std::uint64_t>(head, 24, h.length);
  put<std::int32_t>(head, 32, h.branch_id);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(p.string() + ": cannot open for writing");
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n_doubles * sizeof(double)));
  if (!out) throw IoError(p.string() + ": write failed");
}

SampleHeader parse_header(const fs::path& p, std::ifstream& in) {
  char head[kHeaderBytes];
  in.read(head, kHeaderBytes);
  if (in.gcount() != static_cast<std::streamsize>(kHeaderBytes)) throw IoError(p.string() + ": truncated header");
  if (std::memcmp(head, kMagic, 8) != 0) throw IoError(p.string() + ": bad magic");
  if (get<std::uint32_t>(head, 8) != kFormatVersion) throw IoError(p.string() + ": unsupported format version");
  SampleHeader h;
  const auto kind = get<std::uint32_t>(head, 12);
  if (kind > 1) throw IoError(p.string() + ": unknown sample kind");
  h.kind = static_cast<SampleKind>(kind);
  h.sample_rate_hz = get<double>(head, 16);
  h.length = get<std::uint64_t>(head, 24);
  h.branch_id = get<std::int32_t>(head, 32);
  return h;
}

std::vector<double> read_samples(const fs::path& p, SampleKind want, SampleHeader& h) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError(p.string() + ": cannot open");
  h = parse_header(p, in);
  if (h.kind != want) throw IoError(p.string() + ": unexpected sample kind");
  const std::size_t n = h.length * (want == SampleKind::complex ? 2 : 1);
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(n * sizeof(double))) throw IoError(p.string() + ": truncated data");
  if (in.peek() != std::char_traits<char>::eof()) throw IoError(p.string() + ": trailing bytes");
  return v;
}

}  // namespace

void write_trace(const fs::path& p, const IntensityTrace& t) {
  write_samples(p, {SampleKind::intensity, t.sample_rate_hz, t.size(), static_cast<std::int32_t>(t.branch)},
                t.samples.data(), t.size());
}

IntensityTrace read_trace(const fs::path& p) {
  SampleHeader h;
  IntensityTrace t;
  t.samples = read_samples(p, SampleKind::intensity, h);
  t.sample_rate_hz = h.sample_rate_hz;
  if (h.branch_id != 0 && h.branch_id != 1) throw IoError(p.string() + ": trace has no branch id");
  t.branch = static_cast<Branch>(h.branch_id);
  return t;
}

void write_waveform(const fs::path& p, const ComplexWaveform& w) {
  write_samples(p, {SampleKind::complex, w.sample_rate_hz, w.size(), -1},
                reinterpret_cast<const double*>(w.samples.data()), 2 * w.size());
}

ComplexWaveform read_waveform(const fs::path& p) {
  SampleHeader h;
  const std::vector<double> v = read_samples(p, SampleKind::complex, h);
  CVec s(h.length);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = cplx(v[2 * i], v[2 * i + 1]);
  return ComplexWaveform(std::move(s), h.sample_rate_hz);
}

SampleHeader read_header(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError(p.string() + ": cannot open");
  return parse_header(p, in);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError(p.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(p.string() + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(p.string() + ": write failed");
}

std::string sha256_file(const fs::path& p) { return sha256_hex(read_text(p)); }

Manifest::Manifest(std::string config_hash, std::uint64_t seed) : config_hash_(std::move(config_hash)), seed_(seed) {}

void Manifest::add_file(const fs::path& dir, const std::string& name, const std::string& kind) {
  Entry e{name, kind, sha256_file(dir / name)};
  for (auto& x : entries_) {
    if (x.name == name) {
      x = e;
      return;
    }
  }
  entries_.push_back(e);
}

bool Manifest::has(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

std::vector<std::string> Manifest::files_of_kind(const std::string& kind) const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (e.kind == kind) out.push_back(e.name);
  }
  return out;
}

nlohmann::json Manifest::to_json() const {
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const auto& e : entries_) files.push_back({{"name", e.name}, {"kind", e.kind}, {"sha256", e.sha256}});
  nlohmann::json j;
  j["config_hash"] = config_hash_;
  j["seed"] = seed_;
  j["versions"] = {{"tool", kToolVersion}, {"sample_format", kFormatVersion}};
  j["files"] = nlohmann::json::parse(files.dump());
  if (!extra_.empty()) j["extra"] = extra_;
  return j;
}

Manifest Manifest::from_json(const nlohmann::json& j) {
  try {
    Manifest m(j.at("config_hash").get<std::string>(), j.at("seed").get<std::uint64_t>());
    for (const auto& f : j.at("files")) {
      m.entries_.push_back({f.at("name").get<std::string>(), f.at("kind").get<std::string>(),
                            f.at("sha256").get<std::string>()});
    }
    if (j.contains("extra")) m.extra_ = j.at("extra");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("manifest: ") + e.what());
  }
}

void Manifest::save(const fs::path& dir) const { write_text(dir / kFileName, to_json().dump(2) + "\n"); }

Manifest Manifest::load(const fs::path& dir) {
  const fs::path p = dir / kFileName;
  if (!fs::exists(p)) throw IoError(p.string() + ": no manifest");
  try {
    return from_json(nlohmann::json::parse(read_text(p)));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(p.string() + ": " + e.what());
  }
}

void Manifest::verify(const fs::path& dir) const {
  for (const auto& e : entries_) {
    const fs::path p = dir / e.name;
    if (!fs::exists(p)) throw IoError(p.string() + ": listed in manifest but missing");
    if (sha256_file(p) != e.sha256) throw IoError(p.string() + ": content hash differs from manifest");
  }
}

void Manifest::require_config(const std::string& expected_hash) const {
  if (config_hash_ != expected_hash) {
    throw IoError("manifest config hash " + config_hash_ + " does not match the current config " + expected_hash);
  }
}

}  // namespace dapr::io
