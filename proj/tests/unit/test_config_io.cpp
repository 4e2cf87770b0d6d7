#include <gtest/gtest.h>

#include <fstream>

#include "dapr/config.hpp"
#include "dapr/io.hpp"
#include "test_util.hpp"

using namespace dapr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(DAPR_TEST_TMP) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

const char* kMinimal = R"({
  // only the required frame fields
  "frame": {"training_len": 1024, "guard_len": 64, "payload_block_len": 512, "payload_repeats": 1,
            "pilot_ratio": "1/4", "symbol_rate_baud": 5e10, "order": 16}
})";

}  // namespace

TEST(Config, ShippedConfigsRoundTrip) {
  for (const auto& e : fs::directory_iterator(DAPR_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    const ExperimentConfig c = load_config(e.path());
    const ExperimentConfig back = experiment_from_json(to_json(c));
    EXPECT_EQ(to_json(back).dump(), to_json(c).dump()) << e.path();
    EXPECT_EQ(config_hash(back), config_hash(c)) << e.path();
  }
}

TEST(Config, MissingFieldsDefaultToIdentity) {
  const ExperimentConfig c = parse_config(kMinimal);
  EXPECT_EQ(c.frame.pilot_period, 4);
  EXPECT_TRUE(c.channel.iq.is_identity());
  EXPECT_TRUE(c.channel.nl.is_identity());
  EXPECT_TRUE(std::isinf(c.channel.osnr_db));
  EXPECT_EQ(c.channel.element.ps_per_nm, 0.0);
  EXPECT_EQ(c.receiver, ReceiverMode::distortion_aware);
}

TEST(Config, MissingRequiredFieldNamesPath) {
  const std::string msg = error_of(R"({"frame": {"training_len": 1024, "guard_len": 64, "payload_block_len": 512,
      "payload_repeats": 1, "pilot_ratio": 0.5, "symbol_rate_baud": 5e10}})");
  EXPECT_EQ(msg.rfind("frame.order", 0), 0u) << msg;
}

TEST(Config, BadValuesNamePath) {
  std::string t = kMinimal;
  t.replace(t.find("\"order\": 16"), 11, "\"order\": 8");
  EXPECT_EQ(error_of(t).rfind("frame.order", 0), 0u) << error_of(t);
  const std::string split = R"({"frame": {"training_len": 1024, "guard_len": 64, "payload_block_len": 512,
      "payload_repeats": 1, "pilot_ratio": 0.5, "symbol_rate_baud": 5e10, "order": 4},
      "channel": {"splitter_ratio": 2}})";
  EXPECT_EQ(error_of(split).rfind("channel.splitter_ratio", 0), 0u) << error_of(split);
  const std::string even = R"({"frame": {"training_len": 1024, "guard_len": 64, "payload_block_len": 512,
      "payload_repeats": 1, "pilot_ratio": 0.5, "symbol_rate_baud": 5e10, "order": 4},
      "channel": {"tx_response_i": [1, 0]}})";
  EXPECT_EQ(error_of(even).rfind("channel.tx_response_i", 0), 0u) << error_of(even);
}

TEST(Config, DispersionForms) {
  ExperimentConfig c = parse_config(R"({"frame": {"training_len": 1024, "guard_len": 64, "payload_block_len": 512,
      "payload_repeats": 1, "pilot_ratio": 0.5, "symbol_rate_baud": 5e10, "order": 4},
      "channel": {"fiber": {"length_km": 40, "ps_per_nm_per_km": 17}, "element": -1275, "osnr_db": "inf"}})");
  EXPECT_DOUBLE_EQ(c.channel.fiber.ps_per_nm, 680.0);
  EXPECT_DOUBLE_EQ(c.channel.element.ps_per_nm, -1275.0);
  EXPECT_TRUE(std::isinf(c.channel.osnr_db));
}

TEST(Config, HashIgnoresSeedsAndOutput) {
  ExperimentConfig a = parse_config(kMinimal);
  ExperimentConfig b = a;
  b.seeds = {7, 8};
  b.output_dir = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.channel.osnr_db = 30.0;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 64u);
}

TEST(Config, ApplyAxis) {
  const ExperimentConfig c = parse_config(kMinimal);
  EXPECT_EQ(apply_axis(c, SweepAxis::osnr, 28.0).channel.osnr_db, 28.0);
  EXPECT_EQ(apply_axis(c, SweepAxis::pilot_ratio, 0.2).frame.pilot_period, 5);
  const ExperimentConfig it = apply_axis(c, SweepAxis::iterations, 17.0);
  EXPECT_EQ(it.pr.max_iters, 17);
  EXPECT_FALSE(it.pr.stop_at_convergence);
  EXPECT_TRUE(apply_axis(c, SweepAxis::phase_reset_threshold, 0.3).pr.phase_reset_enabled);
  EXPECT_EQ(apply_axis(c, SweepAxis::enob, 5.8).channel.enob, 5.8);
}

TEST(Config, EstimateRoundTrip) {
  ChannelEstimate e;
  e.tx_response_i.taps = {cplx(0.1, -0.2), cplx(1.0), cplx(0.0, 0.3)};
  e.iq = {0.06, 2.5e-12, 0.05};
  e.nl = {0.03, -0.08, -0.02, -0.1, 1.0};
  e.branch(Branch::dispersed).total_cd = DispersionSpec{-3595.0};
  e.branch(Branch::dispersed).ffe_taps = {0.1, 0.8, 0.1};
  e.stages.push_back({0, "ffe", {0.1, 0.2}});
  e.tx_est_mae = {{0.3, 0.2}};
  const ChannelEstimate back = estimate_from_json(to_json(e));
  EXPECT_EQ(to_json(back).dump(), to_json(e).dump());
  EXPECT_EQ(back.tx_response_i.taps, e.tx_response_i.taps);
  EXPECT_EQ(back.iq, e.iq);
}

TEST(Io, TraceAndWaveformRoundTrip) {
  const fs::path d = scratch("io_roundtrip");
  IntensityTrace t;
  t.samples = {0.5, 1.25, -0.125};
  t.sample_rate_hz = 100e9;
  t.branch = Branch::dispersed;
  io::write_trace(d / "t.bin", t);
  const IntensityTrace r = io::read_trace(d / "t.bin");
  EXPECT_EQ(r.samples, t.samples);
  EXPECT_EQ(r.branch, Branch::dispersed);
  EXPECT_EQ(fs::file_size(d / "t.bin"), 64u + 3 * 8);
  const io::SampleHeader h = io::read_header(d / "t.bin");
  EXPECT_EQ(h.length, 3u);
  EXPECT_EQ(h.branch_id, 0);

  const ComplexWaveform w(dapr::test::random_field(17, 1), 100e9);
  io::write_waveform(d / "w.bin", w);
  EXPECT_EQ(io::read_waveform(d / "w.bin").samples, w.samples);
  EXPECT_THROW(io::read_trace(d / "w.bin"), io::IoError);
}

TEST(Io, RejectsCorruptFiles) {
  const fs::path d = scratch("io_corrupt");
  io::write_text(d / "short.bin", "DAPR");
  EXPECT_THROW(io::read_trace(d / "short.bin"), io::IoError);
  IntensityTrace t;
  t.samples = {1.0, 2.0};
  t.sample_rate_hz = 1.0;
  io::write_trace(d / "t.bin", t);
  {
    std::ofstream f(d / "t.bin", std::ios::binary | std::ios::app);
    f << 'x';
  }
  EXPECT_THROW(io::read_trace(d / "t.bin"), io::IoError);
}

TEST(Manifest, HashesAndRefusals) {
  const fs::path d = scratch("manifest");
  io::write_text(d / "a.txt", "alpha");
  io::Manifest m("cafe", 3);
  m.add_file(d, "a.txt", "text");
  m.extra()["sps"] = 2;
  m.save(d);
  const io::Manifest l = io::Manifest::load(d);
  EXPECT_TRUE(l.has("a.txt"));
  EXPECT_EQ(l.files_of_kind("text"), std::vector<std::string>{"a.txt"});
  EXPECT_EQ(l.seed(), 3u);
  EXPECT_EQ(l.extra().at("sps"), 2);
  EXPECT_NO_THROW(l.verify(d));
  EXPECT_NO_THROW(l.require_config("cafe"));
  EXPECT_THROW(l.require_config("beef"), io::IoError);
  io::write_text(d / "a.txt", "tampered");
  EXPECT_THROW(l.verify(d), io::IoError);
  fs::remove(d / "a.txt");
  EXPECT_THROW(l.verify(d), io::IoError);
  EXPECT_THROW(io::Manifest::load(d / "nowhere"), io::IoError);
}

TEST(Sha, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
