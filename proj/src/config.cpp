#include "dapr/config.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

namespace dapr {

using nlohmann::json;

namespace {

json num(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

json taps_json(const CVec& taps) {
  json a = json::array();
  for (const auto& t : taps) a.push_back(json::array({t.real(), t.imag()}));
  return a;
}

json dispersion_json(const DispersionSpec& d) {
  return json{{"ps_per_nm", d.ps_per_nm}, {"center_wavelength_nm", d.center_wavelength_nm}};
}

std::string ratio_string(int period) { return period == 0 ? "0" : "1/" + std::to_string(period); }

// Path-aware accessor: every error names the offending field.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& msg) {
    throw ConfigError(path + ": " + msg);
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& raw(const std::string& key) const { return j_.at(key); }

  void require(const std::string& key) const {
    if (!has(key)) fail(at(key), "required field is missing");
  }

  double number(const std::string& key, double def) const {
    if (!has(key)) return def;
    return to_number(j_.at(key), at(key));
  }

  static double to_number(const json& v, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      if (s == "inf" || s == "infinity" || s == "+inf") return std::numeric_limits<double>::infinity();
      if (s == "-inf") return -std::numeric_limits<double>::infinity();
      const auto slash = s.find('/');
      if (slash != std::string::npos) {
        try {
          return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
        } catch (const std::exception&) {
        }
      }
    }
    fail(path, "expected a number");
  }

  int integer(const std::string& key, int def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) fail(at(key), "expected an integer");
    return v.get<int>();
  }

  bool boolean(const std::string& key, bool def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_boolean()) fail(at(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_string()) fail(at(key), "expected a string");
    return v.get<std::string>();
  }

  Reader child(const std::string& key) const { return Reader(j_.at(key), at(key)); }

  CVec taps(const std::string& key, const CVec& def) const {
    if (!has(key)) return def;
    return parse_taps(j_.at(key), at(key));
  }

  static CVec parse_taps(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) fail(path, "expected a non-empty tap array");
    CVec out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const json& t = v[i];
      const std::string p = path + "[" + std::to_string(i) + "]";
      if (t.is_number()) {
        out.emplace_back(t.get<double>(), 0.0);
      } else if (t.is_array() && t.size() == 2 && t[0].is_number() && t[1].is_number()) {
        out.emplace_back(t[0].get<double>(), t[1].get<double>());
      } else {
        fail(p, "expected a number or a [re, im] pair");
      }
    }
    if (out.size() % 2 == 0) fail(path, "tap count must be odd");
    return out;
  }

  DispersionSpec dispersion(const std::string& key, const DispersionSpec& def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (v.is_number()) return DispersionSpec{v.get<double>(), kDefaultWavelengthNm};
    const Reader r = child(key);
    DispersionSpec d;
    d.center_wavelength_nm = r.number("center_wavelength_nm", kDefaultWavelengthNm);
    if (r.has("length_km")) {
      d.ps_per_nm = r.number("length_km", 0.0) * r.number("ps_per_nm_per_km", 17.0);
    } else {
      d.ps_per_nm = r.number("ps_per_nm", 0.0);
    }
    return d;
  }

 private:
  const json& j_;
  std::string path_;
};

FrameSpec frame_from_json(const Reader& r) {
  FrameSpec f;
  for (const char* k : {"training_len", "guard_len", "payload_block_len", "payload_repeats", "pilot_ratio",
                        "symbol_rate_baud", "order"}) {
    r.require(k);
  }
  f.training_len = r.integer("training_len", f.training_len);
  f.guard_len = r.integer("guard_len", f.guard_len);
  f.payload_block_len = r.integer("payload_block_len", f.payload_block_len);
  f.payload_repeats = r.integer("payload_repeats", f.payload_repeats);
  try {
    f.set_pilot_ratio(r.number("pilot_ratio", 0.5));
  } catch (const std::invalid_argument& e) {
    Reader::fail(r.at("pilot_ratio"), e.what());
  }
  f.premix = r.dispersion("premix", f.premix);
  f.symbol_rate_baud = r.number("symbol_rate_baud", f.symbol_rate_baud);
  f.order = r.integer("order", f.order);
  f.rolloff = r.number("rolloff", f.rolloff);
  f.sps = r.integer("sps", f.sps);
  f.drive_rms = r.number("drive_rms", f.drive_rms);
  f.clip_ratio = r.number("clip_ratio", f.clip_ratio);
  f.dac_enob = r.number("dac_enob", f.dac_enob);
  return f;
}

FirResponse fir_from(const Reader& r, const std::string& key, FirRole role) {
  FirResponse f = FirResponse::identity(role);
  f.taps = r.taps(key, f.taps);
  return f;
}

ChannelModel channel_from_json(const Reader& r) {
  ChannelModel m;
  m.tx_response_i = fir_from(r, "tx_response_i", FirRole::tx_i);
  m.tx_response_q = fir_from(r, "tx_response_q", FirRole::tx_q);
  if (r.has("nl")) {
    const Reader n = r.child("nl");
    m.nl.c2_i = n.number("c2_i", 0.0);
    m.nl.c3_i = n.number("c3_i", 0.0);
    m.nl.c2_q = n.number("c2_q", 0.0);
    m.nl.c3_q = n.number("c3_q", 0.0);
    m.nl.range = n.number("range", m.nl.range);
  }
  if (r.has("iq")) {
    const Reader q = r.child("iq");
    m.iq.rho = q.number("rho", 0.0);
    m.iq.tau_s = q.number("tau_s", 0.0);
    m.iq.phi = q.number("phi", 0.0);
  }
  m.fiber = r.dispersion("fiber", m.fiber);
  m.splitter_ratio = r.number("splitter_ratio", m.splitter_ratio);
  m.element = r.dispersion("element", m.element);
  m.element_loss_db = r.number("element_loss_db", m.element_loss_db);
  if (r.has("rx_response")) {
    const json& a = r.raw("rx_response");
    if (!a.is_array() || a.size() != 2) Reader::fail(r.at("rx_response"), "expected two tap arrays");
    m.rx_response[0].taps = Reader::parse_taps(a[0], r.at("rx_response") + "[0]");
    m.rx_response[1].taps = Reader::parse_taps(a[1], r.at("rx_response") + "[1]");
  }
  if (r.has("dc_offset")) {
    const json& a = r.raw("dc_offset");
    if (!a.is_array() || a.size() != 2) Reader::fail(r.at("dc_offset"), "expected two numbers");
    m.dc_offset = {Reader::to_number(a[0], r.at("dc_offset") + "[0]"),
                   Reader::to_number(a[1], r.at("dc_offset") + "[1]")};
  }
  m.osnr_db = r.number("osnr_db", m.osnr_db);
  m.thermal_noise_a_per_sqrt_hz = r.number("thermal_noise_a_per_sqrt_hz", m.thermal_noise_a_per_sqrt_hz);
  m.responsivity_a_per_w = r.number("responsivity_a_per_w", m.responsivity_a_per_w);
  m.enob = r.number("enob", m.enob);
  if (r.has("rx_power_dbm")) m.rx_power_dbm = r.number("rx_power_dbm", 0.0);
  return m;
}

GridAxis grid_from(const Reader& r, const std::string& key, GridAxis def) {
  if (!r.has(key)) return def;
  const Reader g = r.child(key);
  return GridAxis{g.number("span", def.span), g.number("step", def.step)};
}

TrainingConfig training_from_json(const Reader& r) {
  TrainingConfig t;
  t.ffe_taps = r.integer("ffe_taps", t.ffe_taps);
  t.tx_est_taps = r.integer("tx_est_taps", t.tx_est_taps);
  t.tx_est_max_iters = r.integer("tx_est_max_iters", t.tx_est_max_iters);
  t.refinement_loops = r.integer("refinement_loops", t.refinement_loops);
  if (r.has("cd_search")) {
    const Reader c = r.child("cd_search");
    t.cd_search.center_ps_per_nm = c.number("center_ps_per_nm", t.cd_search.center_ps_per_nm);
    t.cd_search.span_ps_per_nm = c.number("span_ps_per_nm", t.cd_search.span_ps_per_nm);
    t.cd_search.step_ps_per_nm = c.number("step_ps_per_nm", t.cd_search.step_ps_per_nm);
  }
  t.phi = grid_from(r, "phi", t.phi);
  t.tau_samples = grid_from(r, "tau_samples", t.tau_samples);
  t.rho = grid_from(r, "rho", t.rho);
  t.c2 = grid_from(r, "c2", t.c2);
  t.c3 = grid_from(r, "c3", t.c3);
  t.grid_rounds = r.integer("grid_rounds", t.grid_rounds);
  t.nl_range = r.number("nl_range", t.nl_range);
  t.nl_table_points = r.integer("nl_table_points", t.nl_table_points);
  t.inverse_clamp = r.number("inverse_clamp", t.inverse_clamp);
  t.tx_est_ridge = r.number("tx_est_ridge", t.tx_est_ridge);
  t.train_ffe = r.boolean("train_ffe", t.train_ffe);
  t.estimate_tx = r.boolean("estimate_tx", t.estimate_tx);
  t.estimate_iq_nl = r.boolean("estimate_iq_nl", t.estimate_iq_nl);
  return t;
}

PrConfig pr_from_json(const Reader& r) {
  PrConfig p;
  p.max_iters = r.integer("max_iters", p.max_iters);
  p.convergence_rel_change = r.number("convergence_rel_change", p.convergence_rel_change);
  p.convergence_hold_iters = r.integer("convergence_hold_iters", p.convergence_hold_iters);
  p.phase_reset_enabled = r.boolean("phase_reset_enabled", p.phase_reset_enabled);
  p.phase_reset_threshold = r.number("phase_reset_threshold", p.phase_reset_threshold);
  p.bandwidth_cutoff_hz = r.number("bandwidth_cutoff_hz", p.bandwidth_cutoff_hz);
  const std::string s = r.string("trace_schedule", "opposite_alternation");
  if (s == "opposite_alternation") {
    p.trace_schedule = TraceSchedule::opposite_alternation;
  } else if (s == "same_alternation") {
    p.trace_schedule = TraceSchedule::same_alternation;
  } else {
    Reader::fail(r.at("trace_schedule"), "unknown schedule '" + s + "'");
  }
  p.mix_weight = r.number("mix_weight", p.mix_weight);
  p.distortion_aware = r.boolean("distortion_aware", p.distortion_aware);
  p.stop_at_convergence = r.boolean("stop_at_convergence", p.stop_at_convergence);
  p.payload_repeat = r.integer("payload_repeat", p.payload_repeat);
  p.inverse_clamp = r.number("inverse_clamp", p.inverse_clamp);
  p.nl_table_points = r.integer("nl_table_points", p.nl_table_points);
  return p;
}

template <typename F>
auto checked(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    if (msg.rfind(path + ".", 0) == 0) throw ConfigError(msg);
    throw ConfigError(path + ": " + msg);
  }
}

}  // namespace

std::string to_string(ReceiverMode m) {
  switch (m) {
    case ReceiverMode::distortion_aware: return "distortion_aware";
    case ReceiverMode::conventional: return "conventional";
    case ReceiverMode::conventional_ffe: return "conventional_ffe";
  }
  return "distortion_aware";
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::osnr: return "osnr";
    case SweepAxis::pilot_ratio: return "pilot_ratio";
    case SweepAxis::iterations: return "iterations";
    case SweepAxis::phase_reset_threshold: return "phase_reset_threshold";
    case SweepAxis::enob: return "enob";
  }
  return "osnr";
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  for (SweepAxis a : {SweepAxis::osnr, SweepAxis::pilot_ratio, SweepAxis::iterations,
                      SweepAxis::phase_reset_threshold, SweepAxis::enob}) {
    if (to_string(a) == s) return a;
  }
  throw ConfigError("sweep.axis: unknown axis '" + s + "'");
}

void ExperimentConfig::validate() const {
  checked("frame", [&] { frame.validate(); return 0; });
  checked("channel", [&] { channel.validate(); return 0; });
  checked("training", [&] { training.validate(); return 0; });
  checked("pr", [&] { pr.validate(); return 0; });
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
}

json to_json(const FrameSpec& f) {
  return json{{"training_len", f.training_len},
              {"guard_len", f.guard_len},
              {"payload_block_len", f.payload_block_len},
              {"payload_repeats", f.payload_repeats},
              {"pilot_ratio", ratio_string(f.pilot_period)},
              {"premix", dispersion_json(f.premix)},
              {"symbol_rate_baud", f.symbol_rate_baud},
              {"order", f.order},
              {"rolloff", f.rolloff},
              {"sps", f.sps},
              {"drive_rms", f.drive_rms},
              {"clip_ratio", f.clip_ratio},
              {"dac_enob", num(f.dac_enob)}};
}

json to_json(const ChannelModel& m) {
  json j{{"tx_response_i", taps_json(m.tx_response_i.taps)},
         {"tx_response_q", taps_json(m.tx_response_q.taps)},
         {"nl", {{"c2_i", m.nl.c2_i}, {"c3_i", m.nl.c3_i}, {"c2_q", m.nl.c2_q}, {"c3_q", m.nl.c3_q}, {"range", m.nl.range}}},
         {"iq", {{"rho", m.iq.rho}, {"tau_s", m.iq.tau_s}, {"phi", m.iq.phi}}},
         {"fiber", dispersion_json(m.fiber)},
         {"splitter_ratio", m.splitter_ratio},
         {"element", dispersion_json(m.element)},
         {"element_loss_db", m.element_loss_db},
         {"rx_response", json::array({taps_json(m.rx_response[0].taps), taps_json(m.rx_response[1].taps)})},
         {"dc_offset", json::array({m.dc_offset[0], m.dc_offset[1]})},
         {"osnr_db", num(m.osnr_db)},
         {"thermal_noise_a_per_sqrt_hz", m.thermal_noise_a_per_sqrt_hz},
         {"responsivity_a_per_w", m.responsivity_a_per_w},
         {"enob", num(m.enob)}};
  j["rx_power_dbm"] = m.rx_power_dbm ? json(*m.rx_power_dbm) : json(nullptr);
  return j;
}

json to_json(const TrainingConfig& t) {
  auto g = [](const GridAxis& a) { return json{{"span", a.span}, {"step", a.step}}; };
  return json{{"ffe_taps", t.ffe_taps},
              {"tx_est_taps", t.tx_est_taps},
              {"tx_est_max_iters", t.tx_est_max_iters},
              {"refinement_loops", t.refinement_loops},
              {"cd_search",
               {{"center_ps_per_nm", t.cd_search.center_ps_per_nm},
                {"span_ps_per_nm", t.cd_search.span_ps_per_nm},
                {"step_ps_per_nm", t.cd_search.step_ps_per_nm}}},
              {"phi", g(t.phi)},
              {"tau_samples", g(t.tau_samples)},
              {"rho", g(t.rho)},
              {"c2", g(t.c2)},
              {"c3", g(t.c3)},
              {"grid_rounds", t.grid_rounds},
              {"nl_range", t.nl_range},
              {"nl_table_points", t.nl_table_points},
              {"inverse_clamp", t.inverse_clamp},
              {"tx_est_ridge", t.tx_est_ridge},
              {"train_ffe", t.train_ffe},
              {"estimate_tx", t.estimate_tx},
              {"estimate_iq_nl", t.estimate_iq_nl}};
}

json to_json(const PrConfig& p) {
  return json{{"max_iters", p.max_iters},
              {"convergence_rel_change", p.convergence_rel_change},
              {"convergence_hold_iters", p.convergence_hold_iters},
              {"phase_reset_enabled", p.phase_reset_enabled},
              {"phase_reset_threshold", num(p.phase_reset_threshold)},
              {"bandwidth_cutoff_hz", p.bandwidth_cutoff_hz},
              {"trace_schedule", p.trace_schedule == TraceSchedule::opposite_alternation ? "opposite_alternation"
                                                                                         : "same_alternation"},
              {"mix_weight", p.mix_weight},
              {"distortion_aware", p.distortion_aware},
              {"stop_at_convergence", p.stop_at_convergence},
              {"payload_repeat", p.payload_repeat},
              {"inverse_clamp", p.inverse_clamp},
              {"nl_table_points", p.nl_table_points}};
}

json to_json(const ExperimentConfig& c) {
  json j{{"frame", to_json(c.frame)},
         {"channel", to_json(c.channel)},
         {"training", to_json(c.training)},
         {"pr", to_json(c.pr)},
         {"receiver", to_string(c.receiver)},
         {"seeds", c.seeds},
         {"output_dir", c.output_dir}};
  if (c.sweep) {
    json v = json::array();
    for (double x : c.sweep->values) v.push_back(num(x));
    j["sweep"] = json{{"axis", to_string(c.sweep->axis)}, {"values", v}};
  }
  return j;
}

ExperimentConfig experiment_from_json(const json& j) {
  const Reader r(j, "");
  ExperimentConfig c;
  r.require("frame");
  c.frame = frame_from_json(r.child("frame"));
  if (r.has("channel")) c.channel = channel_from_json(r.child("channel"));
  if (r.has("training")) c.training = training_from_json(r.child("training"));
  if (r.has("pr")) c.pr = pr_from_json(r.child("pr"));
  const std::string mode = r.string("receiver", "distortion_aware");
  if (mode == "distortion_aware") {
    c.receiver = ReceiverMode::distortion_aware;
  } else if (mode == "conventional") {
    c.receiver = ReceiverMode::conventional;
  } else if (mode == "conventional_ffe") {
    c.receiver = ReceiverMode::conventional_ffe;
  } else {
    Reader::fail("receiver", "unknown receiver mode '" + mode + "'");
  }
  if (r.has("sweep")) {
    const Reader s = r.child("sweep");
    s.require("axis");
    s.require("values");
    SweepSpec sw;
    sw.axis = sweep_axis_from_string(s.string("axis", ""));
    const json& v = s.raw("values");
    if (!v.is_array() || v.empty()) Reader::fail("sweep.values", "expected a non-empty array");
    for (std::size_t i = 0; i < v.size(); ++i) {
      sw.values.push_back(Reader::to_number(v[i], "sweep.values[" + std::to_string(i) + "]"));
    }
    c.sweep = sw;
  }
  if (r.has("seeds")) {
    const json& s = r.raw("seeds");
    if (!s.is_array()) Reader::fail("seeds", "expected an array of integers");
    c.seeds.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s[i].is_number_unsigned()) Reader::fail("seeds[" + std::to_string(i) + "]", "expected a non-negative integer");
      c.seeds.push_back(s[i].get<std::uint64_t>());
    }
  }
  c.output_dir = r.string("output_dir", c.output_dir);
  c.validate();
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return experiment_from_json(j);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

json to_json(const ChannelEstimate& e) {
  json branches = json::array();
  for (const auto& b : e.branches) {
    branches.push_back(json{{"total_cd_ps_per_nm", b.total_cd.ps_per_nm},
                            {"center_wavelength_nm", b.total_cd.center_wavelength_nm},
                            {"lag_samples", b.lag_samples},
                            {"cd_ambiguous", b.cd_ambiguous},
                            {"ffe_taps", b.ffe_taps},
                            {"dc_offset", b.dc_offset},
                            {"trace_scale", b.trace_scale}});
  }
  auto iq_json = [](const IqImpairment& q) { return json{{"rho", q.rho}, {"tau_s", q.tau_s}, {"phi", q.phi}}; };
  auto nl_json = [](const NonlinearCoeffs& n) {
    return json{{"c2_i", n.c2_i}, {"c3_i", n.c3_i}, {"c2_q", n.c2_q}, {"c3_q", n.c3_q}, {"range", n.range}};
  };
  json stages = json::array();
  for (const auto& s : e.stages) {
    stages.push_back(json{{"loop", s.loop}, {"stage", s.stage}, {"mae", json::array({s.mae[0], s.mae[1]})}});
  }
  json snaps = json::array();
  for (const auto& s : e.snapshots) {
    snaps.push_back(json{{"loop", s.loop},
                         {"tx_i", taps_json(s.tx_i)},
                         {"tx_q", taps_json(s.tx_q)},
                         {"iq", iq_json(s.iq)},
                         {"nl", nl_json(s.nl)}});
  }
  return json{{"branches", branches},
              {"tx_response_i", taps_json(e.tx_response_i.taps)},
              {"tx_response_q", taps_json(e.tx_response_q.taps)},
              {"iq", iq_json(e.iq)},
              {"reverse_iq", iq_json(e.reverse_iq())},
              {"nl", nl_json(e.nl)},
              {"stages", stages},
              {"snapshots", snaps},
              {"tx_est_mae", e.tx_est_mae},
              {"tx_est_iterations", e.tx_est_iterations},
              {"warnings", e.warnings}};
}

ChannelEstimate estimate_from_json(const json& j) {
  const Reader r(j, "estimate");
  ChannelEstimate e;
  r.require("branches");
  const json& bs = r.raw("branches");
  if (!bs.is_array() || bs.size() != 2) Reader::fail("estimate.branches", "expected two entries");
  for (std::size_t i = 0; i < 2; ++i) {
    const Reader b(bs[i], "estimate.branches[" + std::to_string(i) + "]");
    BranchEstimate& be = e.branches[i];
    be.total_cd.ps_per_nm = b.number("total_cd_ps_per_nm", 0.0);
    be.total_cd.center_wavelength_nm = b.number("center_wavelength_nm", kDefaultWavelengthNm);
    be.lag_samples = b.has("lag_samples") ? b.raw("lag_samples").get<long>() : 0;
    be.cd_ambiguous = b.boolean("cd_ambiguous", false);
    if (b.has("ffe_taps")) be.ffe_taps = b.raw("ffe_taps").get<RVec>();
    be.dc_offset = b.number("dc_offset", 0.0);
    be.trace_scale = b.number("trace_scale", 1.0);
  }
  e.tx_response_i.taps = r.taps("tx_response_i", e.tx_response_i.taps);
  e.tx_response_q.taps = r.taps("tx_response_q", e.tx_response_q.taps);
  if (r.has("iq")) {
    const Reader q = r.child("iq");
    e.iq = {q.number("rho", 0.0), q.number("tau_s", 0.0), q.number("phi", 0.0)};
  }
  if (r.has("nl")) {
    const Reader n = r.child("nl");
    e.nl.c2_i = n.number("c2_i", 0.0);
    e.nl.c3_i = n.number("c3_i", 0.0);
    e.nl.c2_q = n.number("c2_q", 0.0);
    e.nl.c3_q = n.number("c3_q", 0.0);
    e.nl.range = n.number("range", 1.0);
  }
  if (r.has("stages")) {
    for (const auto& s : r.raw("stages")) {
      e.stages.push_back({s.at("loop").get<int>(), s.at("stage").get<std::string>(),
                          {s.at("mae")[0].get<double>(), s.at("mae")[1].get<double>()}});
    }
  }
  if (r.has("tx_est_mae")) e.tx_est_mae = r.raw("tx_est_mae").get<std::vector<std::vector<double>>>();
  e.tx_est_iterations = r.integer("tx_est_iterations", 0);
  if (r.has("warnings")) e.warnings = r.raw("warnings").get<std::vector<std::string>>();
  return e;
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

std::string config_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("output_dir");
  j.erase("seeds");
  j.erase("sweep");
  return sha256_hex(j.dump());
}

ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, double v) {
  ExperimentConfig c = base;
  switch (axis) {
    case SweepAxis::osnr: c.channel.osnr_db = v; break;
    case SweepAxis::pilot_ratio: c.frame.set_pilot_ratio(v); break;
    case SweepAxis::iterations:
      c.pr.max_iters = static_cast<int>(std::lround(v));
      c.pr.stop_at_convergence = false;
      break;
    case SweepAxis::phase_reset_threshold:
      c.pr.phase_reset_enabled = true;
      c.pr.phase_reset_threshold = v;
      break;
    case SweepAxis::enob: c.channel.enob = v; break;
  }
  return c;
}

}  // namespace dapr
