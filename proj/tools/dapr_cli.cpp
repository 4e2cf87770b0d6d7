// dapr: config-driven front end for simulation, training, reconstruction,
// sweeps and reports. One invocation owns its output directory.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dapr/config.hpp"
#include "dapr/evalkit.hpp"
#include "dapr/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dapr;

namespace {

struct Options {
  std::string config;
  std::string output;
  std::string seeds;
  int threads = 1;
  bool resume = false;
};

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ExperimentConfig load(const Options& o) {
  if (o.config.empty()) throw CliError("--config is required");
  ExperimentConfig c = load_config(o.config);
  if (!o.seeds.empty()) {
    c.seeds.clear();
    std::stringstream ss(o.seeds);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        c.seeds.push_back(std::stoull(tok));
      } catch (const std::exception&) {
        throw CliError("--seeds: '" + tok + "' is not a non-negative integer");
      }
    }
    if (c.seeds.empty()) throw CliError("--seeds: empty list");
  }
  return c;
}

fs::path output_dir(const Options& o, const ExperimentConfig& c) { return o.output.empty() ? c.output_dir : o.output; }

fs::path seed_dir(const fs::path& root, std::uint64_t seed) { return root / ("seed-" + std::to_string(seed)); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  } else if (j.is_string()) {
    out.emplace_back(prefix, j.get<std::string>());
  } else {
    out.emplace_back(prefix, j.dump());
  }
}

/// Manifest of a per-seed run directory, checked against the current config.
io::Manifest open_run(const fs::path& dir, const ExperimentConfig& c) {
  io::Manifest m = io::Manifest::load(dir);
  m.require_config(config_hash(c));
  m.verify(dir);
  return m;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Options& o) {
  const ExperimentConfig c = load(o);
  const fs::path root = output_dir(o, c);
  const QamConstellation qam(c.frame.order);
  for (auto seed : c.seeds) {
    const fs::path dir = seed_dir(root, seed);
    fs::create_directories(dir);
    const FrameLayout frame = build_frame(c.frame, qam, seed);
    const ComplexWaveform tx = build_tx_waveform(frame, c.frame, seed);
    const BranchTraces traces = run_channel(tx, c.channel, seed);

    io::Manifest m(config_hash(c), seed);
    io::write_text(dir / "config.json", to_json(c).dump(2) + "\n");
    m.add_file(dir, "config.json", "config");
    io::write_text(dir / "channel_truth.json", to_json(c.channel).dump(2) + "\n");
    m.add_file(dir, "channel_truth.json", "channel_truth");
    io::write_waveform(dir / "tx_waveform.bin", tx);
    m.add_file(dir, "tx_waveform.bin", "waveform");
    io::write_trace(dir / "trace_dispersed.bin", traces.dispersed);
    m.add_file(dir, "trace_dispersed.bin", "trace");
    io::write_trace(dir / "trace_undispersed.bin", traces.undispersed);
    m.add_file(dir, "trace_undispersed.bin", "trace");
    m.extra()["samples_per_symbol"] = c.frame.sps;
    m.extra()["sample_rate_hz"] = c.frame.sample_rate_hz();
    m.save(dir);
    std::cout << "simulate: seed " << seed << " -> " << dir.string() << "\n";
  }
  return 0;
}

std::string training_report(const ChannelEstimate& e, const ExperimentConfig& c) {
  std::ostringstream os;
  os.precision(6);
  os << "Training report\n\n";
  for (int b = 0; b < 2; ++b) {
    const auto& be = e.branches[static_cast<std::size_t>(b)];
    os << "branch " << to_string(static_cast<Branch>(b)) << ": dispersion " << be.total_cd.ps_per_nm
       << " ps/nm, lag " << be.lag_samples << " samples" << (be.cd_ambiguous ? " (ambiguous)" : "") << ", FFE "
       << be.ffe_taps.size() << " taps (centre " << be.ffe_taps[be.ffe_taps.size() / 2] << "), DC offset "
       << be.dc_offset << ", scale " << be.trace_scale << "\n";
  }
  const double ts = 1.0 / c.frame.sample_rate_hz();
  os << "\nIQ: phi " << e.iq.phi << " rad, tau " << e.iq.tau_s / ts << " samples, rho " << e.iq.rho << "\n";
  os << "nonlinearity: c2_i " << e.nl.c2_i << ", c2_q " << e.nl.c2_q << ", c3_i " << e.nl.c3_i << ", c3_q "
     << e.nl.c3_q << "\n";
  auto rail = [&](const char* name, const CVec& t) {
    const std::size_t mid = t.size() / 2;
    os << name << ": " << t.size() << " taps, centre " << t[mid].real() << (t[mid].imag() < 0 ? "" : "+")
       << t[mid].imag() << "j\n";
  };
  rail("tx response I", e.tx_response_i.taps);
  rail("tx response Q", e.tx_response_q.taps);
  os << "Algorithm iterations (best): " << e.tx_est_iterations << "\n\nstage MAE\n";
  for (const auto& s : e.stages) {
    os << "  loop " << s.loop << " " << s.stage << ": " << s.mae[0] << " / " << s.mae[1] << "\n";
  }
  if (!e.warnings.empty()) {
    os << "\nwarnings\n";
    for (const auto& w : e.warnings) os << "  " << w << "\n";
  }
  return os.str();
}

int cmd_train(const Options& o) {
  const ExperimentConfig c = load(o);
  const fs::path root = output_dir(o, c);
  const QamConstellation qam(c.frame.order);
  const TrainingConfig tcfg = receiver_training_config(c);
  for (auto seed : c.seeds) {
    const fs::path dir = seed_dir(root, seed);
    io::Manifest m = open_run(dir, c);
    BranchTraces traces;
    traces.dispersed = io::read_trace(dir / "trace_dispersed.bin");
    traces.undispersed = io::read_trace(dir / "trace_undispersed.bin");
    const FrameLayout frame = build_frame(c.frame, qam, seed);
    ChannelEstimate e;
    try {
      e = run_training(traces, c.frame, frame.training_symbols, tcfg);
    } catch (const std::exception& ex) {
      throw CliError(std::string("train: ") + ex.what());
    }
    io::write_text(dir / "estimate.json", to_json(e).dump(2) + "\n");
    m.add_file(dir, "estimate.json", "estimate");
    io::write_text(dir / "training_report.txt", training_report(e, c));
    m.add_file(dir, "training_report.txt", "report");

    std::ostringstream st;
    st << "loop,stage,mae_dispersed,mae_undispersed\n";
    for (const auto& s : e.stages) st << s.loop << "," << s.stage << "," << num(s.mae[0]) << "," << num(s.mae[1]) << "\n";
    io::write_text(dir / "training_stages.csv", st.str());
    m.add_file(dir, "training_stages.csv", "table");

    std::ostringstream tx;
    tx << "loop,rail,tap,re,im\n";
    for (const auto& s : e.snapshots) {
      for (int r = 0; r < 2; ++r) {
        const CVec& t = r == 0 ? s.tx_i : s.tx_q;
        const long mid = static_cast<long>(t.size() / 2);
        for (std::size_t k = 0; k < t.size(); ++k) {
          tx << s.loop << "," << (r == 0 ? "I" : "Q") << "," << static_cast<long>(k) - mid << "," << num(t[k].real())
             << "," << num(t[k].imag()) << "\n";
        }
      }
    }
    io::write_text(dir / "tx_response.csv", tx.str());
    m.add_file(dir, "tx_response.csv", "table");
    m.save(dir);
    std::cout << "train: seed " << seed << ", " << e.snapshots.size() << " snapshot(s)\n";
  }
  return 0;
}

int cmd_reconstruct(const Options& o) {
  const ExperimentConfig c = load(o);
  const fs::path root = output_dir(o, c);
  const QamConstellation qam(c.frame.order);
  for (auto seed : c.seeds) {
    const fs::path dir = seed_dir(root, seed);
    io::Manifest m = open_run(dir, c);
    if (!m.has("estimate.json")) throw CliError(dir.string() + ": no channel estimate, run train first");
    BranchTraces traces;
    traces.dispersed = io::read_trace(dir / "trace_dispersed.bin");
    traces.undispersed = io::read_trace(dir / "trace_undispersed.bin");
    const ChannelEstimate e = estimate_from_json(json::parse(io::read_text(dir / "estimate.json")));
    const FrameLayout frame = build_frame(c.frame, qam, seed);
    const ReconstructionResult rec =
        reconstruct(traces, e, c.frame, pilot_symbols(c.frame, seed), c.pr, &frame.payload_bits);
    const PointResult r = summarize(rec, frame, c, seed);

    io::write_text(dir / "result.json", serialize(r));
    m.add_file(dir, "result.json", "result");

    std::ostringstream cs;
    cs << "index,re,im\n";
    for (std::size_t i = 0; i < rec.recovered_symbols.size(); ++i) {
      cs << i << "," << num(rec.recovered_symbols[i].real()) << "," << num(rec.recovered_symbols[i].imag()) << "\n";
    }
    io::write_text(dir / "constellation.csv", cs.str());
    m.add_file(dir, "constellation.csv", "table");

    std::ostringstream ds;
    ds << "iteration,amp_error_a,amp_error_b,resets,ber\n";
    for (const auto& d : rec.diagnostics) {
      ds << d.iteration << "," << num(d.amp_error_a) << "," << num(d.amp_error_b) << "," << d.resets << ","
         << (d.ber ? num(*d.ber) : std::string()) << "\n";
    }
    io::write_text(dir / "diagnostics.csv", ds.str());
    m.add_file(dir, "diagnostics.csv", "table");
    m.save(dir);
    std::cout << "reconstruct: seed " << seed << ", BER " << r.pre_fec_ber << ", " << r.iterations_used
              << " iterations\n";
  }
  return 0;
}

std::string point_name(std::size_t value_index, std::uint64_t seed) {
  return "points/v" + std::to_string(value_index) + "-seed-" + std::to_string(seed) + ".json";
}

int cmd_sweep(const Options& o) {
  const ExperimentConfig c = load(o);
  if (!c.sweep) throw CliError("sweep: the config has no sweep section");
  const fs::path root = output_dir(o, c);
  fs::create_directories(root / "points");
  const std::vector<double>& values = c.sweep->values;

  io::Manifest m(config_hash(c), c.seeds.front());
  std::set<std::string> done;
  if (o.resume && fs::exists(root / io::Manifest::kFileName)) {
    m = io::Manifest::load(root);
    m.require_config(config_hash(c));
    m.verify(root);
    for (const auto& f : m.files_of_kind("point")) done.insert(f);
  } else if (fs::exists(root / io::Manifest::kFileName)) {
    throw CliError(root.string() + ": output exists; pass --resume to continue it");
  }
  m.extra()["axis"] = to_string(c.sweep->axis);

  auto index_of = [&](double v) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] == v) return i;
    }
    return values.size();
  };

  SweepOptions opt;
  opt.threads = o.threads;
  opt.skip = [&](double v, std::uint64_t s) { return done.count(point_name(index_of(v), s)) > 0; };
  int executed = 0;
  opt.on_row = [&](const SweepRow& row) {
    ++executed;
    json j;
    j["axis_value"] = row.axis_value;
    j["seed"] = row.seed;
    j["ok"] = row.ok;
    j["error"] = row.error;
    if (row.ok) j["result"] = json::parse(serialize(row.result));
    const std::string name = point_name(index_of(row.axis_value), row.seed);
    io::write_text(root / name, j.dump(2) + "\n");
    m.add_file(root, name, "point");
    m.save(root);
    std::cout << "sweep: " << to_string(c.sweep->axis) << " " << row.axis_value << " seed " << row.seed
              << (row.ok ? "" : " FAILED: " + row.error) << "\n";
  };
  run_sweep(c.sweep->axis, c, values, c.seeds, opt);

  // Assemble the table in canonical (value, seed) order from the point files.
  std::vector<std::pair<std::string, std::string>> cfg_cols;
  int failures = 0;
  std::ostringstream csv;
  bool header = false;
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    const ExperimentConfig pc = apply_axis(c, c.sweep->axis, values[vi]);
    json flat_src = to_json(pc);
    flat_src.erase("sweep");
    flat_src.erase("seeds");
    flat_src.erase("output_dir");
    cfg_cols.clear();
    flatten(flat_src, "", cfg_cols);
    for (auto seed : c.seeds) {
      const std::string name = point_name(vi, seed);
      if (!fs::exists(root / name)) continue;
      const json p = json::parse(io::read_text(root / name));
      if (!header) {
        csv << "axis,axis_value,seed,ok,error,pilot_ratio,pre_fec_ber,gmi_bits_per_symbol,evm,iterations_used,"
               "converged,code_rate,net_rate_bps,config_hash";
        for (const auto& [k, v] : cfg_cols) csv << "," << csv_field(k);
        csv << "\n";
        header = true;
      }
      const bool ok = p.at("ok").get<bool>();
      failures += !ok;
      csv << to_string(c.sweep->axis) << "," << num(values[vi]) << "," << seed << "," << (ok ? 1 : 0) << ","
          << csv_field(p.at("error").get<std::string>()) << "," << num(pc.frame.pilot_ratio());
      if (ok) {
        const json& r = p.at("result");
        csv << "," << num(r.at("pre_fec_ber").get<double>()) << "," << num(r.at("gmi_bits_per_symbol").get<double>())
            << "," << num(r.at("evm").get<double>()) << "," << r.at("iterations_used").get<int>() << ","
            << (r.at("converged").get<bool>() ? 1 : 0) << "," << num(r.at("code_rate").get<double>()) << ","
            << num(r.at("net_rate_bps").get<double>()) << "," << r.at("config_hash").get<std::string>();
      } else {
        csv << ",,,,,,,," << config_hash(pc);
      }
      for (const auto& [k, v] : cfg_cols) csv << "," << csv_field(v);
      csv << "\n";
    }
  }
  io::write_text(root / "sweep.csv", csv.str());
  m.add_file(root, "sweep.csv", "table");
  m.extra()["executed_last_run"] = executed;
  m.save(root);
  std::cout << "sweep: " << executed << " point(s) executed, " << failures << " failure(s)\n";
  return failures == 0 ? 0 : 2;
}

int cmd_report(const Options& o) {
  const ExperimentConfig c = load(o);
  const fs::path root = output_dir(o, c);
  std::ostringstream os;
  if (c.sweep && fs::exists(root / "sweep.csv")) {
    const io::Manifest m = io::Manifest::load(root);
    m.require_config(config_hash(c));
    m.verify(root);
    std::map<double, std::vector<PointResult>> by_value;
    std::map<double, int> failures;
    for (const auto& f : m.files_of_kind("point")) {
      const json p = json::parse(io::read_text(root / f));
      const double v = p.at("axis_value").get<double>();
      if (!p.at("ok").get<bool>()) {
        ++failures[v];
        continue;
      }
      const json& r = p.at("result");
      PointResult pr;
      pr.pre_fec_ber = r.at("pre_fec_ber").get<double>();
      pr.gmi = r.at("gmi_bits_per_symbol").get<double>();
      pr.iterations_used = r.at("iterations_used").get<int>();
      by_value[v].push_back(pr);
    }
    os << "axis,value,seeds,failures,mean_pre_fec_ber,mean_gmi,mean_iterations,code_rate,net_rate_gbps\n";
    for (double v : c.sweep->values) {
      const auto& rows = by_value[v];
      double ber = 0, gmi = 0, it = 0;
      for (const auto& r : rows) {
        ber += r.pre_fec_ber;
        gmi += r.gmi;
        it += r.iterations_used;
      }
      const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
      const ExperimentConfig pc = apply_axis(c, c.sweep->axis, v);
      const NetRate nr =
          estimate_net_rate(ber / n, pc.frame.pilot_ratio(), pc.frame.symbol_rate_baud, pc.frame.order);
      os << to_string(c.sweep->axis) << "," << num(v) << "," << rows.size() << "," << failures[v] << ","
         << num(ber / n) << "," << num(gmi / n) << "," << num(it / n) << "," << num(nr.code_rate) << ","
         << num(nr.bits_per_second / 1e9) << "\n";
    }
    os << "# code rates follow the pre-FEC BER admissibility model, not decoder runs\n";
    io::write_text(root / "report.csv", os.str());
  } else {
    os << "seed,pre_fec_ber,gmi_bits_per_symbol,evm,iterations_used,converged,net_rate_gbps\n";
    for (auto seed : c.seeds) {
      const fs::path dir = seed_dir(root, seed);
      const io::Manifest m = open_run(dir, c);
      if (!m.has("result.json")) throw CliError(dir.string() + ": no result, run reconstruct first");
      const json r = json::parse(io::read_text(dir / "result.json"));
      os << seed << "," << num(r.at("pre_fec_ber").get<double>()) << ","
         << num(r.at("gmi_bits_per_symbol").get<double>()) << "," << num(r.at("evm").get<double>()) << ","
         << r.at("iterations_used").get<int>() << "," << (r.at("converged").get<bool>() ? 1 : 0) << ","
         << num(r.at("net_rate_bps").get<double>() / 1e9) << "\n";
    }
    io::write_text(root / "report.csv", os.str());
  }
  std::cout << os.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-branch intensity-only phase-retrieval receiver: simulation and evaluation"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON, comments allowed)")->required();
    sub->add_option("--output", o.output, "output directory (default: output_dir from the config)");
    sub->add_option("--seeds", o.seeds, "comma-separated seed list overriding the config");
  };
  auto* sim = app.add_subcommand("simulate", "write the Tx waveform, ground truth and both intensity traces");
  auto* train = app.add_subcommand("train", "estimate the channel from simulated traces");
  auto* rec = app.add_subcommand("reconstruct", "run phase retrieval with the trained estimate");
  auto* sweep = app.add_subcommand("sweep", "run the config's sweep and write sweep.csv");
  auto* report = app.add_subcommand("report", "summarize results as CSV");
  for (auto* s : {sim, train, rec, sweep, report}) add_common(s);
  sweep->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  sweep->add_flag("--resume", o.resume, "skip points already recorded in the manifest");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return cmd_simulate(o);
    if (*train) return cmd_train(o);
    if (*rec) return cmd_reconstruct(o);
    if (*sweep) return cmd_sweep(o);
    if (*report) return cmd_report(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
