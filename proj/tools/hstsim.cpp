// Command-line front end: validate configurations, print presets, run
// scenarios and write time series, summaries and a batch index.

#include "cruise/config.hpp"
#include "cruise/io.hpp"
#include "cruise/simulator.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using cruise::json;

namespace {

enum Exit : int { kPass = 0, kVerdictFail = 1, kConfigError = 2, kRuntimeFault = 3 };

struct Source {
  std::string label;
  cruise::ScenarioConfig config;
};

struct Overrides {
  std::optional<double> step;
  std::optional<double> duration;
  std::optional<std::size_t> decimate;
  std::optional<std::string> representation;
  bool no_noise = false;
  bool abort_on_violation = false;
};

void report_error(const std::string& kind, const std::string& message,
                  const std::vector<cruise::Violation>& violations = {}) {
  json j{{"error", kind}, {"message", message}};
  if (!violations.empty()) {
    json list = json::array();
    for (const auto& v : violations)
      list.push_back({{"name", v.name}, {"value", v.value}, {"bound", v.bound}, {"context", v.context}});
    j["violations"] = list;
  }
  std::cerr << j.dump(2) << '\n';
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cruise::ConfigError("cannot open config '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<Source> gather(const std::vector<std::string>& configs,
                           const std::vector<std::string>& presets) {
  std::vector<Source> out;
  for (const auto& p : configs) out.push_back({fs::path(p).stem().string(), cruise::parse_config(read_file(p))});
  for (const auto& n : presets) out.push_back({n, cruise::preset(n)});
  if (out.empty()) throw cruise::ConfigError("give --config PATH or --preset NAME");
  return out;
}

void apply(const Overrides& o, cruise::ScenarioConfig& c) {
  if (o.representation) c.representation = cruise::representation_from_string(*o.representation);
  if (o.step) c.step_s = *o.step;
  if (o.duration) c.duration_s = *o.duration;
  if (o.decimate) c.decimate = *o.decimate;
  if (o.no_noise) c.noise.enabled = false;
  if (o.abort_on_violation) c.abort_on_violation = true;
}

int validate_command(const std::vector<std::string>& configs, const std::vector<std::string>& presets) {
  try {
    bool ok = true;
    for (const auto& s : gather(configs, presets)) {
      const auto violations = cruise::check_config(s.config);
      if (violations.empty()) {
        std::cout << s.label << ": ok\n";
        continue;
      }
      ok = false;
      report_error("validation", s.label + ": configuration invalid", violations);
    }
    return ok ? kPass : kConfigError;
  } catch (const cruise::ConfigError& e) {
    report_error("config", e.what());
    return kConfigError;
  }
}

struct RunOutcome {
  int code = kPass;
  json entry;
};

RunOutcome run_one(const Source& src, const fs::path& dir, bool verdict) {
  RunOutcome out;
  const cruise::ScenarioConfig& cfg = src.config;
  fs::create_directories(dir);
  {
    std::ofstream(dir / "config.json") << cruise::to_json(cfg).dump(2) << '\n';
  }
  const cruise::RecordLayout layout{cfg.consist.topology.carriages_per_train};
  std::ofstream csv(dir / "timeseries.csv");
  cruise::CsvWriter writer(csv, layout);
  std::optional<std::ofstream> plant_csv;
  std::optional<cruise::CsvWriter> plant_writer;
  cruise::RunOptions opts;
  opts.keep_record = false;
  opts.sink = [&writer](std::span<const double> row) { writer.write(row); };
  if (cfg.representation == cruise::Representation::both) {
    plant_csv.emplace(dir / "timeseries_plant.csv");
    plant_writer.emplace(*plant_csv, layout);
    opts.plant_sink = [&plant_writer](std::span<const double> row) { plant_writer->write(row); };
  }

  out.entry = {{"name", src.label},
               {"seed", cfg.noise.seed},
               {"dir", dir.string()},
               {"timeseries", (dir / "timeseries.csv").string()},
               {"summary", (dir / "summary.json").string()}};
  try {
    auto result = cruise::run_scenario(cfg, opts);
    result.summary.config_hash = cruise::config_hash(cfg);
    std::ofstream(dir / "summary.json") << cruise::to_json(result.summary).dump(2) << '\n';
    const bool pass = result.summary.verdicts.all();
    out.entry["pass"] = pass;
    out.code = (pass || !verdict) ? kPass : kVerdictFail;
    std::cout << src.label << " seed " << cfg.noise.seed << ": R1 "
              << (result.summary.verdicts.r1 ? "pass" : "FAIL") << ", R2 "
              << (result.summary.verdicts.r2 ? "pass" : "FAIL") << ", R3 "
              << (result.summary.verdicts.r3 ? "pass" : "FAIL") << " -> " << dir.string() << '\n';
  } catch (const cruise::ConfigError& e) {
    report_error("validation", e.what(),
                 dynamic_cast<const cruise::ValidationError*>(&e)
                     ? dynamic_cast<const cruise::ValidationError&>(e).violations()
                     : std::vector<cruise::Violation>{});
    out.code = kConfigError;
  } catch (const cruise::PlacementError& e) {
    report_error("observer_design", e.what());
    out.code = kConfigError;
  } catch (const cruise::ConstraintAbort& e) {
    report_error("constraint_violation", e.what());
    out.code = kVerdictFail;
  } catch (const std::exception& e) {
    report_error("runtime", e.what());
    out.code = kRuntimeFault;
  }
  out.entry["exit_code"] = out.code;
  return out;
}

int run_command(const std::vector<std::string>& configs, const std::vector<std::string>& presets,
                const std::vector<std::uint64_t>& seeds, const Overrides& overrides,
                const std::string& out_dir, bool verdict) {
  std::vector<Source> sources;
  try {
    sources = gather(configs, presets);
    for (auto& s : sources) {
      apply(overrides, s.config);
      cruise::validate_config(s.config);
    }
  } catch (const cruise::ValidationError& e) {
    report_error("validation", e.what(), e.violations());
    return kConfigError;
  } catch (const cruise::ConfigError& e) {
    report_error("config", e.what());
    return kConfigError;
  }

  std::vector<Source> runs;
  for (const auto& s : sources) {
    if (seeds.empty()) {
      runs.push_back(s);
      continue;
    }
    for (auto seed : seeds) {
      Source r = s;
      r.config.noise.seed = seed;
      runs.push_back(std::move(r));
    }
  }

  json index = json::array();
  int worst = kPass;
  for (const auto& r : runs) {
    const std::string id = r.label + "-seed" + std::to_string(r.config.noise.seed);
    RunOutcome o = run_one(r, fs::path(out_dir) / id, verdict);
    index.push_back(o.entry);
    worst = std::max(worst, o.code);
  }
  fs::create_directories(out_dir);
  std::ofstream(fs::path(out_dir) / "index.json") << json{{"runs", index}}.dump(2) << '\n';
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-train cruise control simulator"};
  app.require_subcommand(1);

  std::vector<std::string> configs, presets;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "out";
  Overrides ov;
  double step = 0.0, duration = 0.0;
  std::size_t decimate = 1;
  std::string representation;
  bool no_verdict = false;

  auto* run = app.add_subcommand("run", "run scenarios and write outputs");
  run->add_option("--config", configs, "scenario file (JSON)")->check(CLI::ExistingFile);
  run->add_option("--preset", presets, "built-in scenario name");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seeds, "disturbance seed (repeat for a seed batch)");
  auto* step_opt = run->add_option("--step", step, "integration step, s")->check(CLI::PositiveNumber);
  auto* dur_opt = run->add_option("--duration", duration, "horizon, s")->check(CLI::PositiveNumber);
  auto* dec_opt = run->add_option("--decimate", decimate, "record every N-th step")->check(CLI::PositiveNumber);
  auto* rep_opt = run->add_option("--representation", representation, "composite, plant or both")
                      ->check(CLI::IsMember({"composite", "plant", "both"}));
  run->add_flag("--no-noise", ov.no_noise, "disable the Gaussian disturbance");
  run->add_flag("--abort-on-violation", ov.abort_on_violation, "stop at the first hard-bound violation");
  run->add_flag("--no-verdict", no_verdict, "exit 0 regardless of verdicts");

  auto* val = app.add_subcommand("validate", "check configurations without running");
  val->add_option("--config", configs, "scenario file (JSON)")->check(CLI::ExistingFile);
  val->add_option("--preset", presets, "built-in scenario name");

  std::string preset_name;
  auto* pre = app.add_subcommand("preset", "print a built-in scenario as JSON");
  pre->add_option("name", preset_name, "preset name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kConfigError;
  }

  if (*step_opt) ov.step = step;
  if (*dur_opt) ov.duration = duration;
  if (*dec_opt) ov.decimate = decimate;
  if (*rep_opt) ov.representation = representation;

  if (*val) return validate_command(configs, presets);
  if (*pre) {
    try {
      std::cout << cruise::to_json(cruise::preset(preset_name)).dump(2) << '\n';
      return kPass;
    } catch (const cruise::ConfigError& e) {
      report_error("config", e.what());
      return kConfigError;
    }
  }
  return run_command(configs, presets, seeds, ov, out_dir, !no_verdict);
}
