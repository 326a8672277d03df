// Command-line front end: simulate scenarios, run estimators over logs,
// compare variants and dump adaptation diagnostics.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sideslip/config.hpp"
#include "sideslip/harness.hpp"

namespace fs = std::filesystem;
using namespace sideslip;

namespace {

RunConfig load_or_default(const std::string& path) {
  return path.empty() ? RunConfig{} : load_config(path);
}

Variant parse_variant(const std::string& s) {
  const auto v = variant_from_string(s);
  if (!v) throw ConfigError("unknown variant '" + s + "'");
  return *v;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw LogError("cannot open " + path + " for writing");
  os << text;
}

void emit_metrics(const std::vector<Metrics>& rows, const std::string& json_path) {
  std::cout << metrics_table(rows);
  nlohmann::json j = nlohmann::json::array();
  for (const Metrics& m : rows) j.push_back(metrics_to_json(m));
  if (json_path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_text(json_path, j.dump(2) + "\n");
  }
}

void write_trace_file(const std::string& path, const RunResult& r, const SensorLog& log) {
  std::ofstream os(path);
  if (!os) throw LogError("cannot open " + path + " for writing");
  write_trace(os, r, log.truth);
}

sim::ScenarioData simulate_from(const RunConfig& rc, const std::string& scenario, std::uint64_t seed,
                                double duration) {
  sim::ScenarioSpec spec;
  if (!scenario.empty()) {
    const auto name = sim::scenario_from_string(scenario);
    if (!name) throw ConfigError("unknown scenario '" + scenario + "'");
    if (rc.scenario && rc.scenario->name == *name) {
      spec = *rc.scenario;
    } else {
      spec = sim::default_scenario(*name);
      spec.noise = sim::sensor_noise_from_covariances(rc.noise_scale);
    }
  } else if (rc.scenario) {
    spec = *rc.scenario;
  } else {
    throw ConfigError("no scenario given (use --scenario or a config 'scenario' block)");
  }
  spec.seed = seed;
  spec.dt = rc.pipeline.dt;
  if (duration > 0.0) spec.duration = duration;
  return sim::generate_scenario(spec, rc.pipeline.params);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sideslip: vehicle sideslip, bank and sensor-bias estimation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("-c,--config", config_path, "JSON configuration (defaults when omitted)");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "simulate a scenario and write a sensor log");
  std::string sim_scenario, sim_out;
  std::uint64_t sim_seed = 0;
  double sim_duration = 0.0;
  sim_cmd->add_option("-s,--scenario", sim_scenario,
                      "slalom | severe_single_lane_change | steady_circle | "
                      "banked_double_lane_change | stop_n_turn");
  sim_cmd->add_option("--seed", sim_seed, "noise seed")->required();
  sim_cmd->add_option("-o,--out", sim_out, "output CSV log")->required();
  sim_cmd->add_option("--duration", sim_duration, "override duration in seconds");

  // estimate
  auto* est_cmd = app.add_subcommand("estimate", "run one estimator variant over a log");
  std::string est_log, est_variant, est_trace, est_metrics;
  est_cmd->add_option("-l,--log", est_log, "input CSV log")->required()->check(CLI::ExistingFile);
  est_cmd->add_option("-v,--variant", est_variant,
                      "algorithm1 | algorithm2 | dynamics_only | hybrid_switch");
  est_cmd->add_option("-t,--trace", est_trace, "output trace CSV");
  est_cmd->add_option("-m,--metrics", est_metrics, "output metrics JSON (stdout when omitted)");

  // compare
  auto* cmp_cmd = app.add_subcommand("compare", "run several variants over one log");
  std::string cmp_log, cmp_dir, cmp_metrics;
  std::vector<std::string> cmp_variants{"algorithm2", "dynamics_only", "hybrid_switch"};
  cmp_cmd->add_option("-l,--log", cmp_log, "input CSV log")->required()->check(CLI::ExistingFile);
  cmp_cmd->add_option("-V,--variants", cmp_variants, "variants to compare")->delimiter(',');
  cmp_cmd->add_option("-d,--trace-dir", cmp_dir, "directory for per-variant traces");
  cmp_cmd->add_option("-m,--metrics", cmp_metrics, "output metrics JSON (stdout when omitted)");

  // diagnose
  auto* diag_cmd =
      app.add_subcommand("diagnose", "run with adaptation diagnostics and write the extended trace");
  std::string diag_log, diag_scenario, diag_variant, diag_trace, diag_metrics;
  std::uint64_t diag_seed = 0;
  double diag_duration = 0.0;
  diag_cmd->add_option("-l,--log", diag_log, "input CSV log")->check(CLI::ExistingFile);
  diag_cmd->add_option("-s,--scenario", diag_scenario,
                       "simulate in-process instead of reading a log (enables truth columns)");
  diag_cmd->add_option("--seed", diag_seed, "noise seed for --scenario");
  diag_cmd->add_option("--duration", diag_duration, "override duration for --scenario");
  diag_cmd->add_option("-v,--variant", diag_variant, "algorithm1 | algorithm2");
  diag_cmd->add_option("-t,--trace", diag_trace, "output trace CSV")->required();
  diag_cmd->add_option("-m,--metrics", diag_metrics, "output metrics JSON (stdout when omitted)");

  // defaults
  auto* def_cmd = app.add_subcommand("defaults", "print the default configuration as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig rc = load_or_default(config_path);

    if (*def_cmd) {
      std::cout << config_to_json(rc).dump(2) << '\n';
      return 0;
    }

    if (*sim_cmd) {
      const sim::ScenarioData data = simulate_from(rc, sim_scenario, sim_seed, sim_duration);
      write_log_file(sim_out, to_log(data));
      std::cerr << "wrote " << data.sensors.size() << " frames of "
                << sim::to_string(data.spec.name) << " to " << sim_out << '\n';
      return 0;
    }

    if (*est_cmd) {
      if (!est_variant.empty()) rc.pipeline.variant = parse_variant(est_variant);
      const SensorLog log = read_log_file(est_log, rc.pipeline.dt);
      const RunResult r = run(rc.pipeline, log);
      if (!est_trace.empty()) write_trace_file(est_trace, r, log);
      emit_metrics({r.metrics}, est_metrics);
      return 0;
    }

    if (*cmp_cmd) {
      std::vector<Variant> vs;
      for (const auto& s : cmp_variants) vs.push_back(parse_variant(s));
      const SensorLog log = read_log_file(cmp_log, rc.pipeline.dt);
      const std::vector<RunResult> rs = compare(rc.pipeline, log, vs);
      std::vector<Metrics> rows;
      for (const RunResult& r : rs) {
        rows.push_back(r.metrics);
        if (!cmp_dir.empty()) {
          fs::create_directories(cmp_dir);
          write_trace_file((fs::path(cmp_dir) / (r.metrics.variant + ".csv")).string(), r, log);
        }
      }
      emit_metrics(rows, cmp_metrics);
      return 0;
    }

    if (*diag_cmd) {
      rc.pipeline.diagnostics = true;
      if (!diag_variant.empty()) rc.pipeline.variant = parse_variant(diag_variant);
      if (rc.pipeline.variant != Variant::Algorithm1 && rc.pipeline.variant != Variant::Algorithm2) {
        throw ConfigError("diagnose needs an adaptive variant (algorithm1 or algorithm2)");
      }
      SensorLog log;
      std::vector<Vec2> theta_true;
      if (!diag_scenario.empty()) {
        const sim::ScenarioData data = simulate_from(rc, diag_scenario, diag_seed, diag_duration);
        log = to_log(data);
        theta_true = stiffness_truth(data);
      } else if (!diag_log.empty()) {
        log = read_log_file(diag_log, rc.pipeline.dt);
      } else {
        throw ConfigError("diagnose needs --log or --scenario");
      }
      const RunResult r = run(rc.pipeline, log, theta_true);
      write_trace_file(diag_trace, r, log);
      const DiagnosticsTrace& d = *r.diagnostics;
      std::cerr << "adaptation steps " << d.steps.size() << ", substeps " << d.substeps.size()
                << ", rank-deficient skipped " << d.skipped_rank_deficient << '\n';
      if (!theta_true.empty() && !d.substeps.empty()) {
        std::cerr << "popov sum " << popov_sum(d, d.substeps.size()) << " (lower bound "
                  << popov_lower_bound(d) << ")\n";
      }
      emit_metrics({r.metrics}, diag_metrics);
      return 0;
    }
  } catch (const RunAborted& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const LogError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
