// kmecov: coverage-control experiments with kernel-embedding ergodic planners.
// Subcommands: run, suite {horizon|kernels|scaling|coverage}, sample-target,
// export. Scenario schema and output layout are documented in the README.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "kme/harness.hpp"
#include "kme/metrics.hpp"
#include "kme/reference.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliError {
  int code;
  std::string message;
};

std::string default_out_dir() {
  const char* env = std::getenv("KMECOV_OUT");
  return env && *env ? env : "runs";
}

kme::Scenario load_with_overrides(const std::string& path,
                                  const std::vector<std::string>& overrides,
                                  const std::vector<std::uint64_t>& seeds,
                                  bool dump_error_state) {
  std::ifstream in(path);
  if (!in) throw CliError{1, "cannot open scenario file: " + path};
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw CliError{1, std::string("scenario parse error: ") + e.what()};
  }
  try {
    for (const auto& o : overrides) kme::apply_override(j, o);
    kme::Scenario s = kme::scenario_from_json(j);
    if (!seeds.empty()) s.seeds = seeds;
    if (dump_error_state) s.dump_error_state = true;
    return s;
  } catch (const std::invalid_argument& e) {
    throw CliError{1, e.what()};
  }
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> values;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) values.push_back(std::stoi(part));
  }
  if (values.empty()) throw CliError{1, "expected a comma-separated integer list"};
  return values;
}

std::vector<std::string> parse_string_list(const std::string& text) {
  std::vector<std::string> values;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) values.push_back(part);
  }
  return values;
}

std::vector<kme::KernelSpec> parse_kernel_list(const std::string& text) {
  // family:length_scale pairs, e.g. gaussian:0.05,laplace:0.08
  std::vector<kme::KernelSpec> kernels;
  for (const std::string& item : parse_string_list(text)) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw CliError{1, "kernel list entries look like family:length_scale"};
    }
    kme::KernelSpec spec;
    try {
      spec.family = kme::kernel_family_from_string(item.substr(0, colon));
      spec.length_scale = std::stod(item.substr(colon + 1));
      spec.validate();
    } catch (const std::exception& e) {
      throw CliError{1, std::string("kernel list: ") + e.what()};
    }
    kernels.push_back(spec);
  }
  if (kernels.empty()) throw CliError{1, "empty kernel list"};
  return kernels;
}

int run_command(const kme::Scenario& scenario, const std::string& out_dir,
                int workers) {
  const json summaries = kme::run_scenario_all_seeds(scenario, out_dir, workers);
  std::cout << summaries.dump(2) << std::endl;
  return 0;
}

int export_command(const std::string& run_dir, int points,
                   const std::string& out_file) {
  const fs::path dir(run_dir);
  std::ifstream sum_in(dir / "summary.json");
  if (!sum_in) throw CliError{1, "missing summary.json under: " + run_dir};
  json summary;
  sum_in >> summary;
  std::ifstream man_in(dir.parent_path() / "manifest.json");
  if (!man_in) {
    throw CliError{1, "missing manifest.json next to the run directory: " +
                          (dir.parent_path() / "manifest.json").string()};
  }
  json manifest;
  man_in >> manifest;
  kme::Scenario scenario;
  try {
    scenario = kme::scenario_from_json(manifest.at("effective_config"));
  } catch (const std::invalid_argument& e) {
    throw CliError{1, e.what()};
  }
  const std::uint64_t seed = summary.at("seed").get<std::uint64_t>();

  // Rebuild the deterministic trial inputs, then re-read the trajectory.
  const kme::DomainModel domain = kme::make_domain(scenario);
  const kme::TargetModel target = kme::sample_target(
      domain, scenario.target, scenario.sample_count,
      kme::mix_seed(seed, 0x7461726765ull), scenario.embedding_kernel,
      scenario.objective_kernel);

  std::ifstream traj_in(dir / "trajectory.csv");
  if (!traj_in) throw CliError{1, "missing trajectory.csv under: " + run_dir};
  std::string header;
  std::getline(traj_in, header);
  std::vector<std::string> cols;
  {
    std::stringstream ss(header);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  int w_begin = -1, w_count = 0;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i].size() >= 2 && cols[i][0] == 'w') {
      if (w_begin < 0) w_begin = static_cast<int>(i);
      ++w_count;
    }
  }
  if (w_begin < 0) throw CliError{2, "trajectory.csv has no w columns"};
  std::vector<double> times;
  std::vector<Eigen::VectorXd> ws;
  std::string line;
  while (std::getline(traj_in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    times.push_back(row.at(0));
    Eigen::VectorXd w(w_count);
    for (int d = 0; d < w_count; ++d) w[d] = row.at(w_begin + d);
    ws.push_back(w);
  }
  const int total = static_cast<int>(times.size());
  if (total == 0) throw CliError{2, "trajectory.csv is empty"};

  std::ofstream out(out_file);
  if (!out) throw CliError{2, "cannot write " + out_file};
  out << "t,emmd_oracle\n";
  const int count = std::min(points, total);
  for (int p = 1; p <= count; ++p) {
    const int prefix = std::max(1, p * total / count);
    kme::TrajectoryLog log;
    log.times.resize(prefix);
    log.domain_points.resize(prefix, w_count);
    log.states.resize(prefix, w_count);
    log.controls.resize(std::max(0, prefix - 1), w_count);
    log.controls.setZero();
    for (int i = 0; i < prefix; ++i) {
      log.times[i] = times[i];
      log.domain_points.row(i) = ws[i];
      log.states.row(i) = ws[i];
    }
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g,%.17g\n", times[prefix - 1],
                  kme::emmd_oracle(log, target));
    out << buffer;
  }
  std::cout << "wrote " << out_file << " (" << count << " rows)" << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coverage control via kernel-embedding ergodic planners"};
  app.require_subcommand(1);
  bool json_errors = false;
  app.add_flag("--json-errors", json_errors,
               "emit machine-readable JSON errors on stderr");

  std::string scenario_path, out_dir = default_out_dir();
  std::vector<std::string> overrides;
  std::vector<std::uint64_t> seeds;
  bool dump_error_state = false;
  int workers = 0;

  auto* run = app.add_subcommand("run", "run every seed of a scenario");
  run->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  run->add_option("--seed", seeds, "override scenario seeds (repeatable)");
  run->add_option("--set", overrides, "override scenario keys: dotted.key=value");
  run->add_option("--out", out_dir, "output directory (env KMECOV_OUT)");
  run->add_option("--workers", workers, "trial worker pool size (0 = auto)");
  run->add_flag("--dump-error-state", dump_error_state,
                "export per-step error state CSV");

  auto* suite = app.add_subcommand("suite", "experiment suites");
  suite->require_subcommand(1);

  std::string horizons_text = "30,60,100";
  auto* horizon_cmd = suite->add_subcommand("horizon", "planning-horizon ablation");
  horizon_cmd->add_option("--scenario", scenario_path, "base scenario")->required();
  horizon_cmd->add_option("--horizons", horizons_text, "comma-separated horizons");
  horizon_cmd->add_option("--set", overrides, "scenario overrides");
  horizon_cmd->add_option("--seed", seeds, "override scenario seeds");
  horizon_cmd->add_option("--out", out_dir, "output directory");
  horizon_cmd->add_option("--workers", workers, "worker pool size (0 = auto)");

  std::string kernels_text = "gaussian:0.03,laplace:0.03,matern32:0.03";
  auto* kernels_cmd = suite->add_subcommand("kernels", "kernel-family ablation");
  kernels_cmd->add_option("--scenario", scenario_path, "base scenario")->required();
  kernels_cmd->add_option("--kernels", kernels_text,
                          "family:length_scale list for both kernel roles");
  kernels_cmd->add_option("--set", overrides, "scenario overrides");
  kernels_cmd->add_option("--seed", seeds, "override scenario seeds");
  kernels_cmd->add_option("--out", out_dir, "output directory");
  kernels_cmd->add_option("--workers", workers, "worker pool size (0 = auto)");

  std::string param = "T", values_text = "100,1000,10000";
  std::string planners_text = "mpc,full,short_term,subsampled";
  int trials = 10;
  auto* scaling_cmd = suite->add_subcommand("scaling", "per-step wall-time scaling");
  scaling_cmd->add_option("--scenario", scenario_path, "base scenario")->required();
  scaling_cmd->add_option("--param", param, "swept knob: T, M, or horizon");
  scaling_cmd->add_option("--values", values_text, "comma-separated values");
  scaling_cmd->add_option("--planners", planners_text, "planners to compare");
  scaling_cmd->add_option("--trials", trials, "trials per cell (median reported)");
  scaling_cmd->add_option("--set", overrides, "scenario overrides");
  scaling_cmd->add_option("--out", out_dir, "output directory");

  std::string cov_planners_text = "mpc,short_term,subsampled,tsp,nbv";
  int memory_k = 30;
  auto* coverage_cmd = suite->add_subcommand("coverage", "coverage comparison");
  coverage_cmd->add_option("--scenario", scenario_path, "base scenario")->required();
  coverage_cmd->add_option("--planners", cov_planners_text,
                           "planners, reference first");
  coverage_cmd->add_option("--memory", memory_k, "K for memory-limited baselines");
  coverage_cmd->add_option("--set", overrides, "scenario overrides");
  coverage_cmd->add_option("--seed", seeds, "override scenario seeds");
  coverage_cmd->add_option("--out", out_dir, "output directory");
  coverage_cmd->add_option("--workers", workers, "worker pool size (0 = auto)");

  std::uint64_t sample_seed = 0;
  std::string sample_out = "target_samples.csv";
  auto* sample_cmd =
      app.add_subcommand("sample-target", "export the Monte-Carlo target samples");
  sample_cmd->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  sample_cmd->add_option("--seed", sample_seed, "trial seed");
  sample_cmd->add_option("--set", overrides, "scenario overrides");
  sample_cmd->add_option("--out", sample_out, "output CSV path");

  std::string run_dir, export_out = "metrics_oracle.csv";
  int export_points = 20;
  auto* export_cmd = app.add_subcommand(
      "export", "recompute oracle metrics from a finished run directory");
  export_cmd->add_option("--run", run_dir, "run directory (runs/<scenario>/<seed>)")
      ->required();
  export_cmd->add_option("--points", export_points, "number of trajectory prefixes");
  export_cmd->add_option("--out", export_out, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  const auto emit_error = [&](int code, const std::string& message) {
    if (json_errors) {
      json err;
      err["error"] = message;
      err["kind"] = code == 1 ? "validation" : "runtime";
      std::cerr << err.dump() << std::endl;
    } else {
      std::cerr << "error: " << message << std::endl;
    }
    return code;
  };

  try {
    if (run->parsed()) {
      const kme::Scenario s =
          load_with_overrides(scenario_path, overrides, seeds, dump_error_state);
      return run_command(s, out_dir, workers);
    }
    if (horizon_cmd->parsed()) {
      const kme::Scenario s =
          load_with_overrides(scenario_path, overrides, seeds, false);
      const json summary = kme::run_horizon_suite(
          s, parse_int_list(horizons_text), out_dir + "/horizon", workers);
      std::cout << summary.dump(2) << std::endl;
      return 0;
    }
    if (kernels_cmd->parsed()) {
      const kme::Scenario s =
          load_with_overrides(scenario_path, overrides, seeds, false);
      const json summary = kme::run_kernel_suite(
          s, parse_kernel_list(kernels_text), out_dir + "/kernels", workers);
      std::cout << summary.dump(2) << std::endl;
      return 0;
    }
    if (scaling_cmd->parsed()) {
      const kme::Scenario s = load_with_overrides(scenario_path, overrides, {}, false);
      const json summary = kme::run_scaling_suite(
          s, param, parse_int_list(values_text), parse_string_list(planners_text),
          trials, out_dir + "/scaling");
      std::cout << summary.dump(2) << std::endl;
      return 0;
    }
    if (coverage_cmd->parsed()) {
      const kme::Scenario s =
          load_with_overrides(scenario_path, overrides, seeds, false);
      const json summary =
          kme::run_coverage_suite(s, parse_string_list(cov_planners_text), memory_k,
                                  out_dir + "/coverage", workers);
      std::cout << summary.dump(2) << std::endl;
      return 0;
    }
    if (sample_cmd->parsed()) {
      const kme::Scenario s = load_with_overrides(scenario_path, overrides, {}, false);
      const kme::DomainModel domain = kme::make_domain(s);
      const kme::TargetModel target = kme::sample_target(
          domain, s.target, s.sample_count, kme::mix_seed(sample_seed, 0x7461726765ull),
          s.embedding_kernel, s.objective_kernel);
      std::ofstream out(sample_out);
      if (!out) throw CliError{2, "cannot write " + sample_out};
      for (int d = 0; d < target.dim(); ++d) out << (d ? ",omega" : "omega") << d;
      out << "\n";
      char buffer[32];
      for (int i = 0; i < target.count(); ++i) {
        for (int d = 0; d < target.dim(); ++d) {
          std::snprintf(buffer, sizeof(buffer), "%.17g", target.samples(i, d));
          out << (d ? "," : "") << buffer;
        }
        out << "\n";
      }
      std::cout << "wrote " << sample_out << " (" << target.count() << " samples)"
                << std::endl;
      return 0;
    }
    if (export_cmd->parsed()) {
      return export_command(run_dir, export_points, export_out);
    }
  } catch (const CliError& e) {
    return emit_error(e.code, e.message);
  } catch (const std::invalid_argument& e) {
    return emit_error(1, e.what());
  } catch (const std::exception& e) {
    return emit_error(2, e.what());
  }
  return 0;
}
