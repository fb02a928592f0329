#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "kme/metrics.hpp"
#include "kme/scenario.hpp"
#include "kme/visitation.hpp"

namespace kme {

inline constexpr const char* kToolVersion = "0.1.0";

struct MetricTraceRow {
  double t = 0.0;
  double emmd = 0.0;             // time-augmented metric / t^2
  double time_augmented = 0.0;   // (1/M) sum e_i^2
  double coverage = 0.0;
};

struct TrialRecord {
  std::string scenario_name;
  std::string planner;
  std::uint64_t seed = 0;
  TrajectoryLog log;
  RowMatrixXd applied_controls;      // T x m, control that produced each row
  std::vector<MetricTraceRow> trace;  // length T
  std::vector<double> plan_seconds;   // length T, planning only
  std::vector<Eigen::VectorXd> error_snapshots;  // only with dump_error_state
  double dt = 0.0;
  double coverage_radius = 0.0;
  double final_emmd = 0.0;
  double final_time_augmented = 0.0;
  double final_coverage = 0.0;
  double first_full_coverage_time = -1.0;
  int limit_cycle_events = 0;
  double median_plan_seconds = 0.0;
};

/// Runs one deterministic trial: plan, project, step, error update, log.
TrialRecord run_trial(const Scenario& scenario, std::uint64_t seed);
TrialRecord run_trial(const Scenario& scenario, std::uint64_t seed,
                      const DomainModel& domain);

/// Writes trace.csv, trajectory.csv, timing.csv, summary.json (and
/// error_state.csv when enabled) under dir; returns the summary.
nlohmann::json write_trial_outputs(const std::string& dir, const Scenario& scenario,
                                   const TrialRecord& record);

/// manifest.json: scenario hash, seed list, tool version, effective config.
void write_manifest(const std::string& dir, const Scenario& scenario);

/// Runs every seed of the scenario (bounded worker pool), writes
/// dir/<scenario>/<seed>/, returns per-seed summaries in seed order.
nlohmann::json run_scenario_all_seeds(const Scenario& scenario,
                                      const std::string& out_dir, int workers);

/// Receding-horizon ablation: reruns the scenario as MPC with each horizon.
nlohmann::json run_horizon_suite(const Scenario& base, const std::vector<int>& horizons,
                                 const std::string& out_dir, int workers);

/// Kernel-family ablation: reruns with each kernel for both embedding and
/// objective roles.
nlohmann::json run_kernel_suite(const Scenario& base,
                                const std::vector<KernelSpec>& kernels,
                                const std::string& out_dir, int workers);

/// Per-step wall-time scaling in one knob (T, M, or horizon) across planners.
/// Trials run sequentially; medians of per-step planning times are reported
/// together with the fitted log-log slope. The full-history baseline is
/// capped at 2000 steps.
nlohmann::json run_scaling_suite(const Scenario& base, const std::string& param,
                                 const std::vector<int>& values,
                                 const std::vector<std::string>& planners,
                                 int trials, const std::string& out_dir);

/// Coverage comparison across planners at equal budget; reports per-planner
/// coverage at the recursive planner's first full-coverage time and final
/// metric medians.
nlohmann::json run_coverage_suite(const Scenario& base,
                                  const std::vector<std::string>& planners,
                                  int memory_k, const std::string& out_dir,
                                  int workers);

/// Configures a copy of the scenario for the named planner
/// (greedy|mpc|full|short_term|subsampled|tsp|nbv).
Scenario with_planner(const Scenario& base, const std::string& planner, int memory_k);

}  // namespace kme
