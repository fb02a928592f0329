#include "kme/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <thread>

#include "kme/baselines.hpp"
#include "kme/controller.hpp"
#include "kme/rng.hpp"

namespace kme {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kTargetStream = 0x7461726765ull;
constexpr std::uint64_t kStartStream = 0x7374617274ull;
constexpr std::uint64_t kSubsampleStream = 0x737562ull;

std::string fmt(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <class Fn>
void pooled(int count, int workers, Fn&& fn) {
  if (workers <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int n = std::min(workers, count);
  pool.reserve(n);
  for (int w = 0; w < n; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

int default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 1 ? static_cast<int>(hw) : 1;
}

}  // namespace

TrialRecord run_trial(const Scenario& scenario, std::uint64_t seed) {
  const DomainModel domain = make_domain(scenario);
  return run_trial(scenario, seed, domain);
}

TrialRecord run_trial(const Scenario& scenario, std::uint64_t seed,
                      const DomainModel& domain) {
  const SystemModel& model = scenario.system;
  model.validate();
  const int n = model.space_dim;
  const int sd = model.state_dim();
  const int md = model.control_dim();
  const int T = scenario.steps;

  TrialRecord rec;
  rec.scenario_name = scenario.name;
  rec.planner = scenario.planner_label();
  rec.seed = seed;
  rec.dt = model.dt;

  TargetModel target =
      sample_target(domain, scenario.target, scenario.sample_count,
                    mix_seed(seed, kTargetStream), scenario.embedding_kernel,
                    scenario.objective_kernel);
  const int m = target.count();

  const double radius = scenario.coverage_radius > 0
                            ? scenario.coverage_radius
                            : 2.0 * mean_nn_spacing(target.samples);
  rec.coverage_radius = radius;
  const double nbv_radius = scenario.nbv_radius > 0 ? scenario.nbv_radius : radius;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(sd);
  if (scenario.start.size() > 0) {
    x.head(n) = scenario.start;
  } else {
    x.head(n) =
        draw_uniform_points(domain, 1, mix_seed(seed, kStartStream)).row(0);
  }

  ErrorState error = error_init(target, model.dt);

  PlannerConfig cfg;
  cfg.mode = PlannerConfig::Mode::mpc;
  cfg.mpc = scenario.solver;
  cfg.control_weight = scenario.control_weight;

  MpcWorkspace workspace;
  Rng subsample_rng(mix_seed(seed, kSubsampleStream));
  std::unique_ptr<WaypointTracker> tracker;
  if (scenario.planner == Scenario::PlannerKind::tsp) {
    const std::vector<int> order = tsp_tour(target, x.head(n));
    RowMatrixXd waypoints(order.size(), n);
    for (std::size_t i = 0; i < order.size(); ++i) {
      waypoints.row(i) = target.samples.row(order[i]);
    }
    tracker = std::make_unique<WaypointTracker>(std::move(waypoints), 1e-9);
  }

  RowMatrixXd states(T, sd), points(T, n);
  rec.applied_controls.resize(T, md);
  rec.trace.reserve(T);
  rec.plan_seconds.reserve(T);

  std::vector<char> covered(m, 0);
  int covered_count = 0;
  const double r2 = radius * radius;
  const int cycle_window =
      scenario.planner == Scenario::PlannerKind::short_term ? 4 * scenario.memory.memory
                                                            : 0;

  for (int step_i = 0; step_i < T; ++step_i) {
    Eigen::VectorXd u;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      switch (scenario.planner) {
        case Scenario::PlannerKind::greedy:
          u = greedy_control(x, error, model, domain, target);
          break;
        case Scenario::PlannerKind::mpc:
          u = mpc_plan(x, error, model, domain, target, cfg, &workspace).row(0);
          break;
        case Scenario::PlannerKind::full:
        case Scenario::PlannerKind::short_term:
        case Scenario::PlannerKind::subsampled:
          u = memory_emmd_plan(x, points.topRows(step_i), scenario.memory, model,
                               domain, target, cfg, subsample_rng, &workspace)
                  .row(0);
          break;
        case Scenario::PlannerKind::tsp:
          u = tracker->next_control(x, model);
          break;
        case Scenario::PlannerKind::nbv:
          u = nbv_plan_step(x, covered, target, model, domain, nbv_radius);
          break;
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("step " + std::to_string(step_i) + " (" +
                               rec.planner + "): " + e.what());
    }
    const auto t1 = std::chrono::steady_clock::now();
    rec.plan_seconds.push_back(
        std::chrono::duration<double>(t1 - t0).count());

    u = project_control(u, model.u_max);
    x = step(model, domain, x, u);
    const Eigen::VectorXd w = sigma_map(model, domain, x);
    error_step(error, target, w);

    states.row(step_i) = x;
    points.row(step_i) = w;
    rec.applied_controls.row(step_i) = u;

    const double* wp = w.data();
    for (int i = 0; i < m; ++i) {
      if (!covered[i] &&
          squared_distance(wp, target.samples.data() + i * target.dim(),
                           target.dim()) <= r2) {
        covered[i] = 1;
        ++covered_count;
      }
    }
    if (covered_count == m && rec.first_full_coverage_time < 0) {
      rec.first_full_coverage_time = error.t;
    }

    MetricTraceRow row;
    row.t = error.t;
    row.time_augmented = error_metric(error, target);
    row.emmd = row.time_augmented / (error.t * error.t);
    row.coverage = static_cast<double>(covered_count) / m;
    rec.trace.push_back(row);

    if (cycle_window > 0) {
      for (int p = 2; p <= cycle_window && p <= step_i; ++p) {
        if ((states.row(step_i) - states.row(step_i - p)).norm() <= 1e-3) {
          ++rec.limit_cycle_events;
          break;
        }
      }
    }
    if (scenario.dump_error_state) rec.error_snapshots.push_back(error.e);
  }

  rec.log.times.resize(T);
  for (int i = 0; i < T; ++i) rec.log.times[i] = (i + 1) * model.dt;
  rec.log.states = std::move(states);
  rec.log.domain_points = std::move(points);
  rec.log.controls.resize(std::max(0, T - 1), md);
  for (int i = 0; i + 1 < T; ++i) {
    rec.log.controls.row(i) = rec.applied_controls.row(i + 1);
  }

  rec.final_time_augmented = rec.trace.back().time_augmented;
  rec.final_emmd = rec.trace.back().emmd;
  rec.final_coverage = rec.trace.back().coverage;
  rec.median_plan_seconds = median_of(rec.plan_seconds);
  return rec;
}

json write_trial_outputs(const std::string& dir, const Scenario& scenario,
                         const TrialRecord& rec) {
  fs::create_directories(dir);
  const int T = static_cast<int>(rec.trace.size());
  {
    std::ofstream out(dir + "/trace.csv");
    out << "t,emmd,time_augmented_metric,coverage_fraction\n";
    for (const auto& row : rec.trace) {
      out << fmt(row.t) << ',' << fmt(row.emmd) << ',' << fmt(row.time_augmented)
          << ',' << fmt(row.coverage) << '\n';
    }
  }
  {
    std::ofstream out(dir + "/trajectory.csv");
    out << "t";
    for (int d = 0; d < rec.log.states.cols(); ++d) out << ",x" << d;
    for (int d = 0; d < rec.log.domain_points.cols(); ++d) out << ",w" << d;
    for (int d = 0; d < rec.applied_controls.cols(); ++d) out << ",u" << d;
    out << '\n';
    for (int i = 0; i < T; ++i) {
      out << fmt(rec.log.times[i]);
      for (int d = 0; d < rec.log.states.cols(); ++d) {
        out << ',' << fmt(rec.log.states(i, d));
      }
      for (int d = 0; d < rec.log.domain_points.cols(); ++d) {
        out << ',' << fmt(rec.log.domain_points(i, d));
      }
      for (int d = 0; d < rec.applied_controls.cols(); ++d) {
        out << ',' << fmt(rec.applied_controls(i, d));
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(dir + "/timing.csv");
    out << "step,plan_seconds\n";
    for (int i = 0; i < T; ++i) {
      out << (i + 1) << ',' << fmt(rec.plan_seconds[i]) << '\n';
    }
  }
  if (!rec.error_snapshots.empty()) {
    std::ofstream out(dir + "/error_state.csv");
    out << "t";
    for (int i = 0; i < rec.error_snapshots.front().size(); ++i) {
      out << ",e" << (i + 1);
    }
    out << '\n';
    for (int s = 0; s < T; ++s) {
      out << fmt(rec.trace[s].t);
      const Eigen::VectorXd& e = rec.error_snapshots[s];
      for (int i = 0; i < e.size(); ++i) out << ',' << fmt(e[i]);
      out << '\n';
    }
  }
  json summary;
  summary["scenario"] = rec.scenario_name;
  summary["planner"] = rec.planner;
  summary["seed"] = rec.seed;
  summary["steps"] = T;
  summary["dt"] = rec.dt;
  summary["samples"] = scenario.sample_count;
  summary["coverage_radius"] = rec.coverage_radius;
  summary["final_emmd"] = rec.final_emmd;
  summary["final_time_augmented_metric"] = rec.final_time_augmented;
  summary["final_coverage"] = rec.final_coverage;
  summary["first_full_coverage_time"] = rec.first_full_coverage_time;
  summary["limit_cycle_events"] = rec.limit_cycle_events;
  summary["median_plan_seconds"] = rec.median_plan_seconds;
  std::ofstream out(dir + "/summary.json");
  out << summary.dump(2) << '\n';
  return summary;
}

void write_manifest(const std::string& dir, const Scenario& scenario) {
  fs::create_directories(dir);
  const json effective = scenario_to_json(scenario);
  json manifest;
  manifest["scenario_hash"] = scenario_hash(effective);
  manifest["tool_version"] = kToolVersion;
  manifest["seeds"] = scenario.seeds;
  manifest["effective_config"] = effective;
  std::ofstream out(dir + "/manifest.json");
  out << manifest.dump(2) << '\n';
}

json run_scenario_all_seeds(const Scenario& scenario, const std::string& out_dir,
                            int workers) {
  const DomainModel domain = make_domain(scenario);
  const int count = static_cast<int>(scenario.seeds.size());
  std::vector<json> summaries(count);
  if (workers <= 0) workers = default_workers();
  pooled(count, workers, [&](int i) {
    const std::uint64_t seed = scenario.seeds[i];
    const TrialRecord rec = run_trial(scenario, seed, domain);
    const std::string dir =
        out_dir + "/" + scenario.name + "/" + std::to_string(seed);
    summaries[i] = write_trial_outputs(dir, scenario, rec);
  });
  write_manifest(out_dir + "/" + scenario.name, scenario);
  json all = json::array();
  for (auto& s : summaries) all.push_back(std::move(s));
  return all;
}

Scenario with_planner(const Scenario& base, const std::string& planner,
                      int memory_k) {
  Scenario s = base;
  s.name = base.name + "_" + planner;
  if (planner == "greedy") {
    s.planner = Scenario::PlannerKind::greedy;
  } else if (planner == "mpc") {
    s.planner = Scenario::PlannerKind::mpc;
  } else if (planner == "full") {
    s.planner = Scenario::PlannerKind::full;
    s.memory.kind = MemoryPolicy::Kind::full;
  } else if (planner == "short_term") {
    s.planner = Scenario::PlannerKind::short_term;
    s.memory.kind = MemoryPolicy::Kind::short_term;
    s.memory.memory = memory_k;
  } else if (planner == "subsampled") {
    s.planner = Scenario::PlannerKind::subsampled;
    s.memory.kind = MemoryPolicy::Kind::subsampled;
    s.memory.memory = memory_k;
    s.memory.reseed_each_step = true;
  } else if (planner == "tsp") {
    s.planner = Scenario::PlannerKind::tsp;
  } else if (planner == "nbv") {
    s.planner = Scenario::PlannerKind::nbv;
  } else {
    throw std::invalid_argument("unknown planner '" + planner + "'");
  }
  return s;
}

json run_horizon_suite(const Scenario& base, const std::vector<int>& horizons,
                       const std::string& out_dir, int workers) {
  json summary;
  summary["suite"] = "horizon";
  summary["horizons"] = horizons;
  json table = json::array();
  for (const int h : horizons) {
    Scenario s = with_planner(base, "mpc", base.memory.memory);
    s.name = base.name + "_h" + std::to_string(h);
    s.solver.horizon = h;
    const json trials = run_scenario_all_seeds(s, out_dir, workers);
    std::vector<double> finals;
    for (const auto& t : trials) finals.push_back(t.at("final_emmd").get<double>());
    double mean = 0.0;
    for (double v : finals) mean += v;
    mean /= finals.size();
    json row;
    row["horizon"] = h;
    row["mean_final_emmd"] = mean;
    row["median_final_emmd"] = median_of(finals);
    row["per_seed_final_emmd"] = finals;
    table.push_back(row);
  }
  summary["results"] = table;
  fs::create_directories(out_dir);
  std::ofstream out(out_dir + "/summary.json");
  out << summary.dump(2) << '\n';
  return summary;
}

json run_kernel_suite(const Scenario& base, const std::vector<KernelSpec>& kernels,
                      const std::string& out_dir, int workers) {
  json summary;
  summary["suite"] = "kernels";
  json table = json::array();
  for (const KernelSpec& k : kernels) {
    Scenario s = base;
    s.name = base.name + "_" + to_string(k.family);
    s.embedding_kernel = k;
    s.objective_kernel = k;
    const json trials = run_scenario_all_seeds(s, out_dir, workers);
    std::vector<double> coverage, emmd;
    for (const auto& t : trials) {
      coverage.push_back(t.at("final_coverage").get<double>());
      emmd.push_back(t.at("final_emmd").get<double>());
    }
    json row;
    row["family"] = to_string(k.family);
    row["length_scale"] = k.length_scale;
    row["median_final_coverage"] = median_of(coverage);
    row["median_final_emmd"] = median_of(emmd);
    row["per_seed_final_coverage"] = coverage;
    table.push_back(row);
  }
  summary["results"] = table;
  fs::create_directories(out_dir);
  std::ofstream out(out_dir + "/summary.json");
  out << summary.dump(2) << '\n';
  return summary;
}

json run_scaling_suite(const Scenario& base, const std::string& param,
                       const std::vector<int>& values,
                       const std::vector<std::string>& planners, int trials,
                       const std::string& out_dir) {
  if (param != "T" && param != "M" && param != "horizon") {
    throw std::invalid_argument("scaling param must be T, M, or horizon");
  }
  json summary;
  summary["suite"] = "scaling";
  summary["param"] = param;
  summary["values"] = values;
  summary["trials"] = trials;
  json table = json::array();
  const DomainModel domain = make_domain(base);
  for (const std::string& planner : planners) {
    json row;
    row["planner"] = planner;
    std::vector<double> medians;
    std::vector<int> used_values;
    for (const int v : values) {
      if (planner == "full" && param == "T" && v > 2000) continue;  // capped
      Scenario s = with_planner(base, planner, base.memory.memory);
      s.name += "_" + param + std::to_string(v);
      if (param == "T") {
        s.steps = v;
      } else if (param == "M") {
        s.sample_count = v;
      } else {
        s.solver.horizon = v;
      }
      std::vector<double> per_trial;
      for (int r = 0; r < trials; ++r) {
        const TrialRecord rec = run_trial(s, base.seeds[r % base.seeds.size()] + r,
                                          domain);
        per_trial.push_back(rec.median_plan_seconds);
      }
      medians.push_back(median_of(per_trial));
      used_values.push_back(v);
    }
    // log-log least-squares slope
    double slope = 0.0;
    if (medians.size() >= 2) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      const int n = static_cast<int>(medians.size());
      for (int i = 0; i < n; ++i) {
        const double lx = std::log(static_cast<double>(used_values[i]));
        const double ly = std::log(std::max(medians[i], 1e-12));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
      }
      slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    row["values"] = used_values;
    row["median_step_seconds"] = medians;
    row["loglog_slope"] = slope;
    table.push_back(row);
  }
  summary["results"] = table;
  fs::create_directories(out_dir);
  {
    std::ofstream csv(out_dir + "/scaling.csv");
    csv << "planner," << param << ",median_step_seconds\n";
    for (const auto& row : table) {
      const auto& vals = row.at("values");
      const auto& meds = row.at("median_step_seconds");
      for (std::size_t i = 0; i < vals.size(); ++i) {
        csv << row.at("planner").get<std::string>() << ',' << vals[i].get<int>()
            << ',' << fmt(meds[i].get<double>()) << '\n';
      }
    }
  }
  std::ofstream out(out_dir + "/summary.json");
  out << summary.dump(2) << '\n';
  return summary;
}

json run_coverage_suite(const Scenario& base,
                        const std::vector<std::string>& planners, int memory_k,
                        const std::string& out_dir, int workers) {
  json summary;
  summary["suite"] = "coverage";
  summary["memory_k"] = memory_k;
  const DomainModel domain = make_domain(base);
  if (workers <= 0) workers = default_workers();

  const int seed_count = static_cast<int>(base.seeds.size());
  // records[planner][seed]
  std::vector<std::vector<TrialRecord>> records(planners.size());
  for (auto& v : records) v.resize(seed_count);

  std::vector<std::pair<int, int>> jobs;
  for (int p = 0; p < static_cast<int>(planners.size()); ++p) {
    for (int sidx = 0; sidx < seed_count; ++sidx) jobs.emplace_back(p, sidx);
  }
  std::vector<Scenario> scenarios;
  scenarios.reserve(planners.size());
  for (const auto& p : planners) scenarios.push_back(with_planner(base, p, memory_k));

  pooled(static_cast<int>(jobs.size()), workers, [&](int j) {
    const auto [p, sidx] = jobs[j];
    records[p][sidx] = run_trial(scenarios[p], base.seeds[sidx], domain);
  });
  for (int p = 0; p < static_cast<int>(planners.size()); ++p) {
    for (int sidx = 0; sidx < seed_count; ++sidx) {
      const std::string dir = out_dir + "/" + scenarios[p].name + "/" +
                              std::to_string(base.seeds[sidx]);
      write_trial_outputs(dir, scenarios[p], records[p][sidx]);
    }
    write_manifest(out_dir + "/" + scenarios[p].name, scenarios[p]);
  }

  // Reference planner = first entry; evaluate everyone at the step where it
  // first reaches full coverage.
  json table = json::array();
  std::vector<int> ref_steps(seed_count, -1);
  for (int sidx = 0; sidx < seed_count; ++sidx) {
    const TrialRecord& ref = records[0][sidx];
    for (int i = 0; i < static_cast<int>(ref.trace.size()); ++i) {
      if (ref.trace[i].coverage >= 1.0) {
        ref_steps[sidx] = i;
        break;
      }
    }
  }
  for (int p = 0; p < static_cast<int>(planners.size()); ++p) {
    std::vector<double> final_emmd, final_cov, cov_at_ref, full_time;
    for (int sidx = 0; sidx < seed_count; ++sidx) {
      const TrialRecord& rec = records[p][sidx];
      final_emmd.push_back(rec.final_emmd);
      final_cov.push_back(rec.final_coverage);
      const int rs = ref_steps[sidx];
      cov_at_ref.push_back(rs >= 0 ? rec.trace[rs].coverage
                                   : rec.final_coverage);
      full_time.push_back(rec.first_full_coverage_time);
    }
    json row;
    row["planner"] = planners[p];
    row["median_final_emmd"] = median_of(final_emmd);
    row["median_final_coverage"] = median_of(final_cov);
    row["median_coverage_at_reference_full"] = median_of(cov_at_ref);
    row["per_seed_coverage_at_reference_full"] = cov_at_ref;
    row["per_seed_final_emmd"] = final_emmd;
    row["per_seed_first_full_coverage_time"] = full_time;
    table.push_back(row);
  }
  json ref_info;
  ref_info["planner"] = planners[0];
  ref_info["per_seed_full_coverage_step"] = ref_steps;
  summary["reference"] = ref_info;
  summary["results"] = table;
  fs::create_directories(out_dir);
  std::ofstream out(out_dir + "/summary.json");
  out << summary.dump(2) << '\n';
  return summary;
}

}  // namespace kme
