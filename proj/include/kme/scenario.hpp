#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "kme/baselines.hpp"
#include "kme/controller.hpp"
#include "kme/domain.hpp"
#include "kme/dynamics.hpp"

namespace kme {

/// Everything needed to run a trial deterministically. Parsed from the JSON
/// schema documented in the README; validation errors name the offending key.
struct Scenario {
  std::string name = "scenario";

  // domain
  bool domain_is_mesh = false;
  BoxBounds box;               // box domains
  std::string mesh_path;       // mesh domains
  BoxBounds mesh_normalize_to; // mesh domains

  TargetSpec target;
  int sample_count = 100;

  KernelSpec embedding_kernel;
  KernelSpec objective_kernel;

  SystemModel system;

  enum class PlannerKind { greedy, mpc, full, short_term, subsampled, tsp, nbv };
  PlannerKind planner = PlannerKind::greedy;
  MpcConfig solver;            // mpc planner and memory baselines
  MemoryPolicy memory;         // memory baselines
  double nbv_radius = 0.0;     // 0: use the coverage radius
  double control_weight = 0.0;

  int steps = 100;
  std::vector<std::uint64_t> seeds = {0};
  Eigen::VectorXd start;       // empty: random start
  double coverage_radius = 0.0;  // 0: twice the mean NN spacing
  bool dump_error_state = false;

  std::string planner_label() const;
};

Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);

/// Normalized config for manifests; parsing it back yields the same scenario.
nlohmann::json scenario_to_json(const Scenario& s);

/// Applies `dotted.key=value` onto the scenario JSON. The value is parsed as
/// JSON when possible, else taken as a string. Unknown keys are rejected when
/// the result is re-parsed.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// FNV-1a hash of the canonical scenario serialization.
std::string scenario_hash(const nlohmann::json& j);

/// Builds the domain described by the scenario (loads the mesh if needed).
DomainModel make_domain(const Scenario& s);

}  // namespace kme
