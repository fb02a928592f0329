#pragma once

#include <Eigen/Core>
#include <limits>
#include <vector>

#include "kme/controller.hpp"
#include "kme/metrics.hpp"
#include "kme/rng.hpp"

namespace kme {

/// Which part of the visitation history a memory-limited EMMD planner keeps:
/// everything, the last K points, or K points drawn uniformly without
/// replacement (optionally redrawn every step).
struct MemoryPolicy {
  enum class Kind { full, short_term, subsampled };
  Kind kind = Kind::full;
  int memory = 30;
  bool reseed_each_step = true;

  void validate() const;
};

/// One receding-horizon step of the standard sample-EMMD planner: minimizes
/// the objective-kernel EMMD of (retained history + planned segment) with the
/// same projected-gradient solver as the recursive planner. The retained set
/// is rebuilt from `history` every step; cost grows with the history under
/// the full policy.
RowMatrixXd memory_emmd_plan(const Eigen::VectorXd& x,
                             const RowMatrixXd& history_points,
                             const MemoryPolicy& policy, const SystemModel& model,
                             const DomainModel& domain, const TargetModel& target,
                             const PlannerConfig& cfg, Rng& rng,
                             MpcWorkspace* workspace = nullptr);

/// Objective value of the memory planner for a fixed retained set and plan;
/// exposed for the descent and equivalence tests.
double memory_emmd_objective(const RowMatrixXd& retained,
                             const Eigen::VectorXd& x, const SystemModel& model,
                             const DomainModel& domain, const TargetModel& target,
                             double control_weight, const RowMatrixXd& controls,
                             RowMatrixXd* grad);

/// Retained-set sums that do not depend on the plan: sum of k over retained
/// pairs and over retained-target pairs. Computed once per planning step.
struct RetainedSums {
  double hist_hist = 0.0;
  double hist_target = 0.0;
};
RetainedSums retained_sums(const RowMatrixXd& retained, const TargetModel& target);

double memory_emmd_objective(const RowMatrixXd& retained, const RetainedSums& sums,
                             const Eigen::VectorXd& x, const SystemModel& model,
                             const DomainModel& domain, const TargetModel& target,
                             double control_weight, const RowMatrixXd& controls,
                             RowMatrixXd* grad);

/// Retained subset per policy. Subsampled draws from rng.
RowMatrixXd retain_history(const RowMatrixXd& history_points,
                           const MemoryPolicy& policy, Rng& rng);

/// Nearest-neighbor tour over the target samples from `start`, improved by
/// 2-opt until no improving swap (capped at 10 M^2 checks). Returns the
/// visiting order as sample indices.
std::vector<int> tsp_tour(const TargetModel& target, const Eigen::VectorXd& start);

/// Tracks a waypoint list with the single integrator at u_max, one clipped
/// straight-line step at a time, open loop (no replanning).
class WaypointTracker {
 public:
  WaypointTracker(RowMatrixXd waypoints, double arrival_tol);

  /// Control for the current state; zero once all waypoints are done.
  Eigen::VectorXd next_control(const Eigen::VectorXd& x, const SystemModel& model);

  bool done() const { return next_ >= waypoints_.rows(); }
  int waypoint_index() const { return static_cast<int>(next_); }

 private:
  RowMatrixXd waypoints_;
  Eigen::Index next_ = 0;
  double arrival_tol_ = 0.0;
  double last_distance_ = std::numeric_limits<double>::infinity();
  int stall_steps_ = 0;
};

/// Runs the TSP heuristic end to end: builds the tour and tracks it until
/// complete (capped at max_steps), returning the trajectory.
TrajectoryLog tsp_plan(const TargetModel& target, const Eigen::VectorXd& start,
                       const SystemModel& model, const DomainModel& domain,
                       int max_steps);

/// Next-best-view greedy step over the uncovered samples: heads at u_max
/// toward the candidate maximizing newly covered samples per unit distance;
/// ties broken by distance, then sample index. covered[i] marks samples
/// already within the coverage radius of the visited path.
Eigen::VectorXd nbv_plan_step(const Eigen::VectorXd& x,
                              const std::vector<char>& covered,
                              const TargetModel& target, const SystemModel& model,
                              const DomainModel& domain, double radius);

/// Spec-shaped convenience: derives the covered set from a visited log.
Eigen::VectorXd nbv_plan_step(const Eigen::VectorXd& x, const TrajectoryLog& visited,
                              const TargetModel& target, const SystemModel& model,
                              const DomainModel& domain, double radius);

}  // namespace kme
