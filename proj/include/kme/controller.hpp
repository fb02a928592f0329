#pragma once

#include <Eigen/Core>
#include <functional>

#include "kme/domain.hpp"
#include "kme/dynamics.hpp"
#include "kme/visitation.hpp"

namespace kme {

struct MpcConfig {
  int horizon = 10;
  int iterations = 20;
  double step_size = 1.0;
};

struct PlannerConfig {
  enum class Mode { greedy, mpc };
  Mode mode = Mode::greedy;
  MpcConfig mpc;
  double control_weight = 0.0;  // optional running cost on ‖u‖²

  void validate() const;
};

/// Closed-form steepest-descent feedback: the Monte-Carlo discretization of
///   u = -alpha( g(x)^T  integral of e_w * grad_x k(sigma(x), w) dw ),
/// projected onto the control ball. O(M) per call.
Eigen::VectorXd greedy_control(const Eigen::VectorXd& x, const ErrorState& state,
                               const SystemModel& model, const DomainModel& domain,
                               const TargetModel& target);

/// Objective over the rollout's visited domain points. Returns the value and,
/// when requested, fills dJ/dw (one row per planned point).
using PointObjective =
    std::function<double(const RowMatrixXd& points, RowMatrixXd* d_points)>;

/// Rolls the dynamics forward under `controls` (one row per step), evaluates
/// `point_obj` on the visited points sigma(x_1..x_N), adds the quadratic
/// control cost, and (when grad != nullptr) reverse-accumulates the exact
/// gradient of the discrete objective with respect to every control.
double rollout_eval(const SystemModel& model, const DomainModel& domain,
                    const Eigen::VectorXd& x0, const RowMatrixXd& controls,
                    double control_weight, const PointObjective& point_obj,
                    RowMatrixXd* grad);

/// Projected gradient descent on a rollout objective with a fixed step size;
/// every iterate is projected onto ‖u_j‖ <= u_max row-wise and the best
/// visited iterate is returned.
struct PgdResult {
  RowMatrixXd controls;
  double objective = 0.0;
};
PgdResult pgd_minimize(const std::function<double(const RowMatrixXd&, RowMatrixXd*)>& f,
                       RowMatrixXd initial, int iterations, double step_size,
                       double u_max);

/// Terminal-error objective of the receding-horizon problem: rolls the error
/// recursion forward from (x, e) and returns (1/M) sum ehat_i(N)^2 plus the
/// control cost. include_metric_term=false drops the error term (test hook).
double kme_rollout_objective(const Eigen::VectorXd& x, const ErrorState& state,
                             const SystemModel& model, const DomainModel& domain,
                             const TargetModel& target, double control_weight,
                             const RowMatrixXd& controls, RowMatrixXd* grad,
                             bool include_metric_term = true);

/// Warm-start storage for the receding-horizon planner (previous solution,
/// shifted one step with a zero row appended).
struct MpcWorkspace {
  RowMatrixXd prev_controls;
};

/// Solves the receding-horizon problem from the current (x, e) and returns
/// the full control sequence; callers apply only the first row.
RowMatrixXd mpc_plan(const Eigen::VectorXd& x, const ErrorState& state,
                     const SystemModel& model, const DomainModel& domain,
                     const TargetModel& target, const PlannerConfig& cfg,
                     MpcWorkspace* workspace = nullptr);

}  // namespace kme
