#pragma once

#include <Eigen/Core>

#include "kme/domain.hpp"

namespace kme {

/// Visitation error state: evaluations of t * (mu_rho - mu_q) at the M
/// target samples, advanced by explicit Euler with the same dt as the
/// dynamics. Memory and per-step cost are O(M), independent of elapsed time.
struct ErrorState {
  Eigen::VectorXd e;  // one entry per target sample
  double t = 0.0;
  double dt = 0.0;
};

/// Zero error state at t = 0.
ErrorState error_init(const TargetModel& target, double dt);

/// e_i += dt * (k(w, omega_i) - mu_hat_i); t += dt. Uses the target's
/// embedding kernel. w is the visited domain point sigma(x).
void error_step(ErrorState& state, const TargetModel& target,
                const Eigen::VectorXd& w);

/// Sample-approximated time-augmented metric: (1/M) sum e_i^2.
double error_metric(const ErrorState& state, const TargetModel& target);

}  // namespace kme
