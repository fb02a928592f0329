#pragma once

#include <Eigen/Core>

#include "kme/domain.hpp"

namespace kme {

/// Uniformly spaced trajectory record: visited states, their domain points
/// w_tau = sigma(x_tau), and the applied controls.
struct TrajectoryLog {
  Eigen::VectorXd times;      // N, strictly increasing, uniform spacing
  RowMatrixXd states;         // N x state_dim
  RowMatrixXd domain_points;  // N x n
  RowMatrixXd controls;       // (N-1) x m

  int length() const { return static_cast<int>(times.size()); }

  /// Uniform step, validated to 1e-12.
  double uniform_dt() const;
};

/// Sample-based ergodic MMD of the logged trajectory against the target:
///   (1/N^2) sum_ab k(w_a, w_b) - (2/(N M)) sum_ti k(w_t, omega_i) + z_q
/// with the objective kernel. O(N^2 + N M); the independent check for the
/// recursive error state.
double emmd_oracle(const TrajectoryLog& log, const TargetModel& target);

/// Fraction of target samples within ambient distance radius of at least one
/// logged domain point.
double coverage_fraction(const TrajectoryLog& log, const TargetModel& target,
                         double radius);

/// Empirical visitation embedding at the target samples:
/// (1/N) sum_t k(w_t, omega_i), embedding kernel.
Eigen::VectorXd time_averaged_histogram(const TrajectoryLog& log,
                                        const TargetModel& target);

/// Batch recomputation of the visitation error state from a stored
/// trajectory: e_i = dt * sum_t k(w_t, omega_i) - t_final * mu_hat_i.
Eigen::VectorXd batch_error(const TrajectoryLog& log, const TargetModel& target,
                            double dt);

/// Squared RKHS norm of the error functional computed from the trajectory
/// with the embedding kernel (equals t^2 times the kernel-form EMMD).
double rkhs_error_norm2(const TrajectoryLog& log, const TargetModel& target,
                        double dt);

}  // namespace kme
