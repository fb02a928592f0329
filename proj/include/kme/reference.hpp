#pragma once

// Serial reference implementations of the hot kernels. Plain left-to-right
// accumulation, no chunking, no OpenMP. Kept for testing the parallel paths
// and for the kme_bench comparison; not used by the library itself.

#include <Eigen/Core>

#include "kme/domain.hpp"
#include "kme/metrics.hpp"

namespace kme::reference {

inline void empirical_embedding(const KernelSpec& kernel,
                                const RowMatrixXd& points,
                                Eigen::VectorXd& mu_hat, double& z) {
  const int m = static_cast<int>(points.rows());
  const int dim = static_cast<int>(points.cols());
  mu_hat.resize(m);
  const double* data = points.data();
  double grand = 0.0;
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
      acc += kernel_value_d2(kernel,
                             squared_distance(data + i * dim, data + j * dim, dim));
    }
    mu_hat[i] = acc / m;
    grand += acc;
  }
  z = grand / (static_cast<double>(m) * m);
}

inline double emmd_oracle(const TrajectoryLog& log, const TargetModel& target) {
  const int n = log.length();
  const int m = target.count();
  const int dim = target.dim();
  const double* w = log.domain_points.data();
  const double* omega = target.samples.data();
  const KernelSpec kernel = target.objective_kernel;
  double tt = 0.0, cross = 0.0;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      tt += kernel_value_d2(kernel,
                            squared_distance(w + a * dim, w + b * dim, dim));
    }
    for (int i = 0; i < m; ++i) {
      cross += kernel_value_d2(
          kernel, squared_distance(w + a * dim, omega + i * dim, dim));
    }
  }
  return tt / (static_cast<double>(n) * n) -
         2.0 * cross / (static_cast<double>(n) * m) + target.z_objective;
}

inline Eigen::VectorXd batch_error(const TrajectoryLog& log,
                                   const TargetModel& target, double dt) {
  const int n = log.length();
  const int m = target.count();
  const int dim = target.dim();
  const double* w = log.domain_points.data();
  const double* omega = target.samples.data();
  const KernelSpec kernel = target.embedding_kernel;
  Eigen::VectorXd e(m);
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    for (int t = 0; t < n; ++t) {
      acc += kernel_value_d2(kernel,
                             squared_distance(omega + i * dim, w + t * dim, dim));
    }
    e[i] = dt * acc - n * dt * target.mu_hat_embedding[i];
  }
  return e;
}

/// Brute-force closest point on a mesh, checking every triangle.
inline Eigen::Vector3d project_to_mesh(const TriangleMesh& mesh,
                                       const Eigen::Vector3d& p) {
  double best_d2 = std::numeric_limits<double>::infinity();
  Eigen::Vector3d best = p;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const Eigen::Vector3d q = closest_point_on_triangle(
        p, mesh.vertices.row(mesh.triangles(t, 0)),
        mesh.vertices.row(mesh.triangles(t, 1)),
        mesh.vertices.row(mesh.triangles(t, 2)));
    const double d2 = (q - p).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = q;
    }
  }
  return best;
}

}  // namespace kme::reference
