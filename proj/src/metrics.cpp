#include "kme/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "kme/parallel.hpp"

namespace kme {

double TrajectoryLog::uniform_dt() const {
  const int n = length();
  if (n < 1) throw std::invalid_argument("empty trajectory");
  if (n == 1) return 0.0;
  const double dt = times[1] - times[0];
  for (int i = 1; i + 1 < n; ++i) {
    if (std::abs((times[i + 1] - times[i]) - dt) > 1e-12) {
      throw std::invalid_argument("trajectory spacing is not uniform");
    }
  }
  return dt;
}

double emmd_oracle(const TrajectoryLog& log, const TargetModel& target) {
  const int n = log.length();
  if (n < 1) throw std::invalid_argument("empty trajectory");
  const int m = target.count();
  const int dim = target.dim();
  if (log.domain_points.cols() != dim) {
    throw std::invalid_argument("trajectory/target dimension mismatch");
  }
  const double* w = log.domain_points.data();
  const double* omega = target.samples.data();
  const KernelSpec kernel = target.objective_kernel;

  const double traj_traj = par::sum(
      static_cast<std::size_t>(n),
      [&](std::size_t a) {
        const double* wa = w + a * dim;
        double acc = 0.0;
        for (int b = 0; b < n; ++b) {
          acc += kernel_value_d2(kernel, squared_distance(wa, w + b * dim, dim));
        }
        return acc;
      },
      static_cast<std::size_t>(n) * n);
  const double cross = par::sum(
      static_cast<std::size_t>(n),
      [&](std::size_t a) {
        const double* wa = w + a * dim;
        double acc = 0.0;
        for (int i = 0; i < m; ++i) {
          acc += kernel_value_d2(kernel, squared_distance(wa, omega + i * dim, dim));
        }
        return acc;
      },
      static_cast<std::size_t>(n) * m);
  const double nn = static_cast<double>(n) * n;
  return traj_traj / nn - 2.0 * cross / (static_cast<double>(n) * m) +
         target.z_objective;
}

double coverage_fraction(const TrajectoryLog& log, const TargetModel& target,
                         double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("coverage radius must be > 0");
  const int n = log.length();
  if (n < 1) throw std::invalid_argument("empty trajectory");
  const int m = target.count();
  const int dim = target.dim();
  const double r2 = radius * radius;
  const double* w = log.domain_points.data();
  const double* omega = target.samples.data();
  const double covered = par::sum(
      static_cast<std::size_t>(m),
      [&](std::size_t i) {
        const double* oi = omega + i * dim;
        for (int t = 0; t < n; ++t) {
          if (squared_distance(oi, w + t * dim, dim) <= r2) return 1.0;
        }
        return 0.0;
      },
      static_cast<std::size_t>(m) * n);
  return covered / m;
}

Eigen::VectorXd time_averaged_histogram(const TrajectoryLog& log,
                                        const TargetModel& target) {
  const int n = log.length();
  if (n < 1) throw std::invalid_argument("empty trajectory");
  const int m = target.count();
  const int dim = target.dim();
  const double* w = log.domain_points.data();
  const double* omega = target.samples.data();
  const KernelSpec kernel = target.embedding_kernel;
  Eigen::VectorXd hist(m);
  par::parallel_for(
      static_cast<std::size_t>(m),
      [&](std::size_t i) {
        const double* oi = omega + i * dim;
        double acc = 0.0;
        for (int t = 0; t < n; ++t) {
          acc += kernel_value_d2(kernel, squared_distance(oi, w + t * dim, dim));
        }
        hist[static_cast<int>(i)] = acc / n;
      },
      static_cast<std::size_t>(m) * n);
  return hist;
}

Eigen::VectorXd batch_error(const TrajectoryLog& log, const TargetModel& target,
                            double dt) {
  const int n = log.length();
  if (n < 1) throw std::invalid_argument("empty trajectory");
  const int m = target.count();
  const int dim = target.dim();
  const double* w = log.domain_points.data();
  const double* omega = target.samples.data();
  const KernelSpec kernel = target.embedding_kernel;
  const double t_final = n * dt;
  Eigen::VectorXd e(m);
  par::parallel_for(
      static_cast<std::size_t>(m),
      [&](std::size_t i) {
        const double* oi = omega + i * dim;
        double acc = 0.0;
        for (int t = 0; t < n; ++t) {
          acc += kernel_value_d2(kernel, squared_distance(oi, w + t * dim, dim));
        }
        e[static_cast<int>(i)] =
            dt * acc - t_final * target.mu_hat_embedding[static_cast<int>(i)];
      },
      static_cast<std::size_t>(m) * n);
  return e;
}

double rkhs_error_norm2(const TrajectoryLog& log, const TargetModel& target,
                        double dt) {
  const int n = log.length();
  if (n < 1) throw std::invalid_argument("empty trajectory");
  const int m = target.count();
  const int dim = target.dim();
  const double* w = log.domain_points.data();
  const double* omega = target.samples.data();
  const KernelSpec kernel = target.embedding_kernel;
  const double t_final = n * dt;

  const double traj_traj = par::sum(
      static_cast<std::size_t>(n),
      [&](std::size_t a) {
        const double* wa = w + a * dim;
        double acc = 0.0;
        for (int b = 0; b < n; ++b) {
          acc += kernel_value_d2(kernel, squared_distance(wa, w + b * dim, dim));
        }
        return acc;
      },
      static_cast<std::size_t>(n) * n);
  const double cross = par::sum(
      static_cast<std::size_t>(n),
      [&](std::size_t a) {
        const double* wa = w + a * dim;
        double acc = 0.0;
        for (int i = 0; i < m; ++i) {
          acc += kernel_value_d2(kernel, squared_distance(wa, omega + i * dim, dim));
        }
        return acc;
      },
      static_cast<std::size_t>(n) * m);
  return dt * dt * traj_traj - 2.0 * dt * t_final * cross / m +
         t_final * t_final * target.z_embedding;
}

}  // namespace kme
