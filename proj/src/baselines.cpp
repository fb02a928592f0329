#include "kme/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "kme/parallel.hpp"

namespace kme {

void MemoryPolicy::validate() const {
  if (kind != Kind::full && memory < 1) {
    throw std::invalid_argument("memory policy K must be >= 1");
  }
}

RowMatrixXd retain_history(const RowMatrixXd& history_points,
                           const MemoryPolicy& policy, Rng& rng) {
  const int n = static_cast<int>(history_points.rows());
  if (policy.kind == MemoryPolicy::Kind::full || n <= policy.memory) {
    return history_points;
  }
  if (policy.kind == MemoryPolicy::Kind::short_term) {
    return history_points.bottomRows(policy.memory);
  }
  // Uniform without replacement (partial Fisher-Yates), ascending order for
  // a deterministic layout.
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < policy.memory; ++i) {
    const std::size_t j = i + rng.index(static_cast<std::size_t>(n - i));
    std::swap(idx[i], idx[j]);
  }
  std::vector<int> chosen(idx.begin(), idx.begin() + policy.memory);
  std::sort(chosen.begin(), chosen.end());
  RowMatrixXd out(policy.memory, history_points.cols());
  for (int i = 0; i < policy.memory; ++i) out.row(i) = history_points.row(chosen[i]);
  return out;
}

RetainedSums retained_sums(const RowMatrixXd& retained, const TargetModel& target) {
  const int r = static_cast<int>(retained.rows());
  const int m = target.count();
  const int dim = target.dim();
  const KernelSpec kernel = target.embedding_kernel;
  const double* hist = retained.data();
  const double* samples = target.samples.data();
  RetainedSums sums;
  sums.hist_hist = par::sum(
      static_cast<std::size_t>(r),
      [&](std::size_t a) {
        const double* pa = hist + a * dim;
        double acc = 0.0;
        for (int b = 0; b < r; ++b) {
          acc += kernel_value_d2(kernel, squared_distance(pa, hist + b * dim, dim));
        }
        return acc;
      },
      static_cast<std::size_t>(r) * r);
  sums.hist_target = par::sum(
      static_cast<std::size_t>(r),
      [&](std::size_t a) {
        const double* pa = hist + a * dim;
        double acc = 0.0;
        for (int i = 0; i < m; ++i) {
          acc += kernel_value_d2(kernel, squared_distance(pa, samples + i * dim, dim));
        }
        return acc;
      },
      static_cast<std::size_t>(r) * m);
  return sums;
}

double memory_emmd_objective(const RowMatrixXd& retained,
                             const Eigen::VectorXd& x, const SystemModel& model,
                             const DomainModel& domain, const TargetModel& target,
                             double control_weight, const RowMatrixXd& controls,
                             RowMatrixXd* grad) {
  return memory_emmd_objective(retained, retained_sums(retained, target), x, model,
                               domain, target, control_weight, controls, grad);
}

double memory_emmd_objective(const RowMatrixXd& retained, const RetainedSums& sums,
                             const Eigen::VectorXd& x, const SystemModel& model,
                             const DomainModel& domain, const TargetModel& target,
                             double control_weight, const RowMatrixXd& controls,
                             RowMatrixXd* grad) {
  const int horizon = static_cast<int>(controls.rows());
  const int r = static_cast<int>(retained.rows());
  const int m = target.count();
  const int dim = target.dim();
  // Planning uses the same kernel as the recursive planner's error state, so
  // the memory ablation isolates the history representation.
  const KernelSpec kernel = target.embedding_kernel;
  const double* hist = retained.data();
  const double* samples = target.samples.data();
  const int total = r + horizon;
  const double hist_hist = sums.hist_hist;
  const double hist_target = sums.hist_target;

  const PointObjective obj = [&](const RowMatrixXd& pts,
                                 RowMatrixXd* dpts) -> double {
    const double* p = pts.data();
    const double plan_hist =
        par::sum(static_cast<std::size_t>(horizon), [&](std::size_t j) {
          const double* pj = p + j * dim;
          double acc = 0.0;
          for (int b = 0; b < r; ++b) {
            acc += kernel_value_d2(kernel, squared_distance(pj, hist + b * dim, dim));
          }
          return acc;
        });
    const double plan_plan =
        par::sum(static_cast<std::size_t>(horizon), [&](std::size_t j) {
          const double* pj = p + j * dim;
          double acc = 0.0;
          for (int b = 0; b < horizon; ++b) {
            acc += kernel_value_d2(kernel, squared_distance(pj, p + b * dim, dim));
          }
          return acc;
        });
    const double plan_target =
        par::sum(static_cast<std::size_t>(horizon), [&](std::size_t j) {
          const double* pj = p + j * dim;
          double acc = 0.0;
          for (int i = 0; i < m; ++i) {
            acc += kernel_value_d2(kernel, squared_distance(pj, samples + i * dim, dim));
          }
          return acc;
        });
    const double tt = static_cast<double>(total) * total;
    const double value = (hist_hist + 2.0 * plan_hist + plan_plan) / tt -
                         2.0 * (hist_target + plan_target) /
                             (static_cast<double>(total) * m) +
                         target.z_embedding;
    if (dpts) {
      const std::size_t width = static_cast<std::size_t>(horizon) * dim;
      // d/dw_j of the three plan-dependent sums.
      par::sum_arrays(
          static_cast<std::size_t>(horizon), width, dpts->data(),
          [&](std::size_t j, double* acc) {
            const double* pj = p + j * dim;
            double* out = acc + j * dim;
            for (int b = 0; b < r; ++b) {
              const double* pb = hist + b * dim;
              const double c =
                  kernel_grad_coef_d2(kernel, squared_distance(pj, pb, dim));
              for (int d = 0; d < dim; ++d) out[d] += (2.0 / tt) * c * (pj[d] - pb[d]);
            }
            for (int b = 0; b < horizon; ++b) {
              const double* pb = p + b * dim;
              const double c =
                  kernel_grad_coef_d2(kernel, squared_distance(pj, pb, dim));
              for (int d = 0; d < dim; ++d) out[d] += (2.0 / tt) * c * (pj[d] - pb[d]);
            }
            for (int i = 0; i < m; ++i) {
              const double* oi = samples + i * dim;
              const double c =
                  kernel_grad_coef_d2(kernel, squared_distance(pj, oi, dim));
              for (int d = 0; d < dim; ++d) {
                out[d] -= (2.0 / (static_cast<double>(total) * m)) * c * (pj[d] - oi[d]);
              }
            }
          });
    }
    return value;
  };
  return rollout_eval(model, domain, x, controls, control_weight, obj, grad);
}

RowMatrixXd memory_emmd_plan(const Eigen::VectorXd& x,
                             const RowMatrixXd& history_points,
                             const MemoryPolicy& policy, const SystemModel& model,
                             const DomainModel& domain, const TargetModel& target,
                             const PlannerConfig& cfg, Rng& rng,
                             MpcWorkspace* workspace) {
  cfg.validate();
  policy.validate();
  const int horizon = cfg.mode == PlannerConfig::Mode::mpc ? cfg.mpc.horizon : 1;
  const int mdim = model.control_dim();

  const RowMatrixXd retained = retain_history(history_points, policy, rng);
  // The O((t_p + t_h)^2) part of the standard objective, paid once per step.
  const RetainedSums sums = retained_sums(retained, target);

  RowMatrixXd initial = RowMatrixXd::Zero(horizon, mdim);
  if (workspace && workspace->prev_controls.rows() == horizon &&
      workspace->prev_controls.cols() == mdim) {
    initial.topRows(horizon - 1) = workspace->prev_controls.bottomRows(horizon - 1);
  }
  const auto f = [&](const RowMatrixXd& u, RowMatrixXd* grad) -> double {
    return memory_emmd_objective(retained, sums, x, model, domain, target,
                                 cfg.control_weight, u, grad);
  };
  PgdResult result = pgd_minimize(f, std::move(initial), cfg.mpc.iterations,
                                  cfg.mpc.step_size, model.u_max);
  if (workspace) workspace->prev_controls = result.controls;
  return result.controls;
}

std::vector<int> tsp_tour(const TargetModel& target, const Eigen::VectorXd& start) {
  const int m = target.count();
  if (start.size() != target.dim()) {
    throw std::invalid_argument("tsp start dimension mismatch");
  }
  std::vector<int> order;
  order.reserve(m);
  std::vector<char> used(m, 0);
  Eigen::VectorXd cur = start;
  for (int step = 0; step < m; ++step) {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      if (used[i]) continue;
      const double d2 = (target.samples.row(i).transpose() - cur).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = i;
      }
    }
    used[best] = 1;
    order.push_back(best);
    cur = target.samples.row(best);
  }

  // 2-opt on the open path: reverse order[i..j] when it shortens the path.
  const auto dist = [&](int a, int b) {
    return (target.samples.row(a) - target.samples.row(b)).norm();
  };
  const auto dist_start = [&](int a) {
    return (target.samples.row(a).transpose() - start).norm();
  };
  const long long budget = 10LL * m * m;
  long long checks = 0;
  bool improved = true;
  while (improved && checks < budget) {
    improved = false;
    for (int i = 0; i < m - 1 && checks < budget; ++i) {
      for (int j = i + 1; j < m && checks < budget; ++j) {
        ++checks;
        const double before_i =
            i == 0 ? dist_start(order[0]) : dist(order[i - 1], order[i]);
        const double after_j = j == m - 1 ? 0.0 : dist(order[j], order[j + 1]);
        const double new_before_i =
            i == 0 ? dist_start(order[j]) : dist(order[i - 1], order[j]);
        const double new_after_j = j == m - 1 ? 0.0 : dist(order[i], order[j + 1]);
        if (new_before_i + new_after_j < before_i + after_j - 1e-12) {
          std::reverse(order.begin() + i, order.begin() + j + 1);
          improved = true;
        }
      }
    }
  }
  return order;
}

WaypointTracker::WaypointTracker(RowMatrixXd waypoints, double arrival_tol)
    : waypoints_(std::move(waypoints)), arrival_tol_(arrival_tol) {}

Eigen::VectorXd WaypointTracker::next_control(const Eigen::VectorXd& x,
                                              const SystemModel& model) {
  const int n = model.space_dim;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(model.control_dim());
  if (model.kind != SystemKind::single_integrator) {
    throw std::invalid_argument("waypoint tracking expects a single integrator");
  }
  while (next_ < waypoints_.rows()) {
    const Eigen::VectorXd goal = waypoints_.row(next_);
    const Eigen::VectorXd delta = goal - x.head(n);
    const double d = delta.norm();
    if (d <= arrival_tol_) {
      ++next_;
      stall_steps_ = 0;
      last_distance_ = std::numeric_limits<double>::infinity();
      continue;
    }
    // Skip a waypoint the constrained dynamics cannot close in on.
    if (d >= last_distance_ - 1e-12 && stall_steps_ > 50) {
      ++next_;
      stall_steps_ = 0;
      last_distance_ = std::numeric_limits<double>::infinity();
      continue;
    }
    stall_steps_ = (d >= last_distance_ - 1e-12) ? stall_steps_ + 1 : 0;
    last_distance_ = d;
    const double step = std::min(model.u_max * model.dt, d);
    u = delta * (step / d) / model.dt;
    return u;
  }
  return u;
}

TrajectoryLog tsp_plan(const TargetModel& target, const Eigen::VectorXd& start,
                       const SystemModel& model, const DomainModel& domain,
                       int max_steps) {
  const std::vector<int> order = tsp_tour(target, start);
  RowMatrixXd waypoints(order.size(), target.dim());
  for (std::size_t i = 0; i < order.size(); ++i) {
    waypoints.row(i) = target.samples.row(order[i]);
  }
  WaypointTracker tracker(std::move(waypoints), 1e-9);

  const int n = model.space_dim;
  std::vector<Eigen::VectorXd> xs, ws, us;
  Eigen::VectorXd x = start;
  for (int step_i = 0; step_i < max_steps; ++step_i) {
    if (tracker.done() && step_i > 0) break;
    const Eigen::VectorXd u = tracker.next_control(x, model);
    x = step(model, domain, x, u);
    xs.push_back(x);
    ws.push_back(sigma_map(model, domain, x));
    us.push_back(u);
  }
  TrajectoryLog log;
  const int len = static_cast<int>(xs.size());
  log.times.resize(len);
  log.states.resize(len, n);
  log.domain_points.resize(len, n);
  log.controls.resize(std::max(0, len - 1), model.control_dim());
  for (int i = 0; i < len; ++i) {
    log.times[i] = (i + 1) * model.dt;
    log.states.row(i) = xs[i];
    log.domain_points.row(i) = ws[i];
    if (i + 1 < len) log.controls.row(i) = us[i + 1];
  }
  return log;
}

namespace {

double point_segment_distance2(const double* p, const Eigen::VectorXd& a,
                               const Eigen::VectorXd& b, int dim) {
  double ab2 = 0.0, ap_ab = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double e = b[d] - a[d];
    ab2 += e * e;
    ap_ab += (p[d] - a[d]) * e;
  }
  double t = ab2 > 0.0 ? ap_ab / ab2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  double d2 = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double diff = p[d] - (a[d] + t * (b[d] - a[d]));
    d2 += diff * diff;
  }
  return d2;
}

}  // namespace

Eigen::VectorXd nbv_plan_step(const Eigen::VectorXd& x,
                              const std::vector<char>& covered,
                              const TargetModel& target, const SystemModel& model,
                              const DomainModel& domain, double radius) {
  const int m = target.count();
  const int dim = target.dim();
  if (static_cast<int>(covered.size()) != m) {
    throw std::invalid_argument("covered flags do not match target");
  }
  const Eigen::VectorXd pos = sigma_map(model, domain, x);
  const double r2 = radius * radius;

  int best = -1;
  double best_score = -1.0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int c = 0; c < m; ++c) {
    if (covered[c]) continue;
    const Eigen::VectorXd goal = target.samples.row(c);
    const double dist = std::max((goal - pos).norm(), 1e-12);
    int newly = 0;
    for (int i = 0; i < m; ++i) {
      if (covered[i]) continue;
      if (point_segment_distance2(target.samples.data() + i * dim, pos, goal, dim) <=
          r2) {
        ++newly;
      }
    }
    const double score = newly / dist;
    const bool better = score > best_score ||
                        (score == best_score && dist < best_dist) ||
                        (score == best_score && dist == best_dist && c < best);
    if (better) {
      best = c;
      best_score = score;
      best_dist = dist;
    }
  }
  Eigen::VectorXd u = Eigen::VectorXd::Zero(model.control_dim());
  if (best < 0) return u;  // everything covered
  const Eigen::VectorXd delta = target.samples.row(best).transpose() - x.head(dim);
  const double d = delta.norm();
  if (d <= 0.0) return u;
  const double step_len = std::min(model.u_max * model.dt, d);
  u = delta * (step_len / d) / model.dt;
  return u;
}

Eigen::VectorXd nbv_plan_step(const Eigen::VectorXd& x, const TrajectoryLog& visited,
                              const TargetModel& target, const SystemModel& model,
                              const DomainModel& domain, double radius) {
  const int m = target.count();
  std::vector<char> covered(m, 0);
  if (visited.length() > 0) {
    const double r2 = radius * radius;
    const int dim = target.dim();
    for (int i = 0; i < m; ++i) {
      for (int t = 0; t < visited.length(); ++t) {
        if (squared_distance(target.samples.data() + i * dim,
                             visited.domain_points.data() + t * dim, dim) <= r2) {
          covered[i] = 1;
          break;
        }
      }
    }
  }
  return nbv_plan_step(x, covered, target, model, domain, radius);
}

}  // namespace kme
