#include "kme/controller.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "kme/parallel.hpp"

namespace kme {

void PlannerConfig::validate() const {
  if (mode == Mode::mpc) {
    if (mpc.horizon < 1) throw std::invalid_argument("mpc horizon must be >= 1");
    if (mpc.iterations < 1) {
      throw std::invalid_argument("mpc iterations must be >= 1");
    }
    if (!(mpc.step_size > 0.0)) {
      throw std::invalid_argument("mpc step_size must be > 0");
    }
  }
  if (control_weight < 0.0) {
    throw std::invalid_argument("control_weight must be >= 0");
  }
}

Eigen::VectorXd greedy_control(const Eigen::VectorXd& x, const ErrorState& state,
                               const SystemModel& model, const DomainModel& domain,
                               const TargetModel& target) {
  const int m = target.count();
  if (state.e.size() != m) {
    throw std::invalid_argument("error state size does not match target");
  }
  const int dim = target.dim();
  const Eigen::VectorXd w = sigma_map(model, domain, x);
  const double* samples = target.samples.data();
  const double* wp = w.data();
  const double* e = state.e.data();
  const KernelSpec kernel = target.embedding_kernel;

  // s = (1/M) sum_i e_i * grad_w k(w, omega_i)
  Eigen::VectorXd s(dim);
  par::sum_arrays(static_cast<std::size_t>(m), static_cast<std::size_t>(dim),
                  s.data(), [&](std::size_t i, double* acc) {
                    const double* oi = samples + i * dim;
                    const double d2 = squared_distance(wp, oi, dim);
                    const double c = e[i] * kernel_grad_coef_d2(kernel, d2);
                    for (int d = 0; d < dim; ++d) acc[d] += c * (wp[d] - oi[d]);
                  });
  s /= m;

  // raw = -g(x)^T J_sigma^T s. The double integrator's input matrix is
  // orthogonal to the position gradient, so the closed-form law is zero there.
  Eigen::VectorXd raw = Eigen::VectorXd::Zero(model.control_dim());
  if (model.kind == SystemKind::single_integrator) raw = -s;
  return project_control(raw, model.u_max);
}

namespace {

// Position clamp activity for box domains: 0 where the coordinate sits on a
// bound, 1 elsewhere. Meshes use the identity Jacobian approximation.
void clamp_mask(const DomainModel& domain, const double* pos, int n, double* mask) {
  if (!domain.is_box()) {
    for (int d = 0; d < n; ++d) mask[d] = 1.0;
    return;
  }
  const BoxBounds& b = domain.box_bounds();
  for (int d = 0; d < n; ++d) {
    mask[d] = (pos[d] <= b.lo[d] || pos[d] >= b.hi[d]) ? 0.0 : 1.0;
  }
}

}  // namespace

double rollout_eval(const SystemModel& model, const DomainModel& domain,
                    const Eigen::VectorXd& x0, const RowMatrixXd& controls,
                    double control_weight, const PointObjective& point_obj,
                    RowMatrixXd* grad) {
  const int horizon = static_cast<int>(controls.rows());
  const int n = model.space_dim;
  const int sd = model.state_dim();
  if (x0.size() != sd || controls.cols() != model.control_dim()) {
    throw std::invalid_argument("rollout dimension mismatch");
  }

  RowMatrixXd xs(horizon + 1, sd);
  RowMatrixXd points(horizon, n);
  RowMatrixXd step_mask(horizon + 1, n);   // domain-constraint activity at x_j
  RowMatrixXd sigma_mask(horizon, n);      // sigma clamp activity at w_j
  xs.row(0) = x0;
  step_mask.row(0).setOnes();

  for (int s = 0; s < horizon; ++s) {
    const Eigen::VectorXd xj = xs.row(s);
    const Eigen::VectorXd u = controls.row(s);
    Eigen::VectorXd next(sd);
    if (model.kind == SystemKind::single_integrator) {
      next = xj + model.dt * u;
    } else {
      next.head(n) = xj.head(n) + model.dt * xj.tail(n);
      next.tail(n) = xj.tail(n) + model.dt * u;
    }
    if (model.constrain_to_domain) {
      next.head(n) = domain.project(next.head(n));
      clamp_mask(domain, next.data(), n, step_mask.row(s + 1).data());
    } else {
      step_mask.row(s + 1).setOnes();
    }
    xs.row(s + 1) = next;

    const Eigen::VectorXd w = sigma_map(model, domain, next);
    points.row(s) = w;
    if (model.sigma == SigmaKind::identity && domain.is_box()) {
      clamp_mask(domain, w.data(), n, sigma_mask.row(s).data());
    } else {
      sigma_mask.row(s).setOnes();
    }
  }

  double value = 0.0;
  RowMatrixXd d_points;
  if (grad) {
    d_points.resize(horizon, n);
    value = point_obj(points, &d_points);
  } else {
    value = point_obj(points, nullptr);
  }

  if (!std::isfinite(value)) {
    throw std::runtime_error("non-finite rollout objective");
  }

  double quad = 0.0;
  for (int s = 0; s < horizon; ++s) quad += controls.row(s).squaredNorm();
  value += control_weight * model.dt * quad;

  if (!grad) return value;

  grad->resize(horizon, model.control_dim());
  // Reverse accumulation. lam = dJ/dx_{s+1}; the direct term enters through
  // sigma, the recursive term through the Euler step (and clamp masks).
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(sd);
  for (int s = horizon - 1; s >= 0; --s) {
    Eigen::VectorXd direct = Eigen::VectorXd::Zero(sd);
    for (int d = 0; d < n; ++d) {
      direct[d] = sigma_mask(s, d) * d_points(s, d);
    }
    if (s == horizon - 1) {
      lam = direct;
    } else {
      // lam_prev holds dJ/dx_{s+2}; pull it back through x_{s+2} = F(x_{s+1}).
      Eigen::VectorXd pulled(sd);
      if (model.kind == SystemKind::single_integrator) {
        for (int d = 0; d < n; ++d) pulled[d] = step_mask(s + 2, d) * lam[d];
      } else {
        for (int d = 0; d < n; ++d) {
          const double lp = step_mask(s + 2, d) * lam[d];
          pulled[d] = lp;
          pulled[n + d] = model.dt * lp + lam[n + d];
        }
      }
      lam = direct + pulled;
    }
    // dJ/du_s = B^T lam + control cost term.
    for (int d = 0; d < n; ++d) {
      double b_lam;
      if (model.kind == SystemKind::single_integrator) {
        b_lam = model.dt * step_mask(s + 1, d) * lam[d];
      } else {
        b_lam = model.dt * lam[n + d];
      }
      (*grad)(s, d) = b_lam + 2.0 * control_weight * model.dt * controls(s, d);
    }
  }
  return value;
}

PgdResult pgd_minimize(const std::function<double(const RowMatrixXd&, RowMatrixXd*)>& f,
                       RowMatrixXd initial, int iterations, double step_size,
                       double u_max) {
  RowMatrixXd u = std::move(initial);
  for (int r = 0; r < u.rows(); ++r) {
    u.row(r) = project_control(u.row(r).transpose(), u_max);
  }
  RowMatrixXd grad(u.rows(), u.cols());
  PgdResult best;
  best.objective = std::numeric_limits<double>::infinity();
  const auto eval = [&](int it, RowMatrixXd* g) -> double {
    try {
      return f(u, g);
    } catch (const std::exception& ex) {
      throw std::runtime_error("solver iterate " + std::to_string(it) + ": " +
                               ex.what());
    }
  };
  for (int it = 0; it < iterations; ++it) {
    const double value = eval(it, &grad);
    if (value < best.objective) {
      best.objective = value;
      best.controls = u;
    }
    u -= step_size * grad;
    for (int r = 0; r < u.rows(); ++r) {
      u.row(r) = project_control(u.row(r).transpose(), u_max);
    }
  }
  const double value = eval(iterations, nullptr);
  if (value < best.objective) {
    best.objective = value;
    best.controls = u;
  }
  return best;
}

double kme_rollout_objective(const Eigen::VectorXd& x, const ErrorState& state,
                             const SystemModel& model, const DomainModel& domain,
                             const TargetModel& target, double control_weight,
                             const RowMatrixXd& controls, RowMatrixXd* grad,
                             bool include_metric_term) {
  const int m = target.count();
  const int dim = target.dim();
  const double dt = model.dt;
  const KernelSpec kernel = target.embedding_kernel;
  const double* samples = target.samples.data();
  const double* mu = target.mu_hat_embedding.data();
  const double* e0 = state.e.data();

  Eigen::VectorXd ehat(m);
  const PointObjective obj = [&](const RowMatrixXd& pts,
                                 RowMatrixXd* dpts) -> double {
    if (!include_metric_term) {
      if (dpts) dpts->setZero();
      return 0.0;
    }
    const int horizon = static_cast<int>(pts.rows());
    const double* p = pts.data();
    par::parallel_for(
        static_cast<std::size_t>(m),
        [&](std::size_t i) {
          const double* oi = samples + i * dim;
          double acc = e0[i];
          for (int j = 0; j < horizon; ++j) {
            const double k =
                kernel_value_d2(kernel, squared_distance(p + j * dim, oi, dim));
            acc += dt * (k - mu[i]);
          }
          ehat[static_cast<int>(i)] = acc;
        },
        static_cast<std::size_t>(m) * horizon);
    const double value = par::sum(static_cast<std::size_t>(m), [&](std::size_t i) {
      return ehat[static_cast<int>(i)] * ehat[static_cast<int>(i)];
    }) / m;
    if (dpts) {
      // dJ/dw_j = (2 dt / M) sum_i ehat_i grad_w k(w_j, omega_i)
      const std::size_t width = static_cast<std::size_t>(horizon) * dim;
      par::sum_arrays(
          static_cast<std::size_t>(m), width, dpts->data(),
          [&](std::size_t i, double* acc) {
            const double* oi = samples + i * dim;
            const double ei = ehat[static_cast<int>(i)];
            for (int j = 0; j < horizon; ++j) {
              const double* wj = p + j * dim;
              const double d2 = squared_distance(wj, oi, dim);
              const double c = ei * kernel_grad_coef_d2(kernel, d2);
              for (int d = 0; d < dim; ++d) {
                acc[j * dim + d] += c * (wj[d] - oi[d]);
              }
            }
          },
          static_cast<std::size_t>(m) * horizon);
      *dpts *= 2.0 * dt / m;
    }
    return value;
  };
  return rollout_eval(model, domain, x, controls, control_weight, obj, grad);
}

RowMatrixXd mpc_plan(const Eigen::VectorXd& x, const ErrorState& state,
                     const SystemModel& model, const DomainModel& domain,
                     const TargetModel& target, const PlannerConfig& cfg,
                     MpcWorkspace* workspace) {
  cfg.validate();
  const int horizon = cfg.mode == PlannerConfig::Mode::mpc ? cfg.mpc.horizon : 1;
  const int mdim = model.control_dim();

  RowMatrixXd initial = RowMatrixXd::Zero(horizon, mdim);
  if (workspace && workspace->prev_controls.rows() == horizon &&
      workspace->prev_controls.cols() == mdim) {
    initial.topRows(horizon - 1) = workspace->prev_controls.bottomRows(horizon - 1);
  }

  const auto f = [&](const RowMatrixXd& u, RowMatrixXd* grad) -> double {
    return kme_rollout_objective(x, state, model, domain, target,
                                 cfg.control_weight, u, grad);
  };
  PgdResult result =
      pgd_minimize(f, std::move(initial), cfg.mpc.iterations, cfg.mpc.step_size,
                   model.u_max);
  if (workspace) workspace->prev_controls = result.controls;
  return result.controls;
}

}  // namespace kme
