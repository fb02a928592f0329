#include "kme/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace kme {

SystemKind system_kind_from_string(const std::string& name) {
  if (name == "single_integrator") return SystemKind::single_integrator;
  if (name == "double_integrator") return SystemKind::double_integrator;
  throw std::invalid_argument("unknown system '" + name +
                              "' (expected single_integrator|double_integrator)");
}

SigmaKind sigma_kind_from_string(const std::string& name) {
  if (name == "identity") return SigmaKind::identity;
  if (name == "project") return SigmaKind::project;
  throw std::invalid_argument("unknown sigma '" + name +
                              "' (expected identity|project)");
}

void SystemModel::validate() const {
  if (!(u_max > 0.0) || !std::isfinite(u_max)) {
    throw std::invalid_argument("u_max must be finite and > 0");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("dt must be finite and > 0");
  }
  if (space_dim < 1) throw std::invalid_argument("space dimension must be >= 1");
}

Eigen::VectorXd project_control(const Eigen::VectorXd& u_raw, double u_max) {
  const double norm = u_raw.norm();
  if (norm <= u_max) return u_raw;
  return u_raw * (u_max / norm);
}

Eigen::VectorXd step(const SystemModel& model, const DomainModel& domain,
                     const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  if (x.size() != model.state_dim() || u.size() != model.control_dim()) {
    throw std::invalid_argument("state/control dimension mismatch");
  }
  if (u.norm() > model.u_max + 1e-12) {
    throw std::invalid_argument("control bound violated");
  }
  const int n = model.space_dim;
  Eigen::VectorXd next(x.size());
  if (model.kind == SystemKind::single_integrator) {
    next = x + model.dt * u;
  } else {
    next.head(n) = x.head(n) + model.dt * x.tail(n);
    next.tail(n) = x.tail(n) + model.dt * u;
  }
  if (model.constrain_to_domain) {
    next.head(n) = domain.project(next.head(n));
  }
  return next;
}

Eigen::VectorXd sigma_map(const SystemModel& model, const DomainModel& domain,
                          const Eigen::VectorXd& x) {
  if (x.size() != model.state_dim()) {
    throw std::invalid_argument("state dimension mismatch");
  }
  const Eigen::VectorXd pos = x.head(model.space_dim);
  if (model.sigma == SigmaKind::project) {
    return domain.project(pos);
  }
  if (domain.is_box()) {
    return pos.cwiseMax(domain.box_bounds().lo).cwiseMin(domain.box_bounds().hi);
  }
  return pos;
}

}  // namespace kme
