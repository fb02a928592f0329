#pragma once

#include <Eigen/Core>

#include "kme/domain.hpp"

namespace kme {

enum class SystemKind { single_integrator, double_integrator };
enum class SigmaKind { identity, project };

SystemKind system_kind_from_string(const std::string& name);
SigmaKind sigma_kind_from_string(const std::string& name);

/// Control-affine system: single integrator (state = position) or double
/// integrator (state = position, velocity; control = acceleration), with the
/// state-to-domain map sigma and a norm-ball control set.
struct SystemModel {
  SystemKind kind = SystemKind::single_integrator;
  int space_dim = 2;  // dimension of the coverage position
  double u_max = 1.0;
  double dt = 0.1;
  SigmaKind sigma = SigmaKind::identity;
  bool constrain_to_domain = false;

  int state_dim() const {
    return kind == SystemKind::single_integrator ? space_dim : 2 * space_dim;
  }
  int control_dim() const { return space_dim; }
  void validate() const;
};

/// Exact projection onto {‖u‖ <= u_max}: radial scaling when outside.
Eigen::VectorXd project_control(const Eigen::VectorXd& u_raw, double u_max);

/// One explicit-Euler step. With constrain_to_domain the position part is
/// re-projected onto the domain. Throws if ‖u‖ exceeds u_max beyond 1e-12.
Eigen::VectorXd step(const SystemModel& model, const DomainModel& domain,
                     const Eigen::VectorXd& x, const Eigen::VectorXd& u);

/// Visited domain point for a state: position components clamped to the box
/// (identity sigma) or projected onto the mesh surface.
Eigen::VectorXd sigma_map(const SystemModel& model, const DomainModel& domain,
                          const Eigen::VectorXd& x);

}  // namespace kme
