#include "kme/visitation.hpp"

#include <stdexcept>

#include "kme/parallel.hpp"

namespace kme {

ErrorState error_init(const TargetModel& target, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("error state dt must be > 0");
  ErrorState state;
  state.e = Eigen::VectorXd::Zero(target.count());
  state.t = 0.0;
  state.dt = dt;
  return state;
}

void error_step(ErrorState& state, const TargetModel& target,
                const Eigen::VectorXd& w) {
  const int m = target.count();
  if (state.e.size() != m) {
    throw std::invalid_argument("error state size does not match target");
  }
  if (w.size() != target.dim()) {
    throw std::invalid_argument("visited point dimension does not match target");
  }
  const int dim = target.dim();
  const double dt = state.dt;
  const double* samples = target.samples.data();
  const double* wp = w.data();
  const KernelSpec kernel = target.embedding_kernel;
  const double* mu = target.mu_hat_embedding.data();
  double* e = state.e.data();
  par::parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
    const double k =
        kernel_value_d2(kernel, squared_distance(wp, samples + i * dim, dim));
    e[i] += dt * (k - mu[i]);
  });
  state.t += dt;
}

double error_metric(const ErrorState& state, const TargetModel& target) {
  const int m = target.count();
  if (state.e.size() != m) {
    throw std::invalid_argument("error state size does not match target");
  }
  const double* e = state.e.data();
  return par::sum(static_cast<std::size_t>(m),
                  [&](std::size_t i) { return e[i] * e[i]; }) /
         m;
}

}  // namespace kme
