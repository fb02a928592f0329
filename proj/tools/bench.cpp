// Benchmarks the OpenMP compute kernels against the serial reference
// implementations: Gram/embedding sums, the O(N^2) EMMD oracle, batch error
// recomputation, and one receding-horizon solver step.

#include <chrono>
#include <cstdio>
#include <functional>

#include "kme/controller.hpp"
#include "kme/domain.hpp"
#include "kme/metrics.hpp"
#include "kme/reference.hpp"
#include "kme/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using kme::RowMatrixXd;

namespace {

volatile double g_sink = 0.0;

// The result of every rep feeds the volatile sink so the call cannot be
// hoisted out of the timing loop.
double time_of(const std::function<double()>& fn, int reps) {
  g_sink += fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) g_sink += fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

RowMatrixXd random_points(int n, int dim, kme::Rng& rng) {
  RowMatrixXd pts(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < dim; ++d) pts(i, d) = rng.uniform(-1, 1);
  }
  return pts;
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-28s %10.3f ms %10.3f ms %7.2fx\n", name, serial * 1e3,
              parallel * 1e3, serial / parallel);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP not enabled; parallel path runs serially\n");
#endif
  std::printf("%-28s %13s %13s %8s\n", "kernel", "serial", "parallel", "speedup");

  kme::Rng rng(42);
  const kme::KernelSpec kernel{kme::KernelFamily::gaussian, 0.2};

  {
    const RowMatrixXd pts = random_points(2000, 3, rng);
    Eigen::VectorXd mu;
    double z;
    const double serial = time_of(
        [&] {
          kme::reference::empirical_embedding(kernel, pts, mu, z);
          return z;
        },
        3);
    const double parallel = time_of(
        [&] {
          kme::empirical_embedding(kernel, pts, mu, z);
          return z;
        },
        3);
    report("empirical_embedding M=2000", serial, parallel);
  }

  {
    kme::TargetModel target =
        kme::target_from_samples(random_points(500, 3, rng), kernel, kernel);
    kme::TrajectoryLog log;
    const int n = 4000;
    log.times.resize(n);
    for (int i = 0; i < n; ++i) log.times[i] = 0.1 * (i + 1);
    log.domain_points = random_points(n, 3, rng);
    log.states = log.domain_points;
    log.controls = RowMatrixXd::Zero(n - 1, 3);
    const double serial =
        time_of([&] { return kme::reference::emmd_oracle(log, target); }, 3);
    const double parallel = time_of([&] { return kme::emmd_oracle(log, target); }, 3);
    report("emmd_oracle N=4000 M=500", serial, parallel);

    const double serial_be = time_of(
        [&] { return kme::reference::batch_error(log, target, 0.1).sum(); }, 3);
    const double parallel_be =
        time_of([&] { return kme::batch_error(log, target, 0.1).sum(); }, 3);
    report("batch_error N=4000 M=500", serial_be, parallel_be);
  }

  {
    // One projected-gradient solve; the parallel path chunks the per-sample
    // sums inside the rollout.
    kme::TargetModel target =
        kme::target_from_samples(random_points(3000, 2, rng), kernel, kernel);
    kme::SystemModel model;
    model.kind = kme::SystemKind::single_integrator;
    model.space_dim = 2;
    model.u_max = 1.0;
    model.dt = 0.1;
    const kme::DomainModel domain = kme::DomainModel::box(kme::BoxBounds::cube(2, -1, 1));
    kme::ErrorState state = kme::error_init(target, model.dt);
    for (int i = 0; i < 50; ++i) {
      Eigen::VectorXd w(2);
      w << rng.uniform(-1, 1), rng.uniform(-1, 1);
      kme::error_step(state, target, w);
    }
    kme::PlannerConfig cfg;
    cfg.mode = kme::PlannerConfig::Mode::mpc;
    cfg.mpc = {40, 10, 0.5};
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
#ifdef _OPENMP
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const double serial = time_of(
        [&] { return kme::mpc_plan(x, state, model, domain, target, cfg).sum(); },
        3);
    omp_set_num_threads(saved);
#else
    const double serial = time_of(
        [&] { return kme::mpc_plan(x, state, model, domain, target, cfg).sum(); },
        3);
#endif
    const double parallel = time_of(
        [&] { return kme::mpc_plan(x, state, model, domain, target, cfg).sum(); },
        3);
    report("mpc_plan H=40 M=3000", serial, parallel);
  }
  return 0;
}
