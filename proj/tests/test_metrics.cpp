#include <doctest.h>

#include <cmath>
#include <numeric>

#include "kme/domain.hpp"
#include "kme/metrics.hpp"
#include "kme/reference.hpp"
#include "kme/rng.hpp"
#include "kme/visitation.hpp"

using kme::KernelFamily;
using kme::KernelSpec;
using kme::RowMatrixXd;
using kme::TrajectoryLog;

namespace {

TrajectoryLog log_from_points(const RowMatrixXd& pts, double dt) {
  TrajectoryLog log;
  const int n = static_cast<int>(pts.rows());
  log.times.resize(n);
  for (int i = 0; i < n; ++i) log.times[i] = (i + 1) * dt;
  log.states = pts;
  log.domain_points = pts;
  log.controls = RowMatrixXd::Zero(std::max(0, n - 1), pts.cols());
  return log;
}

kme::TargetModel random_target(int m, int dim, std::uint64_t seed, double h = 0.3) {
  kme::Rng rng(seed);
  RowMatrixXd samples(m, dim);
  for (int i = 0; i < m; ++i) {
    for (int d = 0; d < dim; ++d) samples(i, d) = rng.uniform(-1, 1);
  }
  const KernelSpec kernel{KernelFamily::gaussian, h};
  return kme::target_from_samples(samples, kernel, kernel);
}

}  // namespace

TEST_CASE("point trajectory on the point target scores zero") {
  RowMatrixXd samples(1, 2);
  samples << 0.3, 0.3;
  const KernelSpec kernel{KernelFamily::gaussian, 0.5};
  const auto target = kme::target_from_samples(samples, kernel, kernel);
  const auto log = log_from_points(samples, 0.1);
  CHECK(kme::emmd_oracle(log, target) == doctest::Approx(0.0));
}

TEST_CASE("single-step oracle matches the hand-evaluated sums") {
  RowMatrixXd samples(2, 1);
  samples << 0.25, 0.75;
  const KernelSpec kernel{KernelFamily::gaussian, 0.5};
  const auto target = kme::target_from_samples(samples, kernel, kernel);
  RowMatrixXd traj(1, 1);
  traj << 0.25;
  const auto log = log_from_points(traj, 0.1);
  const double e5 = std::exp(-0.5);
  const double expected = 1.0 - (1.0 + e5) + (2.0 + 2.0 * e5) / 4.0;
  CHECK(kme::emmd_oracle(log, target) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.19674).epsilon(1e-4));
}

TEST_CASE("oracle is nonnegative and matches the serial reference") {
  kme::Rng rng(5);
  for (int trial = 0; trial < 15; ++trial) {
    const int m = 2 + static_cast<int>(rng.index(40));
    const int n = 1 + static_cast<int>(rng.index(60));
    const auto target = random_target(m, 2, rng.next_u64());
    RowMatrixXd pts(n, 2);
    for (int i = 0; i < n; ++i) {
      pts.row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1);
    }
    const auto log = log_from_points(pts, 0.1);
    const double value = kme::emmd_oracle(log, target);
    CHECK(value >= -1e-9);
    CHECK(value ==
          doctest::Approx(kme::reference::emmd_oracle(log, target)).epsilon(1e-12));
  }
}

TEST_CASE("a trajectory matching the sample multiset is indiscernible") {
  const auto target = random_target(25, 2, 77);
  // visit the samples in a permuted order, one step each
  std::vector<int> perm(25);
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[3], perm[20]);
  std::swap(perm[0], perm[11]);
  RowMatrixXd pts(25, 2);
  for (int i = 0; i < 25; ++i) pts.row(i) = target.samples.row(perm[i]);
  const auto log = log_from_points(pts, 0.2);
  CHECK(kme::emmd_oracle(log, target) < 1e-9);
}

TEST_CASE("rkhs error norm equals t^2 times the kernel-form metric") {
  kme::Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 3 + static_cast<int>(rng.index(30));
    const int n = 2 + static_cast<int>(rng.index(50));
    const double dt = 0.05 + rng.uniform01() * 0.1;
    const auto target = random_target(m, 2, rng.next_u64());
    RowMatrixXd pts(n, 2);
    for (int i = 0; i < n; ++i) {
      pts.row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1);
    }
    const auto log = log_from_points(pts, dt);
    const double t_final = n * dt;
    const double lhs = kme::rkhs_error_norm2(log, target, dt);
    const double rhs = t_final * t_final * kme::emmd_oracle(log, target);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
  }
}

TEST_CASE("coverage trivial cases") {
  const auto target = random_target(10, 2, 42);
  RowMatrixXd far(1, 2);
  far << 50.0, 50.0;
  CHECK(kme::coverage_fraction(log_from_points(far, 0.1), target, 1e-6) == 0.0);
  const auto visit_all = log_from_points(target.samples, 0.1);
  CHECK(kme::coverage_fraction(visit_all, target, 0.01) == 1.0);
}

TEST_CASE("coverage is monotone in prefix length and radius") {
  const auto target = random_target(40, 2, 43);
  kme::Rng rng(44);
  RowMatrixXd pts(30, 2);
  for (int i = 0; i < 30; ++i) {
    pts.row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1);
  }
  double prev = 0.0;
  for (int n = 1; n <= 30; n += 3) {
    const auto log = log_from_points(pts.topRows(n), 0.1);
    const double cov = kme::coverage_fraction(log, target, 0.25);
    CHECK(cov >= prev);
    prev = cov;
  }
  const auto log = log_from_points(pts, 0.1);
  double prev_r = 0.0;
  for (double r = 0.05; r <= 1.0; r += 0.05) {
    const double cov = kme::coverage_fraction(log, target, r);
    CHECK(cov >= prev_r);
    prev_r = cov;
  }
}

TEST_CASE("histogram of a single visit is the kernel row") {
  RowMatrixXd samples(1, 2);
  samples << 0.1, 0.9;
  const KernelSpec kernel{KernelFamily::gaussian, 0.5};
  const auto target = kme::target_from_samples(samples, kernel, kernel);
  const auto log = log_from_points(samples, 0.1);
  const Eigen::VectorXd hist = kme::time_averaged_histogram(log, target);
  CHECK(hist[0] == doctest::Approx(1.0));
}

TEST_CASE("dense uniform sweep drives the histogram toward the target embedding") {
  // 1D box [0,1]: N=1000 sweep positions, h=0.2. The gap to mu_hat is the
  // Monte-Carlo error of the target embedding, so it shrinks with M.
  const int n = 1000;
  RowMatrixXd sweep(n, 1);
  for (int i = 0; i < n; ++i) sweep(i, 0) = (i + 0.5) / n;
  const KernelSpec kernel{KernelFamily::gaussian, 0.2};
  const auto log = log_from_points(sweep, 0.01);

  kme::Rng rng(3);
  const auto max_gap = [&](int m) {
    RowMatrixXd samples(m, 1);
    for (int i = 0; i < m; ++i) samples(i, 0) = rng.uniform01();
    const auto target = kme::target_from_samples(samples, kernel, kernel);
    const Eigen::VectorXd hist = kme::time_averaged_histogram(log, target);
    return (hist - target.mu_hat_embedding).lpNorm<Eigen::Infinity>();
  };
  CHECK(max_gap(100) < 0.1);
  CHECK(max_gap(1000) < 0.05);
}

TEST_CASE("non-uniform spacing is rejected") {
  RowMatrixXd pts(3, 1);
  pts << 0.0, 0.1, 0.2;
  auto log = log_from_points(pts, 0.1);
  log.times[2] += 0.05;
  CHECK_THROWS_AS((void)log.uniform_dt(), std::invalid_argument);
  CHECK_THROWS_AS((void)kme::emmd_oracle(TrajectoryLog{}, random_target(3, 1, 1)),
                  std::invalid_argument);
}
