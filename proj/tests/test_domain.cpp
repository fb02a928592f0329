#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "kme/domain.hpp"
#include "kme/reference.hpp"
#include "kme/rng.hpp"

using kme::BoxBounds;
using kme::DomainModel;
using kme::KernelFamily;
using kme::KernelSpec;
using kme::RowMatrixXd;
using kme::TargetSpec;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path.string();
}

const char* kUnitCubeObj =
    "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
    "v 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n"
    "f 1 2 3 4\nf 5 6 7 8\nf 1 2 6 5\nf 2 3 7 6\nf 3 4 8 7\nf 4 1 5 8\n";

std::string cube_obj(double lo, double hi, double y_hi, double z_hi) {
  char line[64];
  std::string obj;
  const double xs[2] = {lo, hi};
  const double ys[2] = {lo, y_hi};
  const double zs[2] = {lo, z_hi};
  const int corners[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                             {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  for (const auto& c : corners) {
    std::snprintf(line, sizeof(line), "v %g %g %g\n", xs[c[0]], ys[c[1]], zs[c[2]]);
    obj += line;
  }
  obj += "f 1 2 3 4\nf 5 6 7 8\nf 1 2 6 5\nf 2 3 7 6\nf 3 4 8 7\nf 4 1 5 8\n";
  return obj;
}

DomainModel single_triangle() {
  kme::TriangleMesh mesh;
  mesh.vertices.resize(3, 3);
  mesh.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  mesh.triangles.resize(1, 3);
  mesh.triangles << 0, 1, 2;
  return DomainModel::mesh(std::move(mesh));
}

}  // namespace

TEST_CASE("box bounds validation") {
  BoxBounds bad;
  bad.lo = Eigen::Vector2d(0, 1);
  bad.hi = Eigen::Vector2d(1, 1);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_NOTHROW(BoxBounds::cube(3, -0.5, 0.5).validate());
}

TEST_CASE("single-sample target is trivially embedded") {
  const DomainModel domain = DomainModel::box(BoxBounds::cube(1, 0, 1));
  const KernelSpec kernel{KernelFamily::gaussian, 0.5};
  const kme::TargetModel target =
      kme::sample_target(domain, TargetSpec{}, 1, 7, kernel, kernel);
  CHECK(target.count() == 1);
  CHECK(target.samples(0, 0) >= 0.0);
  CHECK(target.samples(0, 0) <= 1.0);
  CHECK(target.mu_hat_objective[0] == doctest::Approx(1.0));
  CHECK(target.z_objective == doctest::Approx(1.0));
}

TEST_CASE("injected two-point target matches the hand-computed embedding") {
  RowMatrixXd samples(2, 1);
  samples << 0.25, 0.75;
  const KernelSpec kernel{KernelFamily::gaussian, 0.5};
  const kme::TargetModel target = kme::target_from_samples(samples, kernel, kernel);
  const double expected = (1.0 + std::exp(-0.5)) / 2.0;
  CHECK(target.mu_hat_objective[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(target.mu_hat_objective[1] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(target.z_objective == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("embedding recomputation matches stored values exactly") {
  const DomainModel domain = DomainModel::box(BoxBounds::cube(2, -1, 1));
  const KernelSpec ek{KernelFamily::gaussian, 0.3};
  const KernelSpec ok{KernelFamily::laplace, 0.4};
  const kme::TargetModel target =
      kme::sample_target(domain, TargetSpec{}, 64, 3, ek, ok);
  Eigen::VectorXd mu;
  double z;
  kme::empirical_embedding(ek, target.samples, mu, z);
  CHECK((mu - target.mu_hat_embedding).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(z == target.z_embedding);
  Eigen::VectorXd mu_ref;
  double z_ref;
  kme::reference::empirical_embedding(ek, target.samples, mu_ref, z_ref);
  CHECK((mu - mu_ref).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("sampling is reproducible and seed-sensitive") {
  const DomainModel domain = DomainModel::box(BoxBounds::cube(3, -2, 2));
  const KernelSpec kernel{KernelFamily::gaussian, 0.5};
  const auto a = kme::sample_target(domain, TargetSpec{}, 32, 11, kernel, kernel);
  const auto b = kme::sample_target(domain, TargetSpec{}, 32, 11, kernel, kernel);
  const auto c = kme::sample_target(domain, TargetSpec{}, 32, 12, kernel, kernel);
  CHECK((a.samples - b.samples).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.samples - c.samples).lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("uniform box sample means approach the center") {
  const DomainModel domain = DomainModel::box(BoxBounds::cube(2, 0, 1));
  const KernelSpec kernel{KernelFamily::gaussian, 0.5};
  const int m = 4000;
  const auto target = kme::sample_target(domain, TargetSpec{}, m, 5, kernel, kernel);
  const double sigma = std::sqrt(1.0 / 12.0);
  for (int d = 0; d < 2; ++d) {
    const double mean = target.samples.col(d).mean();
    CHECK(std::abs(mean - 0.5) < 3.0 * sigma / std::sqrt(static_cast<double>(m)));
  }
}

TEST_CASE("mesh sampling stays on the triangle and centers correctly") {
  const DomainModel domain = single_triangle();
  const KernelSpec kernel{KernelFamily::gaussian, 0.5};
  const auto target = kme::sample_target(domain, TargetSpec{}, 1000, 9, kernel, kernel);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (int i = 0; i < target.count(); ++i) {
    const double x = target.samples(i, 0);
    const double y = target.samples(i, 1);
    const double z = target.samples(i, 2);
    REQUIRE(z == 0.0);
    REQUIRE(x >= 0.0);
    REQUIRE(y >= 0.0);
    REQUIRE(x + y <= 1.0 + 1e-12);
    mean += target.samples.row(i).transpose();
  }
  mean /= target.count();
  CHECK((mean - Eigen::Vector3d(1.0 / 3, 1.0 / 3, 0)).norm() < 0.03);
}

TEST_CASE("mixture sampling respects weights and the box") {
  const DomainModel domain = DomainModel::box(BoxBounds::cube(2, -1, 1));
  TargetSpec spec;
  spec.type = TargetSpec::Type::mixture;
  kme::MixtureComponent a, b;
  a.weight = 0.8;
  a.mean = Eigen::Vector2d(-0.5, -0.5);
  a.cov = 0.01 * Eigen::Matrix2d::Identity();
  b.weight = 0.2;
  b.mean = Eigen::Vector2d(0.5, 0.5);
  b.cov = 0.01 * Eigen::Matrix2d::Identity();
  spec.components = {a, b};
  const KernelSpec kernel{KernelFamily::gaussian, 0.3};
  const auto target = kme::sample_target(domain, spec, 2000, 21, kernel, kernel);
  int near_a = 0;
  for (int i = 0; i < target.count(); ++i) {
    const Eigen::Vector2d p = target.samples.row(i);
    REQUIRE(domain.contains(p));
    if ((p - Eigen::Vector2d(a.mean)).norm() < (p - Eigen::Vector2d(b.mean)).norm()) {
      ++near_a;
    }
  }
  CHECK(near_a > 1400);
  CHECK(near_a < 1800);

  TargetSpec far;
  far.type = TargetSpec::Type::mixture;
  kme::MixtureComponent c;
  c.weight = 1.0;
  c.mean = Eigen::Vector2d(100, 100);
  c.cov = 0.0001 * Eigen::Matrix2d::Identity();
  far.components = {c};
  CHECK_THROWS_WITH_AS(
      (void)kme::sample_target(domain, far, 10, 1, kernel, kernel),
      "target has negligible mass on domain", std::runtime_error);
}

TEST_CASE("mixture weights must sum to one") {
  TargetSpec spec;
  spec.type = TargetSpec::Type::mixture;
  kme::MixtureComponent c;
  c.weight = 0.5;
  c.mean = Eigen::Vector2d(0, 0);
  c.cov = Eigen::Matrix2d::Identity();
  spec.components = {c};
  CHECK_THROWS_AS(spec.validate(2), std::invalid_argument);
}

TEST_CASE("OBJ cube loads and normalizes to exactly +-0.5") {
  const std::string path = write_temp("kme_cube.obj", kUnitCubeObj);
  const DomainModel domain = kme::load_mesh(path, BoxBounds::cube(3, -0.5, 0.5));
  const auto& mesh = domain.mesh_data();
  CHECK(mesh.triangle_count() == 12);  // fan-triangulated quads
  for (int v = 0; v < mesh.vertices.rows(); ++v) {
    for (int d = 0; d < 3; ++d) {
      CHECK(std::abs(mesh.vertices(v, d)) == doctest::Approx(0.5));
    }
  }
}

TEST_CASE("normalization is translation and scale invariant") {
  const std::string p1 = write_temp("kme_cube1.obj", kUnitCubeObj);
  const std::string p2 = write_temp("kme_cube2.obj", cube_obj(9, 11, 11, 11));
  const auto d1 = kme::load_mesh(p1, BoxBounds::cube(3, -0.5, 0.5));
  const auto d2 = kme::load_mesh(p2, BoxBounds::cube(3, -0.5, 0.5));
  CHECK((d1.mesh_data().vertices - d2.mesh_data().vertices).lpNorm<Eigen::Infinity>() <
        1e-12);
}

TEST_CASE("anisotropic meshes scale isotropically") {
  // 2:1:1 extents: the longest axis spans the target box exactly
  const std::string path = write_temp("kme_box211.obj", cube_obj(0, 2, 1, 1));
  const auto domain = kme::load_mesh(path, BoxBounds::cube(3, -0.5, 0.5));
  const auto& verts = domain.mesh_data().vertices;
  CHECK(verts.col(0).minCoeff() == doctest::Approx(-0.5));
  CHECK(verts.col(0).maxCoeff() == doctest::Approx(0.5));
  CHECK(verts.col(1).minCoeff() == doctest::Approx(-0.25));
  CHECK(verts.col(1).maxCoeff() == doctest::Approx(0.25));
  CHECK(verts.col(2).minCoeff() == doctest::Approx(-0.25));
  CHECK(verts.col(2).maxCoeff() == doctest::Approx(0.25));
}

TEST_CASE("ASCII PLY loads") {
  const std::string ply =
      "ply\nformat ascii 1.0\n"
      "element vertex 4\nproperty float x\nproperty float y\nproperty float z\n"
      "element face 2\nproperty list uchar int vertex_indices\nend_header\n"
      "0 0 0\n1 0 0\n1 1 0\n0 1 0\n"
      "3 0 1 2\n3 0 2 3\n";
  const std::string path = write_temp("kme_quad.ply", ply);
  const auto domain = kme::load_mesh(path, BoxBounds::cube(3, -0.5, 0.5));
  CHECK(domain.mesh_data().triangle_count() == 2);
}

TEST_CASE("mesh loader error paths") {
  CHECK_THROWS_AS(
      (void)kme::load_mesh("/nonexistent/mesh.obj", BoxBounds::cube(3, -0.5, 0.5)),
      std::runtime_error);
  const std::string degenerate =
      write_temp("kme_degen.obj", "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n");
  CHECK_THROWS_AS((void)kme::load_mesh(degenerate, BoxBounds::cube(3, -0.5, 0.5)),
                  std::runtime_error);
}

TEST_CASE("box projection clamps") {
  const DomainModel domain = DomainModel::box(BoxBounds::cube(2, 0, 1));
  CHECK((domain.project(Eigen::Vector2d(0.5, 0.5)) - Eigen::Vector2d(0.5, 0.5)).norm() ==
        0.0);
  CHECK((domain.project(Eigen::Vector2d(1.5, -0.2)) - Eigen::Vector2d(1.0, 0.0)).norm() ==
        0.0);
}

TEST_CASE("triangle projection drops the normal component") {
  const DomainModel domain = single_triangle();
  Eigen::VectorXd p(3);
  p << 0.25, 0.25, 1.0;
  CHECK((domain.project(p) - Eigen::Vector3d(0.25, 0.25, 0.0)).norm() < 1e-15);
}

TEST_CASE("BVH projection matches brute force on the blob mesh") {
  const std::string path = std::string(KME_SOURCE_DIR) + "/assets/blob.obj";
  const auto domain = kme::load_mesh(path, BoxBounds::cube(3, -0.5, 0.5));
  const auto& mesh = domain.mesh_data();
  kme::Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    Eigen::VectorXd p(3);
    p << rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8);
    const Eigen::Vector3d fast = domain.project(p);
    const Eigen::Vector3d brute = kme::reference::project_to_mesh(mesh, p);
    CHECK(std::abs((fast - Eigen::Vector3d(p)).norm() -
                   (brute - Eigen::Vector3d(p)).norm()) < 1e-12);
  }
}

TEST_CASE("projection is idempotent") {
  const std::string path = std::string(KME_SOURCE_DIR) + "/assets/blob.obj";
  const auto domain = kme::load_mesh(path, BoxBounds::cube(3, -0.5, 0.5));
  kme::Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd p(3);
    p << rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1);
    const Eigen::VectorXd q = domain.project(p);
    CHECK((domain.project(q) - q).norm() < 1e-12);
  }
}

TEST_CASE("uniform points on a mesh stay on the surface") {
  const std::string path = std::string(KME_SOURCE_DIR) + "/assets/blob.obj";
  const auto domain = kme::load_mesh(path, BoxBounds::cube(3, -0.5, 0.5));
  const RowMatrixXd pts = kme::draw_uniform_points(domain, 200, 5);
  for (int i = 0; i < pts.rows(); ++i) {
    CHECK(domain.contains(pts.row(i).transpose(), 1e-9));
  }
}

TEST_CASE("mean nearest-neighbor spacing of a grid") {
  RowMatrixXd grid(9, 2);
  int k = 0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) grid.row(k++) << i * 0.5, j * 0.5;
  }
  CHECK(kme::mean_nn_spacing(grid) == doctest::Approx(0.5));
}
