#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "kme/kernels.hpp"

namespace kme {

struct BoxBounds {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  int dim() const { return static_cast<int>(lo.size()); }
  void validate() const;  // lo < hi per dimension, finite

  static BoxBounds cube(int dim, double lo, double hi);
};

struct TriangleMesh {
  RowMatrixXd vertices;  // V x 3
  Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor> triangles;  // T x 3

  int triangle_count() const { return static_cast<int>(triangles.rows()); }
  double triangle_area(int t) const;
  double total_area() const;
};

/// Closest point on a triangle to p (exact, Ericson's region test).
Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p,
                                          const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b,
                                          const Eigen::Vector3d& c);

/// AABB tree over mesh triangles for closest-point queries.
class MeshProjector {
 public:
  explicit MeshProjector(const TriangleMesh& mesh);
  Eigen::Vector3d closest_point(const Eigen::Vector3d& p) const;

 private:
  struct Node {
    Eigen::Vector3d lo, hi;
    int left = -1, right = -1;   // children, -1 for leaf
    int begin = 0, end = 0;      // triangle range for leaves
  };
  int build(int begin, int end, int depth);
  const TriangleMesh* mesh_;
  std::vector<Node> nodes_;
  std::vector<int> order_;  // triangle indices, partitioned
  std::vector<Eigen::Vector3d> centroids_;
};

/// Coverage domain: an axis-aligned box in R^n or a triangle-mesh surface
/// embedded in R^3. Immutable after construction.
class DomainModel {
 public:
  static DomainModel box(BoxBounds bounds);
  static DomainModel mesh(TriangleMesh mesh);

  bool is_box() const { return data_->mesh == nullptr; }
  bool is_mesh() const { return data_->mesh != nullptr; }
  int ambient_dim() const { return data_->dim; }

  const BoxBounds& box_bounds() const;
  const TriangleMesh& mesh_data() const;

  /// Closest point of the domain: per-dimension clamp for boxes, exact
  /// surface projection (BVH-accelerated) for meshes.
  Eigen::VectorXd project(const Eigen::VectorXd& p) const;

  /// Membership up to tolerance (distance to surface for meshes).
  bool contains(const Eigen::VectorXd& p, double tol = 1e-9) const;

 private:
  struct Data {
    int dim = 0;
    BoxBounds bounds;
    std::unique_ptr<TriangleMesh> mesh;
    std::unique_ptr<MeshProjector> projector;
  };
  std::shared_ptr<const Data> data_;
};

/// Loads a triangulated OBJ or ASCII PLY mesh and rescales it with a single
/// isotropic factor so its bounding box fits normalize_to, centered.
DomainModel load_mesh(const std::string& path, const BoxBounds& normalize_to);

struct MixtureComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

struct TargetSpec {
  enum class Type { uniform, mixture };
  Type type = Type::uniform;
  std::vector<MixtureComponent> components;

  void validate(int dim) const;
};

/// Target distribution q represented by M Monte-Carlo samples, with the
/// empirical mean embedding at those samples and the double-sum constant,
/// one pair per kernel (visitation embedding and objective may differ).
struct TargetModel {
  RowMatrixXd samples;  // M x n
  Eigen::VectorXd mu_hat_embedding;
  Eigen::VectorXd mu_hat_objective;
  double z_embedding = 0.0;
  double z_objective = 0.0;
  KernelSpec embedding_kernel;
  KernelSpec objective_kernel;

  int count() const { return static_cast<int>(samples.rows()); }
  int dim() const { return static_cast<int>(samples.cols()); }
};

/// Draws M i.i.d. samples from the target on the domain. Deterministic in
/// seed. Throws if mixture rejection exceeds 10^6 draws.
TargetModel sample_target(const DomainModel& domain, const TargetSpec& spec,
                          int sample_count, std::uint64_t seed,
                          const KernelSpec& embedding_kernel,
                          const KernelSpec& objective_kernel);

/// Builds a TargetModel around externally supplied sample points.
TargetModel target_from_samples(RowMatrixXd samples,
                                const KernelSpec& embedding_kernel,
                                const KernelSpec& objective_kernel);

/// (1/M) sum_j k(x_i, x_j) for every i, and the grand mean z.
void empirical_embedding(const KernelSpec& kernel, const RowMatrixXd& points,
                         Eigen::VectorXd& mu_hat, double& z);

/// Uniform points on the domain (box volume or mesh surface), deterministic
/// in seed.
RowMatrixXd draw_uniform_points(const DomainModel& domain, int count,
                                std::uint64_t seed);

/// Mean nearest-neighbor distance among sample points.
double mean_nn_spacing(const RowMatrixXd& samples);

}  // namespace kme
