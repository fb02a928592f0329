#include "kme/domain.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "kme/parallel.hpp"
#include "kme/rng.hpp"

namespace kme {

void BoxBounds::validate() const {
  if (lo.size() == 0 || lo.size() != hi.size()) {
    throw std::invalid_argument("box bounds must be nonempty and consistent");
  }
  for (int i = 0; i < lo.size(); ++i) {
    if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || !(lo[i] < hi[i])) {
      throw std::invalid_argument("box bounds require lo < hi per dimension");
    }
  }
}

BoxBounds BoxBounds::cube(int dim, double lo, double hi) {
  BoxBounds b;
  b.lo = Eigen::VectorXd::Constant(dim, lo);
  b.hi = Eigen::VectorXd::Constant(dim, hi);
  return b;
}

double TriangleMesh::triangle_area(int t) const {
  const Eigen::Vector3d a = vertices.row(triangles(t, 0));
  const Eigen::Vector3d b = vertices.row(triangles(t, 1));
  const Eigen::Vector3d c = vertices.row(triangles(t, 2));
  return 0.5 * (b - a).cross(c - a).norm();
}

double TriangleMesh::total_area() const {
  double area = 0.0;
  for (int t = 0; t < triangle_count(); ++t) area += triangle_area(t);
  return area;
}

Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p,
                                          const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b,
                                          const Eigen::Vector3d& c) {
  const Eigen::Vector3d ab = b - a;
  const Eigen::Vector3d ac = c - a;
  const Eigen::Vector3d ap = p - a;

  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return a + v * ab;
  }

  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return a + w * ac;
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return b + w * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return a + ab * v + ac * w;
}

namespace {

double aabb_distance2(const Eigen::Vector3d& p, const Eigen::Vector3d& lo,
                      const Eigen::Vector3d& hi) {
  double d2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    double d = 0.0;
    if (p[i] < lo[i]) d = lo[i] - p[i];
    if (p[i] > hi[i]) d = p[i] - hi[i];
    d2 += d * d;
  }
  return d2;
}

}  // namespace

MeshProjector::MeshProjector(const TriangleMesh& mesh) : mesh_(&mesh) {
  const int nt = mesh.triangle_count();
  order_.resize(nt);
  centroids_.resize(nt);
  for (int t = 0; t < nt; ++t) {
    order_[t] = t;
    centroids_[t] = (mesh.vertices.row(mesh.triangles(t, 0)) +
                     mesh.vertices.row(mesh.triangles(t, 1)) +
                     mesh.vertices.row(mesh.triangles(t, 2))) /
                    3.0;
  }
  nodes_.reserve(static_cast<std::size_t>(2 * nt));
  build(0, nt, 0);
}

int MeshProjector::build(int begin, int end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();

  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (int i = begin; i < end; ++i) {
    const int t = order_[i];
    for (int v = 0; v < 3; ++v) {
      const Eigen::Vector3d vert = mesh_->vertices.row(mesh_->triangles(t, v));
      lo = lo.cwiseMin(vert);
      hi = hi.cwiseMax(vert);
    }
  }
  nodes_[id].lo = lo;
  nodes_[id].hi = hi;

  const int count = end - begin;
  if (count <= 4 || depth > 40) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }

  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const int mid = begin + count / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](int ta, int tb) {
                     return centroids_[ta][axis] < centroids_[tb][axis];
                   });

  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

Eigen::Vector3d MeshProjector::closest_point(const Eigen::Vector3d& p) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  Eigen::Vector3d best = p;

  // Depth-first with nearer child first; prune on box distance.
  int stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (aabb_distance2(p, node.lo, node.hi) >= best_d2) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int t = order_[i];
        const Eigen::Vector3d q = closest_point_on_triangle(
            p, mesh_->vertices.row(mesh_->triangles(t, 0)),
            mesh_->vertices.row(mesh_->triangles(t, 1)),
            mesh_->vertices.row(mesh_->triangles(t, 2)));
        const double d2 = (q - p).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = q;
        }
      }
      continue;
    }
    const double dl = aabb_distance2(p, nodes_[node.left].lo, nodes_[node.left].hi);
    const double dr = aabb_distance2(p, nodes_[node.right].lo, nodes_[node.right].hi);
    // Push the farther child first so the nearer one is explored next.
    if (dl <= dr) {
      if (top < 62) stack[top++] = node.right;
      if (top < 62) stack[top++] = node.left;
    } else {
      if (top < 62) stack[top++] = node.left;
      if (top < 62) stack[top++] = node.right;
    }
  }
  return best;
}

DomainModel DomainModel::box(BoxBounds bounds) {
  bounds.validate();
  auto data = std::make_shared<Data>();
  data->dim = bounds.dim();
  data->bounds = std::move(bounds);
  DomainModel d;
  d.data_ = std::move(data);
  return d;
}

DomainModel DomainModel::mesh(TriangleMesh mesh) {
  if (mesh.vertices.cols() != 3) {
    throw std::invalid_argument("mesh vertices must be 3D");
  }
  if (mesh.triangle_count() < 1) {
    throw std::invalid_argument("mesh must contain at least one triangle");
  }
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    for (int v = 0; v < 3; ++v) {
      const int idx = mesh.triangles(t, v);
      if (idx < 0 || idx >= mesh.vertices.rows()) {
        throw std::invalid_argument("mesh triangle index out of range");
      }
    }
  }
  if (mesh.total_area() <= 0.0) {
    throw std::invalid_argument("mesh has zero surface area");
  }
  auto data = std::make_shared<Data>();
  data->dim = 3;
  data->mesh = std::make_unique<TriangleMesh>(std::move(mesh));
  data->projector = std::make_unique<MeshProjector>(*data->mesh);
  DomainModel d;
  d.data_ = std::move(data);
  return d;
}

const BoxBounds& DomainModel::box_bounds() const {
  if (!is_box()) throw std::logic_error("domain is not a box");
  return data_->bounds;
}

const TriangleMesh& DomainModel::mesh_data() const {
  if (!is_mesh()) throw std::logic_error("domain is not a mesh");
  return *data_->mesh;
}

Eigen::VectorXd DomainModel::project(const Eigen::VectorXd& p) const {
  if (p.size() != data_->dim) {
    throw std::invalid_argument("point dimension does not match domain");
  }
  for (int i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p[i])) throw std::invalid_argument("non-finite point");
  }
  if (is_box()) {
    return p.cwiseMax(data_->bounds.lo).cwiseMin(data_->bounds.hi);
  }
  return data_->projector->closest_point(Eigen::Vector3d(p));
}

bool DomainModel::contains(const Eigen::VectorXd& p, double tol) const {
  if (p.size() != data_->dim) return false;
  if (is_box()) {
    for (int i = 0; i < p.size(); ++i) {
      if (p[i] < data_->bounds.lo[i] - tol || p[i] > data_->bounds.hi[i] + tol) {
        return false;
      }
    }
    return true;
  }
  const Eigen::Vector3d q = data_->projector->closest_point(Eigen::Vector3d(p));
  return (q - Eigen::Vector3d(p)).norm() <= tol;
}

namespace {

TriangleMesh parse_obj(std::istream& in) {
  std::vector<Eigen::Vector3d> verts;
  std::vector<Eigen::Vector3i> tris;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Eigen::Vector3d v;
      if (!(ls >> v[0] >> v[1] >> v[2])) {
        throw std::runtime_error("malformed OBJ vertex line: " + line);
      }
      verts.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        // "i", "i/j", "i//k", "i/j/k"; negative indices are relative.
        const std::string first = tok.substr(0, tok.find('/'));
        int i = std::stoi(first);
        if (i < 0) i = static_cast<int>(verts.size()) + i + 1;
        if (i < 1 || i > static_cast<int>(verts.size())) {
          throw std::runtime_error("OBJ face index out of range: " + line);
        }
        idx.push_back(i - 1);
      }
      if (idx.size() < 3) {
        throw std::runtime_error("OBJ face with fewer than 3 vertices: " + line);
      }
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        tris.emplace_back(idx[0], idx[k], idx[k + 1]);
      }
    }
  }
  TriangleMesh mesh;
  mesh.vertices.resize(static_cast<int>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(static_cast<int>(i)) = verts[i];
  mesh.triangles.resize(static_cast<int>(tris.size()), 3);
  for (std::size_t i = 0; i < tris.size(); ++i) mesh.triangles.row(static_cast<int>(i)) = tris[i];
  return mesh;
}

TriangleMesh parse_ply(std::istream& in) {
  std::string line;
  std::getline(in, line);  // "ply" already consumed by caller probe? parse fresh
  long vertex_count = -1, face_count = -1;
  bool ascii = false;
  if (line.rfind("ply", 0) != 0) throw std::runtime_error("not a PLY file");
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = (fmt == "ascii");
    } else if (tag == "element") {
      std::string what;
      long n;
      ls >> what >> n;
      if (what == "vertex") vertex_count = n;
      if (what == "face") face_count = n;
    } else if (tag == "end_header") {
      break;
    }
  }
  if (!ascii) throw std::runtime_error("only ASCII PLY is supported");
  if (vertex_count < 0 || face_count < 0) {
    throw std::runtime_error("PLY header missing vertex or face element");
  }
  TriangleMesh mesh;
  mesh.vertices.resize(vertex_count, 3);
  for (long i = 0; i < vertex_count; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("truncated PLY vertices");
    std::istringstream ls(line);
    // x, y, z are assumed to lead the vertex properties.
    if (!(ls >> mesh.vertices(i, 0) >> mesh.vertices(i, 1) >> mesh.vertices(i, 2))) {
      throw std::runtime_error("malformed PLY vertex line: " + line);
    }
  }
  std::vector<Eigen::Vector3i> tris;
  for (long i = 0; i < face_count; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("truncated PLY faces");
    std::istringstream ls(line);
    int n;
    if (!(ls >> n) || n < 3) throw std::runtime_error("malformed PLY face: " + line);
    std::vector<int> idx(n);
    for (int k = 0; k < n; ++k) {
      if (!(ls >> idx[k]) || idx[k] < 0 || idx[k] >= vertex_count) {
        throw std::runtime_error("PLY face index out of range: " + line);
      }
    }
    for (int k = 1; k + 1 < n; ++k) tris.emplace_back(idx[0], idx[k], idx[k + 1]);
  }
  mesh.triangles.resize(static_cast<int>(tris.size()), 3);
  for (std::size_t i = 0; i < tris.size(); ++i) mesh.triangles.row(static_cast<int>(i)) = tris[i];
  return mesh;
}

void drop_degenerate_triangles(TriangleMesh& mesh) {
  std::vector<int> keep;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    if (mesh.triangle_area(t) > 0.0) keep.push_back(t);
  }
  if (static_cast<int>(keep.size()) == mesh.triangle_count()) return;
  Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor> tris(keep.size(), 3);
  for (std::size_t i = 0; i < keep.size(); ++i) tris.row(static_cast<int>(i)) = mesh.triangles.row(keep[i]);
  mesh.triangles = std::move(tris);
}

}  // namespace

DomainModel load_mesh(const std::string& path, const BoxBounds& normalize_to) {
  normalize_to.validate();
  if (normalize_to.dim() != 3) {
    throw std::invalid_argument("mesh normalization box must be 3D");
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh file: " + path);

  TriangleMesh mesh;
  const bool is_ply = path.size() >= 4 && path.compare(path.size() - 4, 4, ".ply") == 0;
  if (is_ply) {
    mesh = parse_ply(in);
  } else {
    mesh = parse_obj(in);
  }
  if (mesh.vertices.rows() == 0 || mesh.triangle_count() == 0) {
    throw std::runtime_error("mesh has no triangles: " + path);
  }
  drop_degenerate_triangles(mesh);
  if (mesh.triangle_count() == 0 || mesh.total_area() <= 0.0) {
    throw std::runtime_error("mesh has zero surface area: " + path);
  }

  const Eigen::Vector3d lo = mesh.vertices.colwise().minCoeff();
  const Eigen::Vector3d hi = mesh.vertices.colwise().maxCoeff();
  const Eigen::Vector3d extent = hi - lo;
  const Eigen::Vector3d target_extent = normalize_to.hi - normalize_to.lo;
  double scale = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (extent[i] > 0.0) scale = std::min(scale, target_extent[i] / extent[i]);
  }
  if (!std::isfinite(scale)) {
    throw std::runtime_error("mesh is degenerate (zero extent): " + path);
  }
  const Eigen::Vector3d center = 0.5 * (lo + hi);
  const Eigen::Vector3d target_center = 0.5 * (normalize_to.lo + normalize_to.hi);
  for (int v = 0; v < mesh.vertices.rows(); ++v) {
    const Eigen::Vector3d p = mesh.vertices.row(v);
    mesh.vertices.row(v) = target_center + scale * (p - center);
  }
  return DomainModel::mesh(std::move(mesh));
}

void TargetSpec::validate(int dim) const {
  if (type == Type::uniform) return;
  if (components.empty()) {
    throw std::invalid_argument("mixture target needs at least one component");
  }
  double wsum = 0.0;
  for (const auto& c : components) {
    if (!(c.weight >= 0.0)) {
      throw std::invalid_argument("mixture weights must be nonnegative");
    }
    if (c.mean.size() != dim || c.cov.rows() != dim || c.cov.cols() != dim) {
      throw std::invalid_argument("mixture component dimension mismatch");
    }
    wsum += c.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-12) {
    throw std::invalid_argument("mixture weights must sum to 1");
  }
}

void empirical_embedding(const KernelSpec& kernel, const RowMatrixXd& points,
                         Eigen::VectorXd& mu_hat, double& z) {
  const int m = static_cast<int>(points.rows());
  const int dim = static_cast<int>(points.cols());
  mu_hat.resize(m);
  const double* data = points.data();
  par::parallel_for(
      static_cast<std::size_t>(m),
      [&](std::size_t i) {
        const double* pi = data + i * dim;
        double acc = 0.0;
        for (int j = 0; j < m; ++j) {
          acc += kernel_value_d2(kernel, squared_distance(pi, data + j * dim, dim));
        }
        mu_hat[static_cast<int>(i)] = acc / m;
      },
      static_cast<std::size_t>(m) * m);
  z = par::sum(static_cast<std::size_t>(m), [&](std::size_t i) {
        return mu_hat[static_cast<int>(i)];
      }) /
      m;
}

namespace {

RowMatrixXd draw_uniform_impl(const DomainModel& domain, int count, Rng& rng) {
  const int dim = domain.ambient_dim();
  RowMatrixXd samples(count, dim);
  if (domain.is_box()) {
    const BoxBounds& b = domain.box_bounds();
    for (int i = 0; i < count; ++i) {
      for (int d = 0; d < dim; ++d) {
        samples(i, d) = rng.uniform(b.lo[d], b.hi[d]);
      }
    }
    return samples;
  }
  // Area-weighted triangle choice, then uniform barycentric point.
  const TriangleMesh& mesh = domain.mesh_data();
  const int nt = mesh.triangle_count();
  std::vector<double> cdf(nt);
  double acc = 0.0;
  for (int t = 0; t < nt; ++t) {
    acc += mesh.triangle_area(t);
    cdf[t] = acc;
  }
  for (int i = 0; i < count; ++i) {
    const double u = rng.uniform01() * acc;
    const int t = static_cast<int>(
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const int ti = std::min(t, nt - 1);
    const Eigen::Vector3d a = mesh.vertices.row(mesh.triangles(ti, 0));
    const Eigen::Vector3d b = mesh.vertices.row(mesh.triangles(ti, 1));
    const Eigen::Vector3d c = mesh.vertices.row(mesh.triangles(ti, 2));
    const double r1 = std::sqrt(rng.uniform01());
    const double r2 = rng.uniform01();
    samples.row(i) = (1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c;
  }
  return samples;
}

RowMatrixXd draw_samples(const DomainModel& domain, const TargetSpec& spec,
                         int sample_count, std::uint64_t seed) {
  const int dim = domain.ambient_dim();
  RowMatrixXd samples(sample_count, dim);
  Rng rng(mix_seed(seed, 0x5a6d706c65ull));

  if (spec.type == TargetSpec::Type::uniform) {
    return draw_uniform_impl(domain, sample_count, rng);
  }

  // Gaussian mixture with rejection against the box.
  if (!domain.is_box()) {
    throw std::invalid_argument("mixture targets require a box domain");
  }
  const BoxBounds& box = domain.box_bounds();
  std::vector<double> wcdf;
  std::vector<Eigen::MatrixXd> chol;
  double wacc = 0.0;
  for (const auto& c : spec.components) {
    wacc += c.weight;
    wcdf.push_back(wacc);
    Eigen::LLT<Eigen::MatrixXd> llt(c.cov);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("mixture covariance is not positive definite");
    }
    chol.push_back(llt.matrixL());
  }
  long draws = 0;
  Eigen::VectorXd noise(dim);
  for (int i = 0; i < sample_count; ++i) {
    for (;;) {
      if (++draws > 1000000) {
        throw std::runtime_error("target has negligible mass on domain");
      }
      const double u = rng.uniform01() * wacc;
      const int c = static_cast<int>(
          std::lower_bound(wcdf.begin(), wcdf.end(), u) - wcdf.begin());
      const int ci = std::min<int>(c, static_cast<int>(wcdf.size()) - 1);
      for (int d = 0; d < dim; ++d) noise[d] = rng.normal();
      const Eigen::VectorXd x = spec.components[ci].mean + chol[ci] * noise;
      bool inside = true;
      for (int d = 0; d < dim; ++d) {
        if (x[d] < box.lo[d] || x[d] > box.hi[d]) {
          inside = false;
          break;
        }
      }
      if (inside) {
        samples.row(i) = x;
        break;
      }
    }
  }
  return samples;
}

}  // namespace

TargetModel sample_target(const DomainModel& domain, const TargetSpec& spec,
                          int sample_count, std::uint64_t seed,
                          const KernelSpec& embedding_kernel,
                          const KernelSpec& objective_kernel) {
  if (sample_count < 1) throw std::invalid_argument("sample count must be >= 1");
  spec.validate(domain.ambient_dim());
  embedding_kernel.validate();
  objective_kernel.validate();
  return target_from_samples(draw_samples(domain, spec, sample_count, seed),
                             embedding_kernel, objective_kernel);
}

TargetModel target_from_samples(RowMatrixXd samples,
                                const KernelSpec& embedding_kernel,
                                const KernelSpec& objective_kernel) {
  if (samples.rows() < 1) throw std::invalid_argument("need at least one sample");
  TargetModel target;
  target.samples = std::move(samples);
  target.embedding_kernel = embedding_kernel;
  target.objective_kernel = objective_kernel;
  empirical_embedding(embedding_kernel, target.samples, target.mu_hat_embedding,
                      target.z_embedding);
  const bool same = embedding_kernel.family == objective_kernel.family &&
                    embedding_kernel.length_scale == objective_kernel.length_scale;
  if (same) {
    target.mu_hat_objective = target.mu_hat_embedding;
    target.z_objective = target.z_embedding;
  } else {
    empirical_embedding(objective_kernel, target.samples, target.mu_hat_objective,
                        target.z_objective);
  }
  return target;
}

RowMatrixXd draw_uniform_points(const DomainModel& domain, int count,
                                std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x756e69666f726dull));
  return draw_uniform_impl(domain, count, rng);
}

double mean_nn_spacing(const RowMatrixXd& samples) {
  const int m = static_cast<int>(samples.rows());
  const int dim = static_cast<int>(samples.cols());
  if (m < 2) return 0.0;
  const double* data = samples.data();
  const double total = par::sum(
      static_cast<std::size_t>(m),
      [&](std::size_t i) {
        double best = std::numeric_limits<double>::infinity();
        const double* pi = data + i * dim;
        for (int j = 0; j < m; ++j) {
          if (static_cast<int>(i) == j) continue;
          best = std::min(best, squared_distance(pi, data + j * dim, dim));
        }
        return std::sqrt(best);
      },
      static_cast<std::size_t>(m) * m);
  return total / m;
}

}  // namespace kme
