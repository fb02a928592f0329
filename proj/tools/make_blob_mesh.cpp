// Generates the lumpy closed surface used by the 3D scenarios: an icosphere
// whose radius is modulated by fixed Gaussian bumps, giving a non-convex
// blob with lobes and dents. Deterministic; rerun to regenerate assets.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace {

struct Mesh {
  std::vector<Eigen::Vector3d> verts;
  std::vector<Eigen::Vector3i> faces;
};

Mesh icosahedron() {
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  Mesh m;
  const double raw[12][3] = {{-1, p, 0}, {1, p, 0},   {-1, -p, 0}, {1, -p, 0},
                             {0, -1, p}, {0, 1, p},   {0, -1, -p}, {0, 1, -p},
                             {p, 0, -1}, {p, 0, 1},   {-p, 0, -1}, {-p, 0, 1}};
  for (const auto& v : raw) {
    m.verts.push_back(Eigen::Vector3d(v[0], v[1], v[2]).normalized());
  }
  const int raw_faces[20][3] = {
      {0, 11, 5}, {0, 5, 1},   {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4},  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},   {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11},  {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (const auto& f : raw_faces) m.faces.emplace_back(f[0], f[1], f[2]);
  return m;
}

Mesh subdivide(const Mesh& in) {
  Mesh out;
  out.verts = in.verts;
  std::map<std::pair<int, int>, int> midpoint;
  const auto mid = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const Eigen::Vector3d v = (out.verts[a] + out.verts[b]).normalized();
    out.verts.push_back(v);
    const int id = static_cast<int>(out.verts.size()) - 1;
    midpoint[key] = id;
    return id;
  };
  for (const auto& f : in.faces) {
    const int ab = mid(f[0], f[1]);
    const int bc = mid(f[1], f[2]);
    const int ca = mid(f[2], f[0]);
    out.faces.emplace_back(f[0], ab, ca);
    out.faces.emplace_back(f[1], bc, ab);
    out.faces.emplace_back(f[2], ca, bc);
    out.faces.emplace_back(ab, bc, ca);
  }
  return out;
}

double radius_field(const Eigen::Vector3d& dir) {
  struct Bump {
    Eigen::Vector3d center;
    double amp, width;
  };
  static const std::vector<Bump> bumps = {
      {Eigen::Vector3d(0.55, 0.8, 0.1).normalized(), 0.14, 0.60},   // head lobe
      {Eigen::Vector3d(-0.9, 0.3, 0.2).normalized(), 0.10, 0.65},   // tail end
      {Eigen::Vector3d(-0.1, -0.85, 0.4).normalized(), 0.07, 0.70},
  };
  // long, flat body: coverage demands sweeping along the length
  const Eigen::Vector3d axes(1.0, 0.42, 0.28);
  const Eigen::Vector3d scaled(dir[0] / axes[0], dir[1] / axes[1], dir[2] / axes[2]);
  double r = 1.0 / scaled.norm();
  double lump = 1.0;
  for (const auto& b : bumps) {
    const double d2 = (dir - b.center).squaredNorm();
    lump += b.amp * std::exp(-d2 / (2.0 * b.width * b.width));
  }
  return 0.35 * r * lump;
}

}  // namespace

int main(int argc, char** argv) {
  int subdivisions = 3;
  std::string out_path = "assets/blob.obj";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--subdivisions" && i + 1 < argc) {
      subdivisions = std::atoi(argv[++i]);
    } else if (arg == "--out" && i + 1 < argc) {
      out_path = argv[++i];
    } else {
      std::fprintf(stderr, "usage: make_blob_mesh [--subdivisions N] [--out path]\n");
      return 1;
    }
  }

  Mesh mesh = icosahedron();
  for (int s = 0; s < subdivisions; ++s) mesh = subdivide(mesh);
  for (auto& v : mesh.verts) v *= radius_field(v);

  std::ofstream out(out_path);
  if (!out) {
    std::fprintf(stderr, "cannot write %s\n", out_path.c_str());
    return 1;
  }
  out << "# lumpy blob surface, " << mesh.verts.size() << " vertices, "
      << mesh.faces.size() << " triangles\n";
  char line[128];
  for (const auto& v : mesh.verts) {
    std::snprintf(line, sizeof(line), "v %.9f %.9f %.9f\n", v[0], v[1], v[2]);
    out << line;
  }
  for (const auto& f : mesh.faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
  std::printf("wrote %s (%zu vertices, %zu triangles)\n", out_path.c_str(),
              mesh.verts.size(), mesh.faces.size());
  return 0;
}
