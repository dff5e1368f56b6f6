#include "gfc/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include "gfc/delaunay.hpp"

namespace gfc {

int GradedMesh::find_vertex(const GridPoint& g) const {
  auto it = index_.find(g);
  return it == index_.end() ? -1 : it->second;
}

void GradedMesh::reindex() {
  index_.clear();
  index_.reserve(grid.size() * 2);
  for (std::size_t i = 0; i < grid.size(); ++i) index_.emplace(grid[i], int(i));
}

std::array<double, 4> GradedMesh::barycentric(std::size_t t, const Vec3& x) const {
  const auto& g = shape_gradients[t];
  const Vec3 d = x - vertices[std::size_t(tets[t][0])];
  std::array<double, 4> b{};
  b[1] = g[1].dot(d);
  b[2] = g[2].dot(d);
  b[3] = g[3].dot(d);
  b[0] = 1.0 - b[1] - b[2] - b[3];
  return b;
}

int decimation_stride(double r, double r1, double grading_exponent) {
  if (grading_exponent == 0.0 || r <= r1) return 1;
  if (r1 <= 0.0) throw Error("graded mesh needs a positive blend outer radius");
  const double h = std::pow(r / r1, grading_exponent);
  int s = 1;
  while (double(s) < h * (1.0 - 1e-12)) s *= 2;
  return s;
}

namespace {

bool on_sublattice(const GridPoint& g, int s) {
  if (s == 1) return (g.x + g.y + g.z) % 2 == 0;
  if (g.x % s || g.y % s || g.z % s) return false;
  return ((g.x + g.y + g.z) / s) % 2 == 0;
}

void finish_geometry(GradedMesh& m) {
  const double min_vol = 1e-10 * std::pow(m.lattice_constant, 3);
  m.volumes.resize(m.tets.size());
  m.barycenters.resize(m.tets.size());
  m.shape_gradients.resize(m.tets.size());
  double min_angle = std::numbers::pi;
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    const auto& v = m.tets[t];
    const Vec3& x0 = m.vertices[std::size_t(v[0])];
    Mat3 J;
    J.col(0) = m.vertices[std::size_t(v[1])] - x0;
    J.col(1) = m.vertices[std::size_t(v[2])] - x0;
    J.col(2) = m.vertices[std::size_t(v[3])] - x0;
    const double det = J.determinant();
    m.volumes[t] = det / 6.0;
    if (!(m.volumes[t] >= min_vol)) throw Error("mesh generation failed: degenerate tetrahedron");
    m.barycenters[t] = 0.25 * (x0 + m.vertices[std::size_t(v[1])] +
                               m.vertices[std::size_t(v[2])] + m.vertices[std::size_t(v[3])]);
    const Mat3 Jinv = J.inverse();
    auto& g = m.shape_gradients[t];
    g[1] = Jinv.row(0).transpose();
    g[2] = Jinv.row(1).transpose();
    g[3] = Jinv.row(2).transpose();
    g[0] = -(g[1] + g[2] + g[3]);
    for (int k = 0; k < 4; ++k) {
      for (int l = k + 1; l < 4; ++l) {
        const double c = -g[std::size_t(k)].dot(g[std::size_t(l)]) /
                         (g[std::size_t(k)].norm() * g[std::size_t(l)].norm());
        min_angle = std::min(min_angle, std::acos(std::clamp(c, -1.0, 1.0)));
      }
    }
  }
  m.min_dihedral_degrees = min_angle * 180.0 / std::numbers::pi;

  // Face adjacency.
  m.tet_neighbors.assign(m.tets.size(), {-1, -1, -1, -1});
  struct Face {
    std::array<int, 3> key;
    int tet;
    int slot;
  };
  std::vector<Face> faces;
  faces.reserve(4 * m.tets.size());
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    for (int f = 0; f < 4; ++f) {
      std::array<int, 3> key{};
      int k = 0;
      for (int g = 0; g < 4; ++g)
        if (g != f) key[std::size_t(k++)] = m.tets[t][std::size_t(g)];
      std::sort(key.begin(), key.end());
      faces.push_back({key, int(t), f});
    }
  }
  std::sort(faces.begin(), faces.end(), [](const Face& a, const Face& b) {
    return a.key != b.key ? a.key < b.key : a.tet < b.tet;
  });
  for (std::size_t i = 0; i < faces.size();) {
    std::size_t j = i + 1;
    while (j < faces.size() && faces[j].key == faces[i].key) ++j;
    if (j - i > 2) throw Error("mesh generation failed: non-manifold face");
    if (j - i == 2) {
      m.tet_neighbors[std::size_t(faces[i].tet)][std::size_t(faces[i].slot)] = faces[i + 1].tet;
      m.tet_neighbors[std::size_t(faces[i + 1].tet)][std::size_t(faces[i + 1].slot)] = faces[i].tet;
    }
    i = j;
  }
}

}  // namespace

GradedMesh build_graded_mesh(const DefectedLattice& lat, const BlendProfile& blend,
                             double r_domain, const MeshOptions& options) {
  if (!(r_domain > 0.0)) throw Error("mesh domain radius must be positive");
  const double a = lat.lattice_constant;
  const double r1 = blend.r1;
  const double tol = 1e-12 * a;

  GradedMesh m;
  m.lattice_constant = a;
  m.domain_radius = r_domain;

  auto add_vertex = [&](const GridPoint& g, int lattice_idx, int s) {
    const Vec3 x = g.to_position(a);
    m.vertices.push_back(x);
    m.grid.push_back(g);
    m.lattice_index.push_back(lattice_idx);
    m.stride.push_back(s);
    m.flags.push_back(x.norm() <= r1 + tol ? VertexFlag::atomistic : VertexFlag::coarse);
  };

  // Full-resolution vertices: every lattice site inside r1 (and inside the domain).
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const double r = lat.sites[i].norm();
    if (r <= std::min(r1, r_domain) + tol) add_vertex(lat.grid[i], int(i), 1);
  }

  // Decimated far field, generated directly on the grid.
  if (r1 < r_domain) {
    const int n = int(std::ceil(2.0 * r_domain / a)) + 1;
    const double lim_hi = 2.0 * r_domain / a;
    const double lim_lo = 2.0 * r1 / a;
    const double hi2 = lim_hi * lim_hi * (1.0 + 1e-14);
    const double lo2 = lim_lo * lim_lo * (1.0 + 1e-14);
    for (int i = -n; i <= n; ++i)
      for (int j = -n; j <= n; ++j)
        for (int k = -n; k <= n; ++k) {
          const GridPoint g{i, j, k};
          const double n2 = double(g.norm2());
          if (n2 <= lo2 || n2 > hi2) continue;
          if ((i + j + k) % 2 != 0) continue;
          const int s = decimation_stride(std::sqrt(n2) * 0.5 * a, r1, options.grading_exponent);
          if (!on_sublattice(g, s)) continue;
          add_vertex(g, lat.find(g), s);
        }
  }
  m.reindex();

  m.tets = delaunay_tetrahedralize(m.grid);
  // Deterministic tet order (the builder's order depends on slot reuse).
  for (auto& t : m.tets) {
    // Rotate so the smallest index comes first while keeping orientation.
    const auto it = std::min_element(t.begin(), t.end());
    const int p = int(it - t.begin());
    if (p != 0) {
      // Even permutation bringing position p to the front.
      static constexpr int perms[4][4] = {{0, 1, 2, 3}, {1, 0, 3, 2}, {2, 3, 0, 1}, {3, 2, 1, 0}};
      std::array<int, 4> r{};
      for (int q = 0; q < 4; ++q) r[std::size_t(q)] = t[std::size_t(perms[p][q])];
      t = r;
    }
  }
  std::sort(m.tets.begin(), m.tets.end());
  finish_geometry(m);

  // Clamped layer: one element edge (stride * a_nn) or the requested width,
  // whichever is deeper, plus every vertex on the hull.
  for (std::size_t v = 0; v < m.vertices.size(); ++v) {
    const double width = std::max(options.clamp_width, m.stride[v] * a / std::numbers::sqrt2);
    if (m.vertices[v].norm() > r_domain - width) m.flags[v] = VertexFlag::clamped;
  }
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    for (int f = 0; f < 4; ++f) {
      if (m.tet_neighbors[t][std::size_t(f)] >= 0) continue;
      for (int g = 0; g < 4; ++g)
        if (g != f) m.flags[std::size_t(m.tets[t][std::size_t(g)])] = VertexFlag::clamped;
    }
  }
  return m;
}

PointLocation PointLocator::locate(const Vec3& x) {
  if (auto loc = try_locate(x)) return *loc;
  throw Error("point outside mesh");
}

std::optional<PointLocation> PointLocator::try_locate(const Vec3& x) {
  const GradedMesh& m = *mesh_;
  if (m.tets.empty()) return std::nullopt;
  int t = (last_ >= 0 && std::size_t(last_) < m.tets.size()) ? last_ : 0;
  const std::size_t max_steps = 10000;
  for (std::size_t step = 0; step < max_steps; ++step) {
    const auto b = m.barycentric(std::size_t(t), x);
    int worst = -1;
    double worst_val = -1e-12;
    for (int k = 0; k < 4; ++k) {
      if (b[std::size_t(k)] < worst_val) {
        worst_val = b[std::size_t(k)];
        worst = k;
      }
    }
    if (worst < 0) {
      last_ = t;
      return PointLocation{t, b};
    }
    const int next = m.tet_neighbors[std::size_t(t)][std::size_t(worst)];
    // Beyond a hull face of a convex mesh means outside.
    if (next < 0) return std::nullopt;
    t = next;
  }
  try {
    auto loc = locate_exhaustive(x);
    last_ = loc.tet;
    return loc;
  } catch (const Error&) {
    return std::nullopt;
  }
}

PointLocation PointLocator::locate_exhaustive(const Vec3& x) const {
  const GradedMesh& m = *mesh_;
  int best = -1;
  double best_min = -std::numeric_limits<double>::infinity();
  std::array<double, 4> best_b{};
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    const auto b = m.barycentric(t, x);
    const double mn = *std::min_element(b.begin(), b.end());
    if (mn > best_min) {
      best_min = mn;
      best = int(t);
      best_b = b;
    }
  }
  if (best < 0 || best_min < -1e-12) throw Error("point outside mesh");
  return {best, best_b};
}

PointLocation locate_point(const GradedMesh& mesh, const Vec3& x) {
  PointLocator loc(mesh);
  return loc.locate(x);
}

Vec3 interpolate_displacement(const GradedMesh& mesh, std::span<const Vec3> nodal,
                              const Vec3& x) {
  const auto loc = locate_point(mesh, x);
  Vec3 u = Vec3::Zero();
  for (int k = 0; k < 4; ++k)
    u += loc.bary[std::size_t(k)] * nodal[std::size_t(mesh.tets[std::size_t(loc.tet)][std::size_t(k)])];
  return u;
}

void write_mesh(const std::string& path, const GradedMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out.precision(17);
  out << "# graded tetrahedral mesh\n";
  out << "vertices " << mesh.num_vertices() << "\n";
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    const auto& x = mesh.vertices[v];
    out << x.x() << ' ' << x.y() << ' ' << x.z() << ' ' << int(mesh.flags[v]) << '\n';
  }
  out << "tets " << mesh.num_tets() << "\n";
  for (const auto& t : mesh.tets) out << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
}

}  // namespace gfc
