#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gfc/blending.hpp"
#include "gfc/lattice.hpp"

namespace gfc {

enum class VertexFlag : std::uint8_t { atomistic, coarse, clamped };

/// Tetrahedral P1 mesh over a ball. Every vertex is an FCC site of some
/// power-of-two sublattice; all lattice sites with blend < 1 are vertices.
class GradedMesh {
 public:
  double lattice_constant = 0.0;
  double domain_radius = 0.0;
  std::vector<Vec3> vertices;
  std::vector<GridPoint> grid;
  std::vector<VertexFlag> flags;
  /// Index of the vertex in the lattice it was built from, or -1 when the
  /// vertex lies outside that lattice (coarse far field).
  std::vector<int> lattice_index;
  /// Decimation stride of each vertex (1 = full lattice resolution).
  std::vector<int> stride;

  std::vector<std::array<int, 4>> tets;
  std::vector<std::array<int, 4>> tet_neighbors;  // across the face opposite vertex k
  std::vector<double> volumes;
  std::vector<Vec3> barycenters;
  std::vector<std::array<Vec3, 4>> shape_gradients;

  double min_dihedral_degrees = 0.0;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_tets() const { return tets.size(); }
  int find_vertex(const GridPoint& g) const;
  void reindex();

  /// Barycentric coordinates of x with respect to tet t.
  std::array<double, 4> barycentric(std::size_t t, const Vec3& x) const;

 private:
  std::unordered_map<GridPoint, int, GridPointHash> index_;
};

struct MeshOptions {
  double grading_exponent = 1.5;
  /// Minimum depth of the clamped layer at the outer boundary.
  double clamp_width = 0.0;
};

/// Decimation stride at radius r: smallest power of two s with
/// s * a_nn >= a_nn * (r / r1)^p (1 inside r1).
int decimation_stride(double r, double r1, double grading_exponent);

GradedMesh build_graded_mesh(const DefectedLattice& lat, const BlendProfile& blend,
                             double r_domain, const MeshOptions& options);

struct PointLocation {
  int tet;
  std::array<double, 4> bary;
};

/// Walk-based point location; each caller owns its own walk state.
class PointLocator {
 public:
  explicit PointLocator(const GradedMesh& mesh) : mesh_(&mesh) {}
  PointLocation locate(const Vec3& x);
  /// Like locate(), but returns nothing for points outside the (convex)
  /// mesh instead of throwing.
  std::optional<PointLocation> try_locate(const Vec3& x);
  /// Exhaustive scan (also the fallback of locate()).
  PointLocation locate_exhaustive(const Vec3& x) const;

 private:
  const GradedMesh* mesh_;
  int last_ = 0;
};

PointLocation locate_point(const GradedMesh& mesh, const Vec3& x);

Vec3 interpolate_displacement(const GradedMesh& mesh, std::span<const Vec3> nodal,
                              const Vec3& x);

/// Indexed text dump: vertex and tet blocks.
void write_mesh(const std::string& path, const GradedMesh& mesh);

}  // namespace gfc
