#pragma once

#include <span>
#include <unordered_map>
#include <vector>

#include "gfc/common.hpp"

namespace gfc {

enum class SiteFlag : std::uint8_t { unset, core, blend, far, clamped };

enum class DefectKind { none, vacancy, divacancy, interstitial, microcrack };

const char* to_string(DefectKind kind);
DefectKind defect_kind_from_string(const std::string& name);

struct DefectSpec {
  DefectKind kind = DefectKind::none;
  /// Number of removed sites along [110] for a microcrack.
  int crack_length = 3;
  /// All modifications must lie within this distance of the origin.
  double core_radius = 0.0;
};

struct Neighbor {
  int index;
  Vec3 diff;  // reference position of the neighbor minus that of the site
};

/// Finite FCC configuration centred on a lattice site at the origin.
///
/// Sites carry both a floating-point reference position and an exact grid
/// coordinate (half lattice constants). Adjacency is stored CSR-style and is
/// empty until build_adjacency() runs.
class DefectedLattice {
 public:
  double lattice_constant = 0.0;
  double radius = 0.0;
  std::vector<Vec3> sites;
  std::vector<GridPoint> grid;
  std::vector<SiteFlag> flags;
  DefectSpec defect;
  std::vector<GridPoint> removed;
  std::vector<GridPoint> added;

  double cutoff = 0.0;
  std::vector<std::size_t> adjacency_offsets;
  std::vector<Neighbor> adjacency;

  std::size_t size() const { return sites.size(); }
  bool has_adjacency() const { return !adjacency_offsets.empty(); }
  std::span<const Neighbor> neighbors(std::size_t i) const {
    return {adjacency.data() + adjacency_offsets[i],
            adjacency.data() + adjacency_offsets[i + 1]};
  }
  double nearest_neighbor_distance() const;

  /// Index of the site at grid point `p`, or -1.
  int find(const GridPoint& p) const;
  void reindex();

 private:
  std::unordered_map<GridPoint, int, GridPointHash> index_;
};

/// All FCC sites with |x| <= radius (conventional four-site cell), ordered
/// lexicographically by cell index then basis index.
DefectedLattice build_fcc_ball(double lattice_constant, double radius);

/// Returns a copy with the defect applied. Adjacency, if present, is rebuilt
/// with the same cutoff.
DefectedLattice apply_defect(const DefectedLattice& lat, const DefectSpec& spec);

/// Grid coordinates of the sites a defect removes / adds (no lattice needed).
std::vector<GridPoint> defect_removed_sites(const DefectSpec& spec);
std::vector<GridPoint> defect_added_sites(const DefectSpec& spec);

/// Cell-list neighbor search; every pair with |diff| <= cutoff.
DefectedLattice build_adjacency(const DefectedLattice& lat, double cutoff);

/// Flags every site with |x| > boundary_radius - width as clamped.
void mark_clamped(DefectedLattice& lat, double boundary_radius, double width);

// ---------------------------------------------------------------------------
// Cubic point group (48 signed permutations).

struct CubicOp {
  std::array<int, 3> perm;
  std::array<int, 3> sign;

  GridPoint apply(const GridPoint& p) const {
    const std::array<int, 3> v{p.x, p.y, p.z};
    return {sign[0] * v[perm[0]], sign[1] * v[perm[1]], sign[2] * v[perm[2]]};
  }
  Vec3 apply(const Vec3& v) const {
    return {sign[0] * v[perm[0]], sign[1] * v[perm[1]], sign[2] * v[perm[2]]};
  }
  Mat3 matrix() const;
  CubicOp inverse() const;
  CubicOp compose(const CubicOp& inner) const;  // this * inner
};

const std::array<CubicOp, 48>& cubic_group();

}  // namespace gfc
