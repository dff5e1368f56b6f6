#include "gfc/lattice.hpp"

#include <algorithm>
#include <cmath>

namespace gfc {

const char* to_string(DefectKind kind) {
  switch (kind) {
    case DefectKind::none: return "none";
    case DefectKind::vacancy: return "vacancy";
    case DefectKind::divacancy: return "divacancy";
    case DefectKind::interstitial: return "interstitial";
    case DefectKind::microcrack: return "microcrack";
  }
  return "?";
}

DefectKind defect_kind_from_string(const std::string& name) {
  for (auto k : {DefectKind::none, DefectKind::vacancy, DefectKind::divacancy,
                 DefectKind::interstitial, DefectKind::microcrack}) {
    if (name == to_string(k)) return k;
  }
  throw Error("unknown defect kind '" + name + "'");
}

double DefectedLattice::nearest_neighbor_distance() const {
  return lattice_constant / std::sqrt(2.0);
}

int DefectedLattice::find(const GridPoint& p) const {
  auto it = index_.find(p);
  return it == index_.end() ? -1 : it->second;
}

void DefectedLattice::reindex() {
  index_.clear();
  index_.reserve(grid.size() * 2);
  for (std::size_t i = 0; i < grid.size(); ++i) index_.emplace(grid[i], int(i));
}

DefectedLattice build_fcc_ball(double lattice_constant, double radius) {
  if (!(lattice_constant > 0.0)) throw Error("lattice constant must be positive");
  if (radius < 2.0 * lattice_constant) throw Error("domain below minimum");

  static constexpr std::array<GridPoint, 4> basis{
      GridPoint{0, 0, 0}, GridPoint{1, 1, 0}, GridPoint{1, 0, 1}, GridPoint{0, 1, 1}};

  DefectedLattice lat;
  lat.lattice_constant = lattice_constant;
  lat.radius = radius;

  const int n = int(std::ceil(radius / lattice_constant)) + 1;
  const double limit = 2.0 * radius / lattice_constant;
  const double limit2 = limit * limit * (1.0 + 1e-14);
  for (int i = -n; i <= n; ++i) {
    for (int j = -n; j <= n; ++j) {
      for (int k = -n; k <= n; ++k) {
        for (const auto& b : basis) {
          const GridPoint g{2 * i + b.x, 2 * j + b.y, 2 * k + b.z};
          if (double(g.norm2()) > limit2) continue;
          lat.grid.push_back(g);
          lat.sites.push_back(g.to_position(lattice_constant));
        }
      }
    }
  }
  lat.flags.assign(lat.sites.size(), SiteFlag::unset);
  lat.reindex();
  return lat;
}

std::vector<GridPoint> defect_removed_sites(const DefectSpec& spec) {
  switch (spec.kind) {
    case DefectKind::vacancy: return {{0, 0, 0}};
    case DefectKind::divacancy: return {{0, 0, 0}, {1, 1, 0}};
    case DefectKind::microcrack: {
      if (spec.crack_length < 1) throw Error("microcrack length must be at least 1");
      const int k = spec.crack_length;
      // Odd lengths are centred on the origin; even lengths extend one site
      // further along -[110].
      const int lo = -(k / 2);
      std::vector<GridPoint> out;
      for (int j = lo; j < lo + k; ++j) out.push_back({j, j, 0});
      return out;
    }
    default: return {};
  }
}

std::vector<GridPoint> defect_added_sites(const DefectSpec& spec) {
  if (spec.kind == DefectKind::interstitial) return {{1, 0, 0}};
  return {};
}

namespace {

double defect_extent(const DefectSpec& spec, double a) {
  double r = 0.0;
  for (const auto& p : defect_removed_sites(spec)) r = std::max(r, p.to_position(a).norm());
  for (const auto& p : defect_added_sites(spec)) r = std::max(r, p.to_position(a).norm());
  return r;
}

}  // namespace

DefectedLattice apply_defect(const DefectedLattice& lat, const DefectSpec& spec) {
  if (lat.defect.kind != DefectKind::none) throw Error("lattice already carries a defect");
  const double a = lat.lattice_constant;
  if (defect_extent(spec, a) > spec.core_radius + 1e-12 * a) {
    throw Error(spec.kind == DefectKind::microcrack ? "microcrack exceeds core radius"
                                                    : "defect exceeds core radius");
  }

  const auto removed = defect_removed_sites(spec);
  const auto added = defect_added_sites(spec);
  std::vector<char> keep(lat.size(), 1);
  for (const auto& p : removed) {
    const int i = lat.find(p);
    if (i < 0) throw Error("defect site not present in lattice");
    keep[std::size_t(i)] = 0;
  }

  DefectedLattice out;
  out.lattice_constant = a;
  out.radius = lat.radius;
  out.defect = spec;
  out.removed = removed;
  out.added = added;
  for (std::size_t i = 0; i < lat.size(); ++i) {
    if (!keep[i]) continue;
    out.sites.push_back(lat.sites[i]);
    out.grid.push_back(lat.grid[i]);
    out.flags.push_back(lat.flags[i]);
  }
  const double min_sep = 0.5 * lat.nearest_neighbor_distance();
  for (const auto& p : added) {
    const Vec3 x = p.to_position(a);
    for (const auto& s : out.sites) {
      if ((s - x).norm() < min_sep) throw Error("interstitial collides with existing site");
    }
    out.sites.push_back(x);
    out.grid.push_back(p);
    out.flags.push_back(SiteFlag::unset);
  }
  out.reindex();
  if (lat.has_adjacency()) return build_adjacency(out, lat.cutoff);
  return out;
}

DefectedLattice build_adjacency(const DefectedLattice& lat, double cutoff) {
  DefectedLattice out = lat;
  out.cutoff = cutoff;
  out.adjacency.clear();
  out.adjacency_offsets.assign(lat.size() + 1, 0);
  if (lat.size() == 0) return out;

  Vec3 lo = lat.sites[0], hi = lat.sites[0];
  for (const auto& s : lat.sites) {
    lo = lo.cwiseMin(s);
    hi = hi.cwiseMax(s);
  }
  const double bin = cutoff;
  std::array<int, 3> dims{};
  for (int d = 0; d < 3; ++d) dims[d] = std::max(1, int(std::floor((hi[d] - lo[d]) / bin)) + 1);
  auto cell_of = [&](const Vec3& x) {
    std::array<int, 3> c{};
    for (int d = 0; d < 3; ++d) c[d] = std::min(dims[d] - 1, int(std::floor((x[d] - lo[d]) / bin)));
    return c;
  };
  auto flat = [&](const std::array<int, 3>& c) {
    return (std::size_t(c[0]) * dims[1] + c[1]) * dims[2] + c[2];
  };

  // Counting sort of sites into bins.
  const std::size_t nbins = std::size_t(dims[0]) * dims[1] * dims[2];
  std::vector<std::size_t> bin_start(nbins + 1, 0);
  std::vector<std::size_t> site_bin(lat.size());
  for (std::size_t i = 0; i < lat.size(); ++i) {
    site_bin[i] = flat(cell_of(lat.sites[i]));
    ++bin_start[site_bin[i] + 1];
  }
  for (std::size_t b = 0; b < nbins; ++b) bin_start[b + 1] += bin_start[b];
  std::vector<int> bin_sites(lat.size());
  {
    auto fill = bin_start;
    for (std::size_t i = 0; i < lat.size(); ++i) bin_sites[fill[site_bin[i]]++] = int(i);
  }

  const double cut2 = cutoff * cutoff;
  std::vector<Neighbor> scratch;
  for (std::size_t i = 0; i < lat.size(); ++i) {
    scratch.clear();
    const auto c = cell_of(lat.sites[i]);
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          const std::array<int, 3> n{c[0] + dx, c[1] + dy, c[2] + dz};
          if (n[0] < 0 || n[1] < 0 || n[2] < 0 || n[0] >= dims[0] || n[1] >= dims[1] ||
              n[2] >= dims[2])
            continue;
          const std::size_t b = flat(n);
          for (std::size_t q = bin_start[b]; q < bin_start[b + 1]; ++q) {
            const int j = bin_sites[q];
            if (std::size_t(j) == i) continue;
            const Vec3 d = lat.sites[std::size_t(j)] - lat.sites[i];
            if (d.squaredNorm() <= cut2) scratch.push_back({j, d});
          }
        }
      }
    }
    std::sort(scratch.begin(), scratch.end(),
              [](const Neighbor& p, const Neighbor& q) { return p.index < q.index; });
    out.adjacency.insert(out.adjacency.end(), scratch.begin(), scratch.end());
    out.adjacency_offsets[i + 1] = out.adjacency.size();
  }
  return out;
}

void mark_clamped(DefectedLattice& lat, double boundary_radius, double width) {
  const double r = boundary_radius - width;
  for (std::size_t i = 0; i < lat.size(); ++i) {
    if (lat.sites[i].norm() > r) lat.flags[i] = SiteFlag::clamped;
  }
}

// ---------------------------------------------------------------------------

Mat3 CubicOp::matrix() const {
  Mat3 m = Mat3::Zero();
  for (int i = 0; i < 3; ++i) m(i, perm[i]) = sign[i];
  return m;
}

CubicOp CubicOp::inverse() const {
  CubicOp inv{};
  for (int i = 0; i < 3; ++i) {
    inv.perm[perm[i]] = i;
    inv.sign[perm[i]] = sign[i];
  }
  return inv;
}

CubicOp CubicOp::compose(const CubicOp& inner) const {
  // (this * inner) v: component i = sign[i] * (inner v)[perm[i]]
  //                                = sign[i] * inner.sign[perm[i]] * v[inner.perm[perm[i]]]
  CubicOp out{};
  for (int i = 0; i < 3; ++i) {
    out.perm[i] = inner.perm[perm[i]];
    out.sign[i] = sign[i] * inner.sign[perm[i]];
  }
  return out;
}

const std::array<CubicOp, 48>& cubic_group() {
  static const std::array<CubicOp, 48> group = [] {
    std::array<CubicOp, 48> g{};
    std::array<int, 3> p{0, 1, 2};
    int n = 0;
    do {
      for (int s = 0; s < 8; ++s) {
        g[std::size_t(n++)] =
            CubicOp{p, {(s & 1) ? -1 : 1, (s & 2) ? -1 : 1, (s & 4) ? -1 : 1}};
      }
    } while (std::next_permutation(p.begin(), p.end()));
    return g;
  }();
  return group;
}

}  // namespace gfc
