#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "gfc/lattice.hpp"

using namespace gfc;

namespace {

std::set<std::tuple<int, int, int>> grid_set(const DefectedLattice& lat) {
  std::set<std::tuple<int, int, int>> s;
  for (const auto& g : lat.grid) s.insert({g.x, g.y, g.z});
  return s;
}

// O(N^2) scan, the independent oracle for the cell list.
std::vector<std::vector<int>> brute_neighbors(const DefectedLattice& lat, double cutoff) {
  std::vector<std::vector<int>> out(lat.size());
  for (std::size_t i = 0; i < lat.size(); ++i)
    for (std::size_t j = 0; j < lat.size(); ++j)
      if (i != j && (lat.sites[j] - lat.sites[i]).norm() <= cutoff) out[i].push_back(int(j));
  return out;
}

}  // namespace

TEST_CASE("fcc ball site count matches conventional-cell enumeration") {
  // Frozen from a float enumeration of cells (i,j,k) in [-5,5]^3 with the
  // four-site basis and radius filter.
  CHECK(build_fcc_ball(1.0, 3.0).size() == 459);
  CHECK(build_fcc_ball(1.0, 2.0).size() == 141);
  CHECK_THROWS_WITH(build_fcc_ball(1.0, 1.9), "domain below minimum");
}

TEST_CASE("nearest-neighbor distance and coordination") {
  const double a = 1.3;
  auto lat = build_fcc_ball(a, 4.0 * a);
  double dmin = 1e9;
  for (std::size_t i = 0; i < lat.size(); ++i)
    for (std::size_t j = i + 1; j < lat.size(); ++j)
      dmin = std::min(dmin, (lat.sites[i] - lat.sites[j]).norm());
  CHECK(dmin == doctest::Approx(a / std::sqrt(2.0)).epsilon(1e-14));

  auto first = build_adjacency(lat, 1.01 * a / std::sqrt(2.0));
  auto second = build_adjacency(lat, 1.01 * a);
  for (std::size_t i = 0; i < lat.size(); ++i) {
    if (lat.sites[i].norm() > 4.0 * a - 1.1 * a) continue;
    CHECK(first.neighbors(i).size() == 12);
    CHECK(second.neighbors(i).size() == 18);
  }
}

TEST_CASE("cell list agrees with quadratic scan") {
  auto lat = build_fcc_ball(1.0, 3.1);
  CHECK(lat.size() >= 500);
  for (double cutoff : {0.75, 1.05, 1.45}) {
    auto adj = build_adjacency(lat, cutoff);
    auto oracle = brute_neighbors(lat, cutoff);
    for (std::size_t i = 0; i < lat.size(); ++i) {
      std::vector<int> got;
      for (const auto& n : adj.neighbors(i)) {
        got.push_back(n.index);
        CHECK((n.diff - (lat.sites[std::size_t(n.index)] - lat.sites[i])).norm() == 0.0);
      }
      REQUIRE(got == oracle[i]);
    }
  }
}

TEST_CASE("adjacency is symmetric and within cutoff") {
  for (auto kind : {DefectKind::none, DefectKind::vacancy, DefectKind::interstitial,
                    DefectKind::microcrack}) {
    auto lat = build_adjacency(
        apply_defect(build_fcc_ball(1.0, 2.6), {kind, 3, 1.0}), 1.45);
    for (std::size_t i = 0; i < lat.size(); ++i) {
      for (const auto& n : lat.neighbors(i)) {
        CHECK(n.diff.norm() <= 1.45);
        const auto back = lat.neighbors(std::size_t(n.index));
        CHECK(std::any_of(back.begin(), back.end(),
                          [&](const Neighbor& m) { return m.index == int(i); }));
      }
    }
    // No two sites closer than half the nearest-neighbor distance.
    for (std::size_t i = 0; i < lat.size(); ++i)
      for (const auto& n : lat.neighbors(i)) CHECK(n.diff.norm() >= 0.5 / std::sqrt(2.0));
  }
}

TEST_CASE("point defects") {
  const double a = 1.0;
  auto ball = build_fcc_ball(a, 3.0);
  const auto n = ball.size();

  auto vac = apply_defect(ball, {DefectKind::vacancy, 3, 0.5});
  CHECK(vac.size() == n - 1);
  CHECK(vac.find({0, 0, 0}) < 0);

  auto div = apply_defect(ball, {DefectKind::divacancy, 3, 1.0});
  CHECK(div.size() == n - 2);
  REQUIRE(div.removed.size() == 2);
  CHECK((div.removed[0].to_position(a) - div.removed[1].to_position(a)).norm() ==
        doctest::Approx(a / std::sqrt(2.0)));

  auto crack = apply_defect(ball, {DefectKind::microcrack, 3, 1.0});
  CHECK(crack.size() == n - 3);
  REQUIRE(crack.removed.size() == 3);
  const Vec3 dir = Vec3(1, 1, 0).normalized();
  for (const auto& g : crack.removed) {
    const Vec3 x = g.to_position(a);
    CHECK((x - x.dot(dir) * dir).norm() < 1e-14);
    CHECK(crack.find(g) < 0);
  }

  auto inter = apply_defect(ball, {DefectKind::interstitial, 3, 1.0});
  CHECK(inter.size() == n + 1);
  CHECK(inter.sites.back().isApprox(Vec3(0.5 * a, 0, 0)));

  CHECK_THROWS_WITH(apply_defect(ball, {DefectKind::microcrack, 5, 1.0}),
                    "microcrack exceeds core radius");
  CHECK_NOTHROW(apply_defect(ball, {DefectKind::microcrack, 5, 1.5}));

  // A lattice that already has a site at the octahedral hole.
  auto crowded = ball;
  crowded.grid.push_back({1, 0, 0});
  crowded.sites.push_back(Vec3(0.5, 0, 0));
  crowded.flags.push_back(SiteFlag::unset);
  crowded.reindex();
  CHECK_THROWS_WITH(apply_defect(crowded, {DefectKind::interstitial, 3, 1.0}),
                    "interstitial collides with existing site");
}

TEST_CASE("defect-free ball is invariant under the cubic group") {
  auto lat = build_fcc_ball(1.0, 3.3);
  const auto ref = grid_set(lat);
  const auto& G = cubic_group();
  std::set<std::tuple<int, int, int, int, int, int>> distinct;
  for (const auto& op : G) {
    std::set<std::tuple<int, int, int>> img;
    for (const auto& g : lat.grid) {
      const auto h = op.apply(g);
      img.insert({h.x, h.y, h.z});
      // Float positions map consistently to 1e-12.
      CHECK((op.apply(g.to_position(1.0)) - h.to_position(1.0)).norm() < 1e-12);
    }
    CHECK(img == ref);
    distinct.insert({op.perm[0], op.perm[1], op.perm[2], op.sign[0], op.sign[1], op.sign[2]});
    // Group structure.
    const auto id = op.compose(op.inverse());
    CHECK(id.matrix().isIdentity());
    CHECK(op.matrix().determinant() == doctest::Approx(op.matrix().determinant() > 0 ? 1 : -1));
  }
  CHECK(distinct.size() == 48);
  const auto& g1 = G[7];
  const auto& g2 = G[30];
  CHECK((g1.compose(g2).matrix() - g1.matrix() * g2.matrix()).norm() == 0.0);
}

TEST_CASE("defect then adjacency equals adjacency then defect") {
  for (auto kind : {DefectKind::vacancy, DefectKind::divacancy, DefectKind::microcrack,
                    DefectKind::interstitial}) {
    DefectSpec spec{kind, 3, 1.0};
    auto ball = build_fcc_ball(1.0, 2.8);
    auto x = build_adjacency(apply_defect(ball, spec), 1.2);
    auto y = apply_defect(build_adjacency(ball, 1.2), spec);
    REQUIRE(x.size() == y.size());
    CHECK(x.grid == y.grid);
    CHECK(x.adjacency_offsets == y.adjacency_offsets);
    for (std::size_t k = 0; k < x.adjacency.size(); ++k) {
      CHECK(x.adjacency[k].index == y.adjacency[k].index);
      CHECK(x.adjacency[k].diff == y.adjacency[k].diff);
    }
  }
}

TEST_CASE("deterministic lexicographic ordering") {
  auto a = build_fcc_ball(1.0, 2.5);
  auto b = build_fcc_ball(1.0, 2.5);
  CHECK(a.grid == b.grid);
  // Cell index is floor(g/2); order is lexicographic in (cell, basis).
  auto key = [](const GridPoint& g) {
    auto fl = [](int v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); };
    const int cx = fl(g.x), cy = fl(g.y), cz = fl(g.z);
    const int b = (g.x - 2 * cx) * 4 + (g.y - 2 * cy) * 2 + (g.z - 2 * cz);
    static const std::map<int, int> basis_rank{{0, 0}, {6, 1}, {5, 2}, {3, 3}};
    return std::make_tuple(cx, cy, cz, basis_rank.at(b));
  };
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(key(a.grid[i - 1]) < key(a.grid[i]));
}

TEST_CASE("clamped layer") {
  auto lat = build_fcc_ball(1.0, 4.0);
  mark_clamped(lat, 4.0, 1.5);
  for (std::size_t i = 0; i < lat.size(); ++i)
    CHECK((lat.flags[i] == SiteFlag::clamped) == (lat.sites[i].norm() > 2.5));
}
