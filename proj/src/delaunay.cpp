#include "gfc/delaunay.hpp"

#include <algorithm>
#include <cstdlib>
#include <unordered_set>

namespace gfc {

namespace {

using i128 = __int128;

struct P3 {
  std::int64_t x, y, z;
  std::int64_t h;    // |p|^2
  std::int64_t hz;   // -z^2: cospherical ties prefer edges along z
  std::int64_t w1;   // symmetric symbolic perturbations
  std::int64_t w2;
  std::int64_t w3;   // last-resort tie breaker
};

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t coord_key(std::int64_t x, std::int64_t y, std::int64_t z) {
  return (std::uint64_t(std::uint32_t(x)) << 42) ^ (std::uint64_t(std::uint32_t(y)) << 21) ^
         std::uint64_t(std::uint32_t(z));
}

// Perturbation levels after |p|^2: -z^2 (splits FCC octahedra along z),
// then two hashes of the orbit {g, R g} under the two-fold rotation
// R(x, y, z) = (y, x, -z) about [110], then a raw-coordinate hash. Under a
// rotation no cospherical 5-point set is forced degenerate, so generic
// R-invariant heights give an R-invariant triangulation; the raw level only
// acts on accidental ties.
P3 lift(const GridPoint& g) {
  const std::uint64_t k = std::min(coord_key(g.x, g.y, g.z), coord_key(g.y, g.x, -g.z));
  const std::uint64_t r1 = splitmix(k);
  const std::uint64_t r2 = splitmix(r1 ^ 0xA24BAED4963EE407ull);
  const std::uint64_t r3 = splitmix(coord_key(g.x, g.y, g.z) ^ 0x5DEECE66Dull);
  return {g.x, g.y, g.z, g.norm2(), -std::int64_t(g.z) * g.z, std::int64_t(r1 >> 40),
          std::int64_t(r2 >> 40), std::int64_t(r3 >> 40)};
}

i128 det3(i128 a, i128 b, i128 c, i128 d, i128 e, i128 f, i128 g, i128 h, i128 i) {
  return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
}

int sgn(i128 v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); }

int orient3(const P3& a, const P3& b, const P3& c, const P3& d) {
  return sgn(det3(b.x - a.x, b.y - a.y, b.z - a.z, c.x - a.x, c.y - a.y, c.z - a.z, d.x - a.x,
                  d.y - a.y, d.z - a.z));
}

// Sign of the 4x4 lifted determinant with rows (p - e, h_p - h_e); negative
// when e lies inside the circumsphere of positively oriented abcd.
// `order` selects the height: 0 -> |p|^2, 1 -> hz, 2 -> w1, 3 -> w2, 4 -> w3.
struct LiftedMinors {
  i128 m[4];
};

LiftedMinors minors(const P3* p[4], const P3& e) {
  // Cofactors of the last column. Row r removed; sign (-1)^(r+3).
  LiftedMinors out{};
  for (int r = 0; r < 4; ++r) {
    const P3* q[3];
    int k = 0;
    for (int s = 0; s < 4; ++s)
      if (s != r) q[k++] = p[s];
    const i128 m = det3(q[0]->x - e.x, q[0]->y - e.y, q[0]->z - e.z, q[1]->x - e.x,
                        q[1]->y - e.y, q[1]->z - e.z, q[2]->x - e.x, q[2]->y - e.y,
                        q[2]->z - e.z);
    out.m[r] = ((r + 3) % 2 == 0) ? m : -m;
  }
  return out;
}

i128 lifted_det(const LiftedMinors& mn, const P3* p[4], const P3& e, int order) {
  i128 d = 0;
  for (int r = 0; r < 4; ++r) {
    std::int64_t c = 0;
    if (order == 0) c = p[r]->h - e.h;
    else if (order == 1) c = p[r]->hz - e.hz;
    else if (order == 2) c = p[r]->w1 - e.w1;
    else if (order == 3) c = p[r]->w2 - e.w2;
    else c = p[r]->w3 - e.w3;
    d += i128(c) * mn.m[r];
  }
  return d;
}

struct Tet {
  std::array<int, 4> v;
  std::array<int, 4> nb;  // nb[i] shares the face opposite v[i]; -1 = none
  bool alive;
};

class Builder {
 public:
  explicit Builder(std::span<const GridPoint> pts) {
    const std::int64_t K = std::int64_t(1) << 20;
    pts_.reserve(pts.size() + 4);
    for (const auto& g : pts) {
      if (std::abs(g.x) >= (1 << 19) || std::abs(g.y) >= (1 << 19) || std::abs(g.z) >= (1 << 19))
        throw Error("mesh generation failed: coordinates out of range");
      pts_.push_back(lift(g));
    }
    n_real_ = int(pts.size());
    const GridPoint super[4] = {{int(-K), int(-K), int(-K)},
                                {int(5 * K), int(-K), int(-K)},
                                {int(-K), int(5 * K), int(-K)},
                                {int(-K), int(-K), int(5 * K)}};
    for (const auto& g : super) pts_.push_back(lift(g));
    const int s = n_real_;
    Tet t{{s, s + 1, s + 2, s + 3}, {-1, -1, -1, -1}, true};
    if (orient3(pts_[std::size_t(s)], pts_[std::size_t(s + 1)], pts_[std::size_t(s + 2)],
                pts_[std::size_t(s + 3)]) < 0)
      std::swap(t.v[0], t.v[1]);
    tets_.push_back(t);
  }

  void insert(int pi) {
    const int start = locate(pi);
    if (!conflict(start, pi)) throw Error("mesh generation failed: point location");
    cavity_.clear();
    cavity_.push_back(start);
    tets_[std::size_t(start)].alive = false;  // mark as "in cavity"
    for (std::size_t q = 0; q < cavity_.size(); ++q) {
      const Tet& t = tets_[std::size_t(cavity_[q])];
      for (int f = 0; f < 4; ++f) {
        const int n = t.nb[std::size_t(f)];
        if (n < 0 || !tets_[std::size_t(n)].alive) continue;
        if (conflict(n, pi)) {
          tets_[std::size_t(n)].alive = false;
          cavity_.push_back(n);
        }
      }
    }

    // New tetrahedra on every boundary face of the cavity.
    created_.clear();
    for (const int ci : cavity_) {
      for (int f = 0; f < 4; ++f) {
        const Tet& t = tets_[std::size_t(ci)];
        const int n = t.nb[std::size_t(f)];
        if (n >= 0 && !tets_[std::size_t(n)].alive) continue;  // interior face
        Tet nt{t.v, {-1, -1, -1, -1}, true};
        nt.v[std::size_t(f)] = pi;
        nt.nb[std::size_t(f)] = n;
        if (orient3(P(nt.v[0]), P(nt.v[1]), P(nt.v[2]), P(nt.v[3])) <= 0)
          throw Error("mesh generation failed: degenerate cavity");
        const int id = allocate(nt);
        if (n >= 0) {
          Tet& nn = tets_[std::size_t(n)];
          for (int g = 0; g < 4; ++g)
            if (nn.nb[std::size_t(g)] == ci) nn.nb[std::size_t(g)] = id;
        }
        created_.push_back(id);
      }
    }

    // Link new tets to each other across faces containing the new point.
    links_.clear();
    for (const int id : created_) {
      const Tet& t = tets_[std::size_t(id)];
      for (int f = 0; f < 4; ++f) {
        if (t.v[std::size_t(f)] == pi) continue;
        int a = -1, b = -1;
        for (int g = 0; g < 4; ++g) {
          if (g == f || t.v[std::size_t(g)] == pi) continue;
          (a < 0 ? a : b) = t.v[std::size_t(g)];
        }
        if (a > b) std::swap(a, b);
        links_.push_back({a, b, id, f});
      }
    }
    std::sort(links_.begin(), links_.end(), [](const Link& p, const Link& q) {
      return p.a != q.a ? p.a < q.a : p.b < q.b;
    });
    for (std::size_t k = 0; k + 1 < links_.size(); k += 2) {
      const Link& p = links_[k];
      const Link& q = links_[k + 1];
      if (p.a != q.a || p.b != q.b) throw Error("mesh generation failed: cavity not closed");
      tets_[std::size_t(p.tet)].nb[std::size_t(p.face)] = q.tet;
      tets_[std::size_t(q.tet)].nb[std::size_t(q.face)] = p.tet;
    }
    for (const int ci : cavity_) free_.push_back(ci);
    last_ = created_.front();
  }

  std::vector<std::array<int, 4>> result() const {
    std::vector<std::array<int, 4>> out;
    for (const auto& t : tets_) {
      if (!t.alive) continue;
      if (std::any_of(t.v.begin(), t.v.end(), [&](int v) { return v >= n_real_; })) continue;
      out.push_back(t.v);
    }
    return out;
  }

 private:
  struct Link {
    int a, b, tet, face;
  };

  const P3& P(int i) const { return pts_[std::size_t(i)]; }

  int allocate(const Tet& t) {
    if (!free_.empty()) {
      const int id = free_.back();
      free_.pop_back();
      tets_[std::size_t(id)] = t;
      return id;
    }
    tets_.push_back(t);
    return int(tets_.size() - 1);
  }

  bool conflict(int ti, int pi) const {
    const Tet& t = tets_[std::size_t(ti)];
    const P3* p[4] = {&P(t.v[0]), &P(t.v[1]), &P(t.v[2]), &P(t.v[3])};
    const P3& e = P(pi);
    const LiftedMinors mn = minors(p, e);
    for (int order = 0; order < 5; ++order) {
      const int s = sgn(lifted_det(mn, p, e, order));
      if (s != 0) return s < 0;
    }
    throw Error("mesh generation failed: unresolved degeneracy");
  }

  int locate(int pi) {
    int t = last_;
    std::uint64_t rng = std::uint64_t(pi) * 0x2545F4914F6CDD1Dull + 1;
    for (std::size_t steps = 0; steps < 4 * tets_.size() + 100; ++steps) {
      const Tet& tt = tets_[std::size_t(t)];
      rng = splitmix(rng);
      const int off = int(rng & 3u);
      int next = -1;
      for (int k = 0; k < 4; ++k) {
        const int f = (k + off) & 3;
        std::array<int, 4> v = tt.v;
        v[std::size_t(f)] = pi;
        if (orient3(P(v[0]), P(v[1]), P(v[2]), P(v[3])) < 0) {
          next = tt.nb[std::size_t(f)];
          break;
        }
      }
      if (next < 0) {
        // Either inside this tet or outside the super tetrahedron.
        bool inside = true;
        for (int f = 0; f < 4; ++f) {
          std::array<int, 4> v = tt.v;
          v[std::size_t(f)] = pi;
          if (orient3(P(v[0]), P(v[1]), P(v[2]), P(v[3])) < 0) inside = false;
        }
        if (!inside) throw Error("mesh generation failed: point outside bounding tetrahedron");
        return t;
      }
      t = next;
    }
    throw Error("mesh generation failed: walk did not terminate");
  }

  std::vector<P3> pts_;
  int n_real_ = 0;
  std::vector<Tet> tets_;
  std::vector<int> free_;
  std::vector<int> cavity_;
  std::vector<int> created_;
  std::vector<Link> links_;
  int last_ = 0;
};

std::uint64_t morton_key(const GridPoint& g, std::int32_t offset) {
  auto spread = [](std::uint64_t v) {
    std::uint64_t x = v & 0x1fffff;
    x = (x | x << 32) & 0x1f00000000ffffull;
    x = (x | x << 16) & 0x1f0000ff0000ffull;
    x = (x | x << 8) & 0x100f00f00f00f00full;
    x = (x | x << 4) & 0x10c30c30c30c30c3ull;
    x = (x | x << 2) & 0x1249249249249249ull;
    return x;
  };
  return spread(std::uint64_t(g.x + offset)) | (spread(std::uint64_t(g.y + offset)) << 1) |
         (spread(std::uint64_t(g.z + offset)) << 2);
}

}  // namespace

std::vector<std::array<int, 4>> delaunay_tetrahedralize(std::span<const GridPoint> points) {
  {
    std::unordered_set<GridPoint, GridPointHash> seen(points.begin(), points.end());
    if (seen.size() != points.size()) throw Error("mesh generation failed: duplicate points");
  }
  Builder b(points);
  std::vector<int> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  const std::int32_t offset = 1 << 19;
  std::sort(order.begin(), order.end(), [&](int p, int q) {
    const auto kp = morton_key(points[std::size_t(p)], offset);
    const auto kq = morton_key(points[std::size_t(q)], offset);
    if (kp != kq) return kp < kq;
    return p < q;
  });
  for (const int i : order) b.insert(i);
  return b.result();
}

namespace predicates {

int orient(const GridPoint& a, const GridPoint& b, const GridPoint& c, const GridPoint& d) {
  return orient3(lift(a), lift(b), lift(c), lift(d));
}

int insphere(const GridPoint& a, const GridPoint& b, const GridPoint& c, const GridPoint& d,
             const GridPoint& e) {
  const P3 pa = lift(a), pb = lift(b), pc = lift(c), pd = lift(d), pe = lift(e);
  const P3* p[4] = {&pa, &pb, &pc, &pd};
  return -sgn(lifted_det(minors(p, pe), p, pe, 0));
}

}  // namespace predicates

}  // namespace gfc
