#include "gfc/symmetric_atomistic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gfc {

namespace {

// Nearest-neighbor bonds: |offset|^2 = 2 in half-lattice units, plus the
// shorter octahedral-interstitial bonds.
constexpr std::int64_t nn_norm2 = 2;

bool fcc_point(const GridPoint& p) { return ((p.x + p.y + p.z) & 1) == 0; }

std::vector<GridPoint> sorted(std::vector<GridPoint> v) {
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<GridPoint> mapped(const CubicOp& op, const std::vector<GridPoint>& v) {
  std::vector<GridPoint> out;
  out.reserve(v.size());
  for (const auto& p : v) out.push_back(op.apply(p));
  return sorted(std::move(out));
}

class ReducedObjective final : public EnergyObjective {
 public:
  explicit ReducedObjective(const SymmetricAtomistic& s) : s_(s) {}
  std::size_t size() const override { return s_.num_dofs(); }
  double evaluate(const Eigen::VectorXd& y, Eigen::VectorXd& g) const override {
    return s_.energy(y, &g).change;
  }
  double residual_norm(const Eigen::VectorXd& g) const override { return s_.residual_norm(g); }

 private:
  const SymmetricAtomistic& s_;
};

}  // namespace

SymmetricAtomistic::SymmetricAtomistic(const SitePotential& potential, double a,
                                       const DefectSpec& defect, double radius, double skin,
                                       double clamp_cutoffs)
    : defect_(defect), a_(a), radius_(radius), potential_(std::make_shared<SitePotential>(potential)) {
  if (!(a > 0.0)) throw Error("lattice constant must be positive");
  if (radius < 2.0 * a) throw Error("domain below minimum");
  const double list_radius = potential.cutoff() + skin * a;
  const double limit = 2.0 * radius / a;
  const double limit2 = limit * limit * (1.0 + 1e-14);
  radius2_grid_ = std::int64_t(std::floor(limit2));

  removed_ = sorted(defect_removed_sites(defect));
  added_ = sorted(defect_added_sites(defect));
  for (const auto& p : removed_)
    if (!fcc_point(p) || double(p.norm2()) > limit2) throw Error("defect site not present in lattice");

  // Symmetry group of the defect.
  for (const auto& op : cubic_group()) {
    if (mapped(op, removed_) == removed_ && mapped(op, added_) == added_) ops_.push_back(op);
  }
  matrices_.reserve(ops_.size());
  for (const auto& op : ops_) matrices_.push_back(op.matrix());
  inverse_.assign(ops_.size(), -1);
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const CubicOp inv = ops_[i].inverse();
    for (std::size_t j = 0; j < ops_.size(); ++j)
      if (ops_[j].perm == inv.perm && ops_[j].sign == inv.sign) inverse_[i] = int(j);
  }

  // Representatives: sites that are the lexicographic minimum of their orbit.
  auto is_min = [&](const GridPoint& p) {
    for (const auto& op : ops_)
      if (op.apply(p) < p) return false;
    return true;
  };
  auto add_rep = [&](const GridPoint& p) {
    Rep r;
    r.p = p;
    Mat3 proj = Mat3::Zero();
    int stab = 0;
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      if (ops_[i].apply(p) == p) {
        proj += matrices_[i];
        ++stab;
      }
    }
    r.multiplicity = int(ops_.size()) / stab;
    proj /= double(stab);
    const double rr = p.to_position(a).norm();
    if (rr <= radius - clamp_cutoffs * potential.cutoff()) {
      // The averaged stabiliser is the orthogonal projector onto its fixed
      // subspace; its unit eigenvectors span that subspace.
      Eigen::SelfAdjointEigenSolver<Mat3> es(proj);
      for (int c = 2; c >= 0; --c) {
        if (es.eigenvalues()[c] > 0.5) r.basis.col(r.dim++) = es.eigenvectors().col(c);
      }
    }
    rep_index_.emplace(p, int(reps_.size()));
    reps_.push_back(r);
    num_sites_ += std::size_t(r.multiplicity);
  };
  const int n = int(std::floor(limit)) + 1;
  for (int x = -n; x <= n; ++x) {
    for (int y = -n; y <= n; ++y) {
      for (int z = -n; z <= n; ++z) {
        const GridPoint p{x, y, z};
        if (!fcc_point(p) || double(p.norm2()) > limit2) continue;
        if (std::binary_search(removed_.begin(), removed_.end(), p)) continue;
        if (is_min(p)) add_rep(p);
      }
    }
  }
  for (const auto& p : added_)
    if (is_min(p)) add_rep(p);

  for (auto& r : reps_) {
    if (r.dim == 0) continue;
    r.offset = int(num_dofs_);
    num_dofs_ += r.dim;
  }

  // Neighbor links. Offsets within the list radius on the half-lattice grid.
  const int reach = int(std::ceil(2.0 * list_radius / a));
  const double list2 = std::pow(2.0 * list_radius / a, 2);
  std::vector<GridPoint> offsets;
  for (int x = -reach; x <= reach; ++x)
    for (int y = -reach; y <= reach; ++y)
      for (int z = -reach; z <= reach; ++z) {
        const GridPoint o{x, y, z};
        if (o.norm2() > 0 && double(o.norm2()) <= list2) offsets.push_back(o);
      }
  link_offsets_.assign(reps_.size() + 1, 0);
  for (std::size_t r = 0; r < reps_.size(); ++r) {
    const GridPoint p = reps_[r].p;
    for (const auto& o : offsets) {
      const GridPoint q = p + o;
      if (!site_exists(q)) continue;
      const auto [t, g] = canonical(q);
      links_.push_back({t, g, -1, o});
    }
    link_offsets_[r + 1] = links_.size();
  }
  // Reverse slots: the neighbor q = g(p_t) sees p_r at offset p_r - q, which
  // is g applied to an offset of p_t's own list.
  for (std::size_t r = 0; r < reps_.size(); ++r) {
    for (std::size_t e = link_offsets_[r]; e < link_offsets_[r + 1]; ++e) {
      auto& l = links_[e];
      const GridPoint back = GridPoint{0, 0, 0} - l.offset;
      const GridPoint want = ops_[std::size_t(inverse_[std::size_t(l.op)])].apply(back);
      const auto t = std::size_t(l.rep);
      for (std::size_t f = link_offsets_[t]; f < link_offsets_[t + 1]; ++f) {
        if (links_[f].offset == want) {
          l.slot = int(f - link_offsets_[t]);
          break;
        }
      }
      if (l.slot < 0) throw Error("symmetry reduction is inconsistent");
    }
  }

  std::vector<Vec3> d;
  for (std::size_t r = 0; r < reps_.size(); ++r) {
    d.clear();
    for (std::size_t e = link_offsets_[r]; e < link_offsets_[r + 1]; ++e) d.push_back(links_[e].offset.to_position(a));
    reps_[r].energy_ref = potential.energy(d);
  }
}

bool SymmetricAtomistic::site_exists(const GridPoint& p) const {
  if (std::binary_search(added_.begin(), added_.end(), p)) return true;
  if (!fcc_point(p) || p.norm2() > radius2_grid_) return false;
  return !std::binary_search(removed_.begin(), removed_.end(), p);
}

std::pair<int, int> SymmetricAtomistic::canonical(const GridPoint& p) const {
  GridPoint best = p;
  int best_op = -1;
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const GridPoint q = ops_[i].apply(p);
    if (best_op < 0 || q < best) {
      best = q;
      best_op = int(i);
    }
  }
  const auto it = rep_index_.find(best);
  if (it == rep_index_.end()) throw Error("site has no representative");
  // ops_[best_op] maps p to the rep; its inverse maps the rep to p.
  return {it->second, inverse_[std::size_t(best_op)]};
}

Vec3 SymmetricAtomistic::rep_displacement(int r, const Eigen::VectorXd& y) const {
  const Rep& rep = reps_[std::size_t(r)];
  Vec3 u = Vec3::Zero();
  for (int c = 0; c < rep.dim; ++c) u += y[rep.offset + c] * rep.basis.col(c);
  return u;
}

EnergyValue SymmetricAtomistic::energy(const Eigen::VectorXd& y, Eigen::VectorXd* grad) const {
  if (y.size() != num_dofs_) throw Error("displacement has the wrong size");
  const std::size_t nr = reps_.size();
  std::vector<Vec3> u(nr);
  for (std::size_t r = 0; r < nr; ++r) u[r] = rep_displacement(int(r), y);

  std::vector<Vec3> slot_grad;
  if (grad) slot_grad.resize(links_.size());
  std::vector<Vec3> d;
  EnergyValue out;
  const SitePotential& pot = *potential_;
  for (std::size_t r = 0; r < nr; ++r) {
    const std::size_t b = link_offsets_[r], e = link_offsets_[r + 1];
    d.resize(e - b);
    for (std::size_t k = b; k < e; ++k) {
      const auto& l = links_[k];
      d[k - b] = l.offset.to_position(a_) + matrices_[std::size_t(l.op)] * u[std::size_t(l.rep)] - u[r];
    }
    const double v = grad ? pot.energy_and_gradient(d, std::span<Vec3>(slot_grad.data() + b, e - b))
                          : pot.energy(d);
    const double m = reps_[r].multiplicity;
    out.total += m * v;
    out.change += m * (v - reps_[r].energy_ref);
  }
  if (grad) {
    grad->setZero(num_dofs_);
    for (std::size_t r = 0; r < nr; ++r) {
      const Rep& rep = reps_[r];
      if (rep.dim == 0) continue;
      Vec3 G = Vec3::Zero();
      for (std::size_t k = link_offsets_[r]; k < link_offsets_[r + 1]; ++k) {
        const auto& l = links_[k];
        G -= slot_grad[k];
        G += matrices_[std::size_t(l.op)] *
             slot_grad[link_offsets_[std::size_t(l.rep)] + std::size_t(l.slot)];
      }
      for (int c = 0; c < rep.dim; ++c) (*grad)[rep.offset + c] = rep.multiplicity * rep.basis.col(c).dot(G);
    }
  }
  return out;
}

double SymmetricAtomistic::residual_norm(const Eigen::VectorXd& grad) const {
  double worst = 0.0;
  for (const auto& rep : reps_) {
    if (rep.dim == 0) continue;
    Vec3 G = Vec3::Zero();
    for (int c = 0; c < rep.dim; ++c) G += grad[rep.offset + c] * rep.basis.col(c);
    worst = std::max(worst, G.lpNorm<Eigen::Infinity>() / rep.multiplicity);
  }
  return worst;
}

Eigen::SparseMatrix<double> SymmetricAtomistic::laplacian() const {
  // E_L = 1/4 sum_p sum_{q nn p} |u_p - u_q|^2 restricted to equivariant
  // fields: 1/4 sum_r m_r sum_{q nn r} |B_r y_r - g_q B_t y_t|^2.
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t r = 0; r < reps_.size(); ++r) {
    const Rep& R = reps_[r];
    if (R.dim == 0) continue;
    const Eigen::MatrixXd Br = R.basis.leftCols(R.dim);
    for (std::size_t k = link_offsets_[r]; k < link_offsets_[r + 1]; ++k) {
      const auto& l = links_[k];
      if (l.offset.norm2() > nn_norm2) continue;
      const double w = 0.5 * R.multiplicity;
      // d/dy_r of the bond term: w * B_r^T (B_r y_r - g B_t y_t).
      for (int i = 0; i < R.dim; ++i) trip.emplace_back(R.offset + i, R.offset + i, w);
      const Rep& T = reps_[std::size_t(l.rep)];
      if (T.dim > 0) {
        const Eigen::MatrixXd C = Br.transpose() * matrices_[std::size_t(l.op)] * T.basis.leftCols(T.dim);
        for (int i = 0; i < R.dim; ++i)
          for (int j = 0; j < T.dim; ++j) {
            // Symmetrised: the same bond seen from t contributes the transpose.
            trip.emplace_back(R.offset + i, T.offset + j, -0.5 * w * C(i, j));
            trip.emplace_back(T.offset + j, R.offset + i, -0.5 * w * C(i, j));
          }
      }
    }
  }
  Eigen::SparseMatrix<double> L(num_dofs_, num_dofs_);
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

std::optional<Vec3> SymmetricAtomistic::displacement(const GridPoint& p, const Eigen::VectorXd& y) const {
  if (!site_exists(p)) return std::nullopt;
  const auto [t, g] = canonical(p);
  return matrices_[std::size_t(g)] * rep_displacement(t, y);
}

SolveResult SymmetricAtomistic::solve(const SolverConfig& cfg) const {
  const auto L = laplacian();
  const auto M = make_factor_preconditioner(L, 1);
  return minimize(ReducedObjective(*this), Eigen::VectorXd::Zero(num_dofs_), cfg, M.get());
}

}  // namespace gfc
