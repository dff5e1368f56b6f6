#pragma once

#include <optional>
#include <vector>

#include <Eigen/Sparse>

#include "gfc/coupling.hpp"
#include "gfc/lattice.hpp"
#include "gfc/potential.hpp"
#include "gfc/solvers.hpp"

namespace gfc {

/// Pure atomistic ball reduced by the point symmetry of the defect.
///
/// H is the subgroup of the cubic group that maps the removed and added
/// sites onto themselves. Only one site per H-orbit is stored; displacements
/// are restricted to H-equivariant fields (u(h p) = h u(p)), which contain
/// the equilibrium because the energy is H-invariant. A representative whose
/// stabiliser is nontrivial only moves within the stabiliser's fixed
/// subspace. Energies and gradients are exactly those of the full ball
/// evaluated at the equivariant field, so a reduced equilibrium is a full
/// one.
///
/// Sites with |x| > radius - clamp_cutoffs * cutoff are clamped, matching
/// the ATM variant of CoupledModel.
class SymmetricAtomistic {
 public:
  SymmetricAtomistic(const SitePotential& potential, double lattice_constant,
                     const DefectSpec& defect, double radius, double skin = 0.1,
                     double clamp_cutoffs = 2.0);

  double radius() const { return radius_; }
  const DefectSpec& defect() const { return defect_; }
  double lattice_constant() const { return a_; }
  int group_order() const { return int(ops_.size()); }
  std::size_t num_representatives() const { return reps_.size(); }
  /// Number of sites of the full ball (sum of orbit sizes).
  std::size_t num_sites() const { return num_sites_; }
  std::size_t num_dofs() const { return std::size_t(num_dofs_); }

  /// Energy of the full ball and its gradient with respect to the reduced
  /// coordinates.
  EnergyValue energy(const Eigen::VectorXd& y, Eigen::VectorXd* grad = nullptr) const;
  /// Infinity norm of the full-space gradient, recovered from a reduced one.
  double residual_norm(const Eigen::VectorXd& grad) const;
  /// Nearest-neighbor graph Laplacian of the full ball restricted to
  /// equivariant fields; used as preconditioner.
  Eigen::SparseMatrix<double> laplacian() const;

  /// Displacement of the site at `p`, or nothing if there is no site there.
  std::optional<Vec3> displacement(const GridPoint& p, const Eigen::VectorXd& y) const;

  SolveResult solve(const SolverConfig& cfg) const;

 private:
  struct Rep {
    GridPoint p;
    int multiplicity = 1;
    int dim = 0;        // dimension of the admissible subspace (0 if clamped)
    int offset = -1;    // first reduced coordinate
    Eigen::Matrix3d basis = Eigen::Matrix3d::Zero();  // first `dim` columns used
    double energy_ref = 0.0;
  };
  struct Link {
    int rep;          // representative of the neighbor
    int op;           // index into ops_: maps rep's site onto the neighbor
    int slot;         // index of the reverse link inside rep's list
    GridPoint offset; // reference neighbor minus site
  };

  bool site_exists(const GridPoint& p) const;
  /// Representative index and op index g with g(rep) = p.
  std::pair<int, int> canonical(const GridPoint& p) const;
  Vec3 rep_displacement(int r, const Eigen::VectorXd& y) const;

  DefectSpec defect_;
  double a_ = 0.0;
  double radius_ = 0.0;
  std::int64_t radius2_grid_ = 0;  // (2 radius / a)^2, rounded down
  std::shared_ptr<const SitePotential> potential_;
  std::vector<CubicOp> ops_;
  std::vector<Mat3> matrices_;
  std::vector<int> inverse_;
  std::vector<GridPoint> removed_, added_;
  std::vector<Rep> reps_;
  std::unordered_map<GridPoint, int, GridPointHash> rep_index_;
  std::vector<std::size_t> link_offsets_;
  std::vector<Link> links_;
  std::size_t num_sites_ = 0;
  Eigen::Index num_dofs_ = 0;
};

}  // namespace gfc
