#pragma once

#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Sparse>

#include "gfc/blending.hpp"
#include "gfc/cauchy_born.hpp"
#include "gfc/lattice.hpp"
#include "gfc/mesh.hpp"
#include "gfc/potential.hpp"

namespace gfc {

enum class ModelKind { atm, bqce, bqcf, bgfc };

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

/// Geometry and discretisation of one coupled model. Lengths are absolute.
struct ModelSpec {
  ModelKind kind = ModelKind::bgfc;
  double r0 = 0.0;
  double r1 = 0.0;
  double r_domain = 0.0;
  BlendShape shape = BlendShape::quintic;
  double grading_exponent = 1.5;
  /// Neighbor lists reach cutoff + skin * a so that compressed bonds
  /// entering the cutoff are never missed.
  double skin = 0.1;
  /// Depth of the clamped shell of a pure atomistic ball, in cutoffs. Two
  /// cutoffs keep every free site's force independent of the free surface,
  /// which many-body potentials need for u = 0 to be an equilibrium.
  double clamp_cutoffs = 2.0;
};

/// How a lattice site's displacement is obtained from the nodal field.
struct SiteMap {
  int vertex = -1;  // >= 0: the site is this mesh vertex
  int tet = -1;     // otherwise P1 interpolation in this tet
  std::array<double, 4> weights{};
};

/// An assembled ATM / BQCE / BQCF / BGFC model. Immutable once built.
///
/// Degrees of freedom are the displacements of free mesh vertices, packed as
/// a flat vector of 3 * num_free entries. For ATM the "mesh" is the lattice
/// itself (every site a vertex, no tetrahedra).
class CoupledModel {
 public:
  ModelKind kind = ModelKind::atm;
  ModelSpec spec;
  double lattice_constant = 0.0;
  double list_radius = 0.0;
  /// True when beta vanishes on the whole domain; the model is then the
  /// atomistic ball with a mesh that has no tetrahedra.
  bool degenerate = false;

  DefectedLattice lattice;
  GradedMesh mesh;
  BlendProfile blend;
  std::shared_ptr<const SitePotential> potential;
  std::shared_ptr<const CBDensity> cb;

  std::vector<double> site_beta;
  std::vector<double> site_weights;  // 1 - beta (ATM: 1)
  std::vector<int> active_sites;     // sites with a nonzero weight
  std::vector<SiteMap> site_map;
  std::vector<double> vertex_beta;
  std::vector<double> quad_weights;  // beta(barycenter) * volume
  std::vector<int> quad_tets;        // tets with a nonzero quadrature weight

  std::vector<int> free_index;  // per vertex; -1 when clamped
  std::vector<int> free_vertices;

  /// Dead load of the BGFC energy; zero for every other variant.
  Eigen::VectorXd ghost_load;
  /// The same correction kept for BQCF so its defect energy can be reported
  /// in the BGFC functional. Empty if it could not be formed.
  Eigen::VectorXd energy_load;

  // Reference-state values used to accumulate energy differences with
  // little cancellation error.
  std::vector<double> site_energy_ref;
  double cb_energy_ref = 0.0;
  Mat3 cb_stress_ref = Mat3::Zero();

  // BQCF data.
  std::vector<int> force_targets;  // free vertices with beta < 1
  std::vector<int> force_sites;    // sites whose site energy feeds those forces
  std::vector<int> cb_force_tets;  // tets touching a free vertex with beta > 0

  std::size_t num_free() const { return free_vertices.size(); }
  std::size_t num_dofs() const { return 3 * free_vertices.size(); }

  /// Nodal displacements (clamped entries zero) from a free-dof vector.
  std::vector<Vec3> expand(const Eigen::VectorXd& x) const;
  /// Free-dof vector from nodal values (clamped entries dropped).
  Eigen::VectorXd restrict(std::span<const Vec3> nodal) const;
  /// Displacement of every lattice site.
  std::vector<Vec3> site_displacements(std::span<const Vec3> nodal) const;
  /// Adjoint of site_displacements: scatters per-site vectors onto vertices.
  std::vector<Vec3> pull_back(std::span<const Vec3> per_site) const;
};

/// Builds the model for `spec` on a ball around the defect. For BGFC (and
/// BQCF, for energy reporting) the homogeneous companion model is assembled
/// as well to form the dead load.
CoupledModel build_model(const SitePotential& potential, double lattice_constant,
                         const DefectSpec& defect, const ModelSpec& spec);

struct EnergyValue {
  double total = 0.0;   // E(u)
  double change = 0.0;  // E(u) - E(0), accumulated term by term
};

/// Energy of the model's own functional (BQCF: the BGFC functional) and,
/// if `grad` is given, its gradient over the free dofs.
EnergyValue model_energy(const CoupledModel& model, const Eigen::VectorXd& x,
                         Eigen::VectorXd* grad = nullptr);

/// Sum over all sites of V(Du). Requires ATM or a degenerate blend.
double atomistic_energy(const CoupledModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd atomistic_gradient(const CoupledModel& model, const Eigen::VectorXd& x);

double bqce_energy(const CoupledModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd bqce_gradient(const CoupledModel& model, const Eigen::VectorXd& x);

double bgfc_energy(const CoupledModel& model, const Eigen::VectorXd& x);
/// Dead-load assembly: bqce gradient minus the ghost load.
Eigen::VectorXd bgfc_gradient(const CoupledModel& model, const Eigen::VectorXd& x);
/// Renormalised-potential assembly: every site energy is replaced by
/// V(Du) - <dV(0), Du> with the perfect-lattice dV(0), sites removed by the
/// defect keep their (linear) correction term, and W by W(F) - P(I):(F - I).
Eigen::VectorXd bgfc_gradient_renormalized(const CoupledModel& model,
                                           const Eigen::VectorXd& x);

/// Blended force (1 - beta) f_atom + beta f_cb at every free vertex, packed
/// like the dofs. Zero at equilibrium; not the gradient of any energy.
Eigen::VectorXd bqcf_residual(const CoupledModel& model, const Eigen::VectorXd& x);

/// Gradient of the BQCE energy at u = 0 on the defect-free configuration with
/// the same radii, transferred to `model`'s free dofs by grid position.
/// Throws "defect touches blend region" unless every defect modification
/// lies more than one cutoff inside the blend inner radius.
Eigen::VectorXd compute_ghost_load(const CoupledModel& model);

/// Force-like quantity whose vanishing defines equilibrium: the energy
/// gradient for conservative models, minus the BQCF residual otherwise.
Eigen::VectorXd equilibrium_residual(const CoupledModel& model, const Eigen::VectorXd& x);

/// Scalar Laplacian on the free vertices: P1 stiffness of the mesh, or the
/// nearest-neighbor graph Laplacian when there are no tetrahedra.
Eigen::SparseMatrix<double> scalar_laplacian(const CoupledModel& model);

/// Per-free-vertex radius, handy for radial diagnostics.
std::vector<double> free_vertex_radii(const CoupledModel& model);

}  // namespace gfc
