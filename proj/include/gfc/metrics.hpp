#pragma once

#include <optional>
#include <span>
#include <vector>

#include "gfc/coupling.hpp"
#include "gfc/symmetric_atomistic.hpp"

namespace gfc {

/// Displacement of a model at arbitrary lattice sites: the site value where
/// the model has the site, P1 interpolation inside the mesh, nothing outside.
std::vector<std::optional<Vec3>> model_field_at(const CoupledModel& model, const Eigen::VectorXd& x,
                                 std::span<const GridPoint> points);

/// Discrete energy-norm error: square root of the sum, over nearest-neighbor
/// bonds whose two reference sites lie within `comparison_radius`, of
/// |(u(l') - u(l)) - (u_ref(l') - u_ref(l))|^2.
/// Throws "domain mismatch" if the reference has a different lattice constant
/// or defect, or if one of those sites lies outside the model's mesh.
double gradient_error(const CoupledModel& model, const Eigen::VectorXd& x,
                      const SymmetricAtomistic& reference, const Eigen::VectorXd& y,
                      double comparison_radius);

/// E(u) - E(0) of the model functional (BQCF: the BGFC functional).
double defect_energy(const CoupledModel& model, const Eigen::VectorXd& x);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares fit of log(error) against log(ndof). Throws
/// "degenerate point" for a nonpositive or non-finite entry, or fewer than
/// three points or fewer than two distinct ndof values.
SlopeFit fit_convergence_slope(std::span<const double> ndof, std::span<const double> error);

}  // namespace gfc
