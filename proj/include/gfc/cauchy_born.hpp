#pragma once

#include <span>
#include <vector>

#include "gfc/potential.hpp"

namespace gfc {

/// Perfect-lattice FCC difference vectors with |rho| <= radius.
std::vector<Vec3> fcc_shell(double lattice_constant, double radius);

/// Cauchy-Born strain energy density induced by a site potential:
/// W(F) = V({F rho}) / cell_volume over a fixed reference shell.
class CBDensity {
 public:
  /// `shell_radius` should match the atomistic neighbor-list cutoff so the
  /// continuum and atomistic models see the same interaction set.
  CBDensity(const SitePotential& potential, double lattice_constant, double shell_radius);

  const SitePotential& potential() const { return potential_; }
  std::span<const Vec3> shell() const { return shell_; }
  double cell_volume() const { return cell_volume_; }
  double lattice_constant() const { return lattice_constant_; }

  double energy_density(const Mat3& F) const;
  /// W(F) and dW/dF.
  double energy_and_stress(const Mat3& F, Mat3& stress) const;

 private:
  void check(const Mat3& F) const;

  SitePotential potential_;
  double lattice_constant_;
  double cell_volume_;
  std::vector<Vec3> shell_;
};

double cb_energy_density(const CBDensity& cb, const Mat3& F);
Mat3 cb_stress(const CBDensity& cb, const Mat3& F);

/// Per-site perfect-lattice energy and its derivative with respect to the
/// lattice constant (uniform scaling).
std::pair<double, double> lattice_site_energy(const SitePotential& pot, double lattice_constant);

/// Root of d(site energy)/da inside [a_lo, a_hi]: bisection, then Newton.
double calibrate_lattice_constant(const SitePotential& pot, double a_lo, double a_hi);

struct CalibratedPotential {
  SitePotential potential;
  double lattice_constant;
  int iterations;
};

/// Cutoff and taper start given as multiples of the equilibrium lattice
/// constant; resolves the self-consistent pair (a*, cutoff = factor * a*)
/// by secant iteration on a -> calibrate(potential(cutoff(a))).
CalibratedPotential calibrate_scaled_cutoff(const PotentialParams& params, double cutoff_factor,
                                            double taper_factor, double a_lo, double a_hi);

}  // namespace gfc
