#include "gfc/cauchy_born.hpp"

#include <cmath>

namespace gfc {

std::vector<Vec3> fcc_shell(double lattice_constant, double radius) {
  std::vector<Vec3> shell;
  const int n = int(std::ceil(2.0 * radius / lattice_constant)) + 1;
  const double lim = 2.0 * radius / lattice_constant;
  const double lim2 = lim * lim * (1.0 + 1e-14);
  for (int i = -n; i <= n; ++i)
    for (int j = -n; j <= n; ++j)
      for (int k = -n; k <= n; ++k) {
        if ((i + j + k) % 2 != 0) continue;
        const GridPoint g{i, j, k};
        if (g.norm2() == 0 || double(g.norm2()) > lim2) continue;
        shell.push_back(g.to_position(lattice_constant));
      }
  return shell;
}

CBDensity::CBDensity(const SitePotential& potential, double lattice_constant,
                     double shell_radius)
    : potential_(potential),
      lattice_constant_(lattice_constant),
      cell_volume_(lattice_constant * lattice_constant * lattice_constant / 4.0),
      shell_(fcc_shell(lattice_constant, shell_radius)) {}

void CBDensity::check(const Mat3& F) const {
  if (!(F.determinant() > 0.0)) throw InvertedElement("inverted element");
}

double CBDensity::energy_density(const Mat3& F) const {
  check(F);
  std::vector<Vec3> deformed(shell_.size());
  for (std::size_t k = 0; k < shell_.size(); ++k) deformed[k] = F * shell_[k];
  return potential_.energy(deformed) / cell_volume_;
}

double CBDensity::energy_and_stress(const Mat3& F, Mat3& stress) const {
  check(F);
  thread_local std::vector<Vec3> deformed, grad;
  deformed.resize(shell_.size());
  grad.resize(shell_.size());
  for (std::size_t k = 0; k < shell_.size(); ++k) deformed[k] = F * shell_[k];
  const double v = potential_.energy_and_gradient(deformed, grad);
  stress.setZero();
  for (std::size_t k = 0; k < shell_.size(); ++k) stress += grad[k] * shell_[k].transpose();
  stress /= cell_volume_;
  return v / cell_volume_;
}

double cb_energy_density(const CBDensity& cb, const Mat3& F) { return cb.energy_density(F); }

Mat3 cb_stress(const CBDensity& cb, const Mat3& F) {
  Mat3 P;
  cb.energy_and_stress(F, P);
  return P;
}

std::pair<double, double> lattice_site_energy(const SitePotential& pot, double lattice_constant) {
  const auto shell = fcc_shell(lattice_constant, pot.cutoff());
  std::vector<Vec3> grad(shell.size());
  const double e = pot.energy_and_gradient(shell, grad);
  double de = 0.0;
  for (std::size_t k = 0; k < shell.size(); ++k) de += grad[k].dot(shell[k]);
  return {e, de / lattice_constant};
}

double calibrate_lattice_constant(const SitePotential& pot, double a_lo, double a_hi) {
  if (!(a_lo > 0.0 && a_hi > a_lo)) throw Error("bracket invalid");
  auto slope = [&](double a) { return lattice_site_energy(pot, a).second; };
  double f_lo = slope(a_lo);
  const double f_hi = slope(a_hi);
  if (f_lo == 0.0) return a_lo;
  if (f_hi == 0.0) return a_hi;
  if ((f_lo > 0.0) == (f_hi > 0.0)) throw Error("bracket invalid");

  double lo = a_lo, hi = a_hi;
  while (hi - lo > 1e-9 * hi) {
    const double mid = 0.5 * (lo + hi);
    const double fm = slope(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (f_lo > 0.0)) {
      lo = mid;
      f_lo = fm;
    } else {
      hi = mid;
    }
  }

  double a = 0.5 * (lo + hi);
  double best = a, best_f = std::abs(slope(a));
  for (int it = 0; it < 50 && best_f > 1e-12; ++it) {
    const double h = 1e-6 * a;
    const double curv = (slope(a + h) - slope(a - h)) / (2.0 * h);
    if (!(curv != 0.0)) break;
    a -= slope(a) / curv;
    const double f = std::abs(slope(a));
    if (f < best_f) {
      best = a;
      best_f = f;
    } else if (it > 3) {
      break;
    }
  }
  return best;
}

CalibratedPotential calibrate_scaled_cutoff(const PotentialParams& params, double cutoff_factor,
                                            double taper_factor, double a_lo, double a_hi) {
  if (!(taper_factor < cutoff_factor)) throw Error("taper factor must be below cutoff factor");
  auto make = [&](double a) {
    return SitePotential(params, make_taper(taper_factor * a, cutoff_factor * a));
  };
  auto fixed_point = [&](double a) { return calibrate_lattice_constant(make(a), a_lo, a_hi); };

  double x0 = std::sqrt(2.0) * params.rnn;
  if (x0 <= a_lo || x0 >= a_hi) x0 = 0.5 * (a_lo + a_hi);
  double f0 = fixed_point(x0) - x0;
  double x1 = x0 + f0;
  int it = 1;
  for (; it < 100; ++it) {
    const double f1 = fixed_point(x1) - x1;
    if (std::abs(f1) <= 1e-14 * x1) break;
    double next = (f1 != f0) ? x1 - f1 * (x1 - x0) / (f1 - f0) : x1 + f1;
    if (!(next > a_lo && next < a_hi)) next = x1 + f1;
    x0 = x1;
    f0 = f1;
    x1 = next;
  }
  SitePotential pot = make(x1);
  const double a = calibrate_lattice_constant(pot, a_lo, a_hi);
  return {pot, a, it};
}

}  // namespace gfc
