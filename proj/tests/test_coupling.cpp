#include <doctest.h>

#include <cmath>
#include <random>

#include "gfc/cauchy_born.hpp"
#include "gfc/coupling.hpp"

using namespace gfc;

namespace {

struct Fixture {
  CalibratedPotential cal =
      calibrate_scaled_cutoff(PotentialParams{}, 1.4, 1.2, 1.0, 1.6);
  double a = cal.lattice_constant;

  CoupledModel model(ModelKind kind, DefectKind defect, double r0 = 2.0, double r1 = 4.0,
                     double domain = 8.0) const {
    ModelSpec spec;
    spec.kind = kind;
    spec.r0 = r0 * a;
    spec.r1 = r1 * a;
    spec.r_domain = domain * a;
    return build_model(cal.potential, a, DefectSpec{defect, 3, 1.0 * a}, spec);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

Eigen::VectorXd random_vector(std::size_t n, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = scale * u(rng);
  return v;
}

double energy_change(const CoupledModel& m, const Eigen::VectorXd& x) {
  return model_energy(m, x).change;
}

}  // namespace

TEST_CASE("ghost-force trichotomy on the perfect lattice") {
  const auto& f = fixture();
  const auto bqce = f.model(ModelKind::bqce, DefectKind::none);
  const auto bgfc = f.model(ModelKind::bgfc, DefectKind::none);
  const auto bqcf = f.model(ModelKind::bqcf, DefectKind::none);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(Eigen::Index(bqce.num_dofs()));

  const Eigen::VectorXd g = bqce_gradient(bqce, zero);
  MESSAGE("BQCE ghost-force baseline (inf-norm): " << g.lpNorm<Eigen::Infinity>());
  CHECK(g.lpNorm<Eigen::Infinity>() > 1e-8);
  CHECK(bgfc_gradient(bgfc, zero).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK(bqcf_residual(bqcf, zero).lpNorm<Eigen::Infinity>() <= 1e-12);

  // Ghost forces live within one cutoff of the blend annulus, up to the P1
  // interpolation of neighbors beyond r1, which reaches one coarse element
  // further out.
  const auto radii = free_vertex_radii(bqce);
  const double rc = f.cal.potential.cutoff();
  double total = 0.0, annulus = 0.0, far = 0.0;
  for (std::size_t v = 0; v < radii.size(); ++v) {
    const double g2 = g.segment(Eigen::Index(3 * v), 3).squaredNorm();
    total += g2;
    if (radii[v] >= 2.0 * f.a - rc && radii[v] <= 4.0 * f.a + rc) annulus += g2;
    if (radii[v] < 2.0 * f.a - rc || radii[v] > 4.0 * f.a + rc + 2.0 * f.a)
      far = std::max(far, std::sqrt(g2));
  }
  CHECK(annulus >= 0.99 * total);
  CHECK(far <= 1e-12);
}

TEST_CASE("energy gradients match central differences") {
  const auto& f = fixture();
  std::mt19937_64 rng(7);
  const double h = 1e-5;
  for (ModelKind kind : {ModelKind::atm, ModelKind::bqce, ModelKind::bgfc}) {
    CAPTURE(to_string(kind));
    const auto m = f.model(kind, DefectKind::vacancy);
    const auto n = m.num_dofs();
    const Eigen::VectorXd x = random_vector(n, 0.01 * f.a, rng);
    Eigen::VectorXd g;
    model_energy(m, x, &g);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd d = random_vector(n, 1.0, rng);
      const double fd = (energy_change(m, x + h * d) - energy_change(m, x - h * d)) / (2 * h);
      const double an = g.dot(d);
      // Relative to the RMS directional derivative over random directions,
      // so an accidental near-cancellation of g.d does not dominate.
      const double scale = g.norm() * d.norm() / std::sqrt(double(d.size()));
      worst = std::max(worst, std::abs(fd - an) / scale);
    }
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("dead-load and renormalised BGFC assemblies agree") {
  const auto& f = fixture();
  std::mt19937_64 rng(11);
  for (DefectKind defect : {DefectKind::none, DefectKind::vacancy, DefectKind::interstitial}) {
    CAPTURE(to_string(defect));
    const auto m = f.model(ModelKind::bgfc, defect);
    for (int trial = 0; trial < 3; ++trial) {
      const Eigen::VectorXd x = random_vector(m.num_dofs(), 0.01 * f.a, rng);
      const Eigen::VectorXd dead = bgfc_gradient(m, x);
      const Eigen::VectorXd renorm = bgfc_gradient_renormalized(m, x);
      CHECK((dead - renorm).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
  }
}

TEST_CASE("degenerate blend collapses every model onto ATM") {
  const auto& f = fixture();
  // r0 beyond the domain: beta vanishes everywhere.
  const auto atm = f.model(ModelKind::atm, DefectKind::vacancy, 2.0, 4.0, 6.0);
  const auto bqce = f.model(ModelKind::bqce, DefectKind::vacancy, 7.0, 14.0, 6.0);
  const auto bgfc = f.model(ModelKind::bgfc, DefectKind::vacancy, 7.0, 14.0, 6.0);
  const auto bqcf = f.model(ModelKind::bqcf, DefectKind::vacancy, 7.0, 14.0, 6.0);
  CHECK(bqce.degenerate);
  REQUIRE(atm.num_dofs() == bqce.num_dofs());
  REQUIRE(atm.num_dofs() == bgfc.num_dofs());

  std::mt19937_64 rng(3);
  const Eigen::VectorXd x = random_vector(atm.num_dofs(), 0.01 * f.a, rng);
  const double e_atm = atomistic_energy(atm, x);
  CHECK(bqce_energy(bqce, x) == doctest::Approx(e_atm).epsilon(1e-12));
  CHECK(bgfc_energy(bgfc, x) == doctest::Approx(e_atm).epsilon(1e-12));
  CHECK(bqce_gradient(bqce, x) == atomistic_gradient(atm, x));
  CHECK((bqcf_residual(bqcf, x) + atomistic_gradient(atm, x)).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("BQCF residual is not conservative") {
  const auto& f = fixture();
  const auto m = f.model(ModelKind::bqcf, DefectKind::none);
  std::mt19937_64 rng(5);
  const auto n = m.num_dofs();
  const Eigen::VectorXd x0 = random_vector(n, 0.01 * f.a, rng);
  const Eigen::VectorXd p = random_vector(n, 0.01 * f.a, rng);
  const Eigen::VectorXd q = random_vector(n, 0.01 * f.a, rng);
  // Trapezoidal work around the quadrilateral x0 -> +p -> +q -> -p -> -q,
  // refined until the integral settles.
  auto loop = [&](int steps) {
    double w = 0.0;
    const Eigen::VectorXd corners[5] = {x0, x0 + p, x0 + p + q, x0 + q, x0};
    for (int e = 0; e < 4; ++e) {
      const Eigen::VectorXd d = corners[e + 1] - corners[e];
      for (int s = 0; s <= steps; ++s) {
        const double t = double(s) / steps;
        const double wt = (s == 0 || s == steps) ? 0.5 : 1.0;
        w += wt * bqcf_residual(m, corners[e] + t * d).dot(d) / steps;
      }
    }
    return w;
  };
  const double w8 = loop(8);
  const double w16 = loop(16);
  MESSAGE("BQCF loop work: " << w16);
  CHECK(std::abs(w16 - w8) < 0.1 * std::abs(w16));
  CHECK(std::abs(w16) > 1e-10);
}
