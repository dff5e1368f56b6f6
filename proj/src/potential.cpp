#include "gfc/potential.hpp"

#include <cmath>
#include <tuple>
#include <vector>

namespace gfc {

double Taper::value(double r) const { return value_and_derivative(r).first; }

std::pair<double, double> Taper::value_and_derivative(double r) const {
  if (r <= r_taper) return {1.0, 0.0};
  if (r >= cutoff) return {0.0, 0.0};
  const double w = cutoff - r_taper;
  const double t = (r - r_taper) / w;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double p = t3 * (10.0 - 15.0 * t + 6.0 * t2);
  const double dp = 30.0 * t2 * (1.0 - 2.0 * t + t2);
  return {1.0 - p, -dp / w};
}

Taper make_taper(double r_taper, double cutoff) {
  if (!(r_taper < cutoff)) throw Error("taper start must be below the cutoff");
  if (!(r_taper > 0.0)) throw Error("taper start must be positive");
  return {r_taper, cutoff};
}

const char* to_string(PotentialKind kind) {
  return kind == PotentialKind::morse_pair ? "morse_pair" : "toy_eam";
}

PotentialKind potential_kind_from_string(const std::string& name) {
  if (name == "morse_pair") return PotentialKind::morse_pair;
  if (name == "toy_eam") return PotentialKind::toy_eam;
  throw Error("unknown potential kind '" + name + "'");
}

SitePotential::SitePotential(PotentialParams params, Taper taper)
    : params_(params), taper_(taper) {
  if (!(params_.alpha > 0.0) || !(params_.rnn > 0.0)) throw Error("invalid Morse parameters");
  if (params_.kind == PotentialKind::toy_eam && !(params_.beta_e > 0.0))
    throw Error("invalid EAM density decay");
}

std::pair<double, double> SitePotential::pair(double r) const {
  const double e1 = std::exp(-params_.alpha * (r - params_.rnn));
  const double e2 = e1 * e1;
  return {e2 - 2.0 * e1, -2.0 * params_.alpha * (e2 - e1)};
}

std::pair<double, double> SitePotential::density(double r) const {
  const double e = std::exp(-2.0 * params_.beta_e * (r - params_.rnn));
  return {e, -2.0 * params_.beta_e * e};
}

double SitePotential::energy(std::span<const Vec3> neighbors) const {
  const double cut2 = taper_.cutoff * taper_.cutoff;
  double pair_sum = 0.0;
  double rho = 0.0;
  for (const auto& d : neighbors) {
    const double r2 = d.squaredNorm();
    if (r2 == 0.0) throw InvertedElement("coincident sites");
    if (r2 >= cut2) continue;
    const double r = std::sqrt(r2);
    const double tau = taper_.value(r);
    pair_sum += pair(r).first * tau;
    if (params_.kind == PotentialKind::toy_eam) rho += density(r).first * tau;
  }
  double e = 0.5 * pair_sum;
  if (params_.kind == PotentialKind::toy_eam && rho > 0.0)
    e -= params_.embed_coeff * std::sqrt(rho);
  return e;
}

double SitePotential::energy_and_gradient(std::span<const Vec3> neighbors,
                                          std::span<Vec3> grad) const {
  const double cut2 = taper_.cutoff * taper_.cutoff;
  const bool eam = params_.kind == PotentialKind::toy_eam;
  // Radial density derivative per neighbor, kept for the embedding pass.
  thread_local std::vector<double> drho;
  if (eam) drho.assign(neighbors.size(), 0.0);
  double pair_sum = 0.0;
  double rho = 0.0;
  for (std::size_t k = 0; k < neighbors.size(); ++k) {
    const Vec3& d = neighbors[k];
    const double r2 = d.squaredNorm();
    if (r2 == 0.0) throw InvertedElement("coincident sites");
    if (r2 >= cut2) {
      grad[k].setZero();
      continue;
    }
    const double r = std::sqrt(r2);
    double tau = 1.0, dtau = 0.0;
    if (r > taper_.r_taper) std::tie(tau, dtau) = taper_.value_and_derivative(r);
    const auto [phi, dphi] = pair(r);
    pair_sum += phi * tau;
    grad[k] = (0.5 * (dphi * tau + phi * dtau) / r) * d;
    if (eam) {
      const auto [psi, dpsi] = density(r);
      rho += psi * tau;
      drho[k] = (dpsi * tau + psi * dtau) / r;
    }
  }
  double e = 0.5 * pair_sum;
  if (eam && rho > 0.0) {
    const double sq = std::sqrt(rho);
    e -= params_.embed_coeff * sq;
    const double demb = -params_.embed_coeff * 0.5 / sq;
    for (std::size_t k = 0; k < neighbors.size(); ++k)
      if (drho[k] != 0.0) grad[k] += (demb * drho[k]) * neighbors[k];
  }
  return e;
}

double site_energy(const SitePotential& pot, std::span<const Vec3> neighbors) {
  return pot.energy(neighbors);
}

std::vector<Vec3> site_gradient(const SitePotential& pot, std::span<const Vec3> neighbors) {
  std::vector<Vec3> g(neighbors.size());
  pot.energy_and_gradient(neighbors, g);
  return g;
}

}  // namespace gfc
