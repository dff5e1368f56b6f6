#pragma once

#include <span>
#include <vector>

#include "gfc/common.hpp"

namespace gfc {

/// C2 cutoff window: 1 on [0, r_taper], quintic decay to 0 at cutoff.
struct Taper {
  double r_taper = 0.0;
  double cutoff = 0.0;

  double value(double r) const;
  /// Value and first derivative.
  std::pair<double, double> value_and_derivative(double r) const;
};

Taper make_taper(double r_taper, double cutoff);

enum class PotentialKind { morse_pair, toy_eam };

const char* to_string(PotentialKind kind);
PotentialKind potential_kind_from_string(const std::string& name);

struct PotentialParams {
  PotentialKind kind = PotentialKind::morse_pair;
  double alpha = 4.4;  // Morse stiffness
  double rnn = 1.0;    // Morse minimum
  double beta_e = 8.8; // EAM density decay
  double embed_coeff = 1.0;
};

/// Site energy V(neighbor differences). Pair terms carry the 1/2 bond-sharing
/// factor so that summing over sites gives the total energy.
class SitePotential {
 public:
  SitePotential(PotentialParams params, Taper taper);

  const PotentialParams& params() const { return params_; }
  const Taper& taper() const { return taper_; }
  double cutoff() const { return taper_.cutoff; }

  double energy(std::span<const Vec3> neighbors) const;
  /// Writes dV/d(neighbor_k) into grad[k] and returns V.
  double energy_and_gradient(std::span<const Vec3> neighbors, std::span<Vec3> grad) const;

  /// Morse pair function and derivative (no taper).
  std::pair<double, double> pair(double r) const;
  /// EAM density function and derivative (no taper).
  std::pair<double, double> density(double r) const;

 private:
  PotentialParams params_;
  Taper taper_;
};

double site_energy(const SitePotential& pot, std::span<const Vec3> neighbors);
std::vector<Vec3> site_gradient(const SitePotential& pot, std::span<const Vec3> neighbors);

}  // namespace gfc
