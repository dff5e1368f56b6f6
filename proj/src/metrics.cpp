#include "gfc/metrics.hpp"

#include <cmath>
#include <set>
#include <unordered_map>

namespace gfc {

std::vector<std::optional<Vec3>> model_field_at(const CoupledModel& m, const Eigen::VectorXd& x,
                                                std::span<const GridPoint> points) {
  const auto nodal = m.expand(x);
  const auto us = m.site_displacements(nodal);
  PointLocator loc(m.mesh);
  std::vector<std::optional<Vec3>> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const GridPoint& p = points[i];
    if (const int l = m.lattice.find(p); l >= 0) {
      out[i] = us[std::size_t(l)];
    } else if (const int v = m.mesh.find_vertex(p); v >= 0) {
      out[i] = nodal[std::size_t(v)];
    } else if (const auto where = loc.try_locate(p.to_position(m.lattice_constant))) {
      const auto& t = m.mesh.tets[std::size_t(where->tet)];
      Vec3 u = Vec3::Zero();
      for (int k = 0; k < 4; ++k) u += where->bary[std::size_t(k)] * nodal[std::size_t(t[std::size_t(k)])];
      out[i] = u;
    }
  }
  return out;
}

double gradient_error(const CoupledModel& m, const Eigen::VectorXd& x,
                      const SymmetricAtomistic& ref, const Eigen::VectorXd& y,
                      double comparison_radius) {
  const double a = m.lattice_constant;
  const auto& d0 = m.lattice.defect;
  const auto& d1 = ref.defect();
  if (std::abs(ref.lattice_constant() - a) > 1e-12 * a || d0.kind != d1.kind ||
      (d0.kind == DefectKind::microcrack && d0.crack_length != d1.crack_length))
    throw Error("domain mismatch");
  if (!(comparison_radius > 0.0) || comparison_radius > ref.radius() - m.potential->cutoff())
    throw Error("comparison radius must lie in (0, reference radius - cutoff]");

  const double limit = 2.0 * comparison_radius / a;
  const auto r2 = std::int64_t(std::floor(limit * limit * (1.0 + 1e-14)));
  std::vector<GridPoint> pts;
  const int n = int(std::floor(limit)) + 1;
  for (int i = -n; i <= n; ++i)
    for (int j = -n; j <= n; ++j)
      for (int k = -n; k <= n; ++k) {
        const GridPoint p{i, j, k};
        if (((i + j + k) & 1) == 0 && p.norm2() <= r2 && ref.displacement(p, y)) pts.push_back(p);
      }
  for (const auto& p : defect_added_sites(d1))
    if (p.norm2() <= r2) pts.push_back(p);

  const auto um = model_field_at(m, x, pts);
  std::unordered_map<GridPoint, std::size_t, GridPointHash> index;
  index.reserve(pts.size());
  std::vector<Vec3> e(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!um[i]) throw Error("domain mismatch");
    index.emplace(pts[i], i);
    e[i] = *um[i] - *ref.displacement(pts[i], y);
  }

  // Nearest-neighbor offsets: the FCC shell and octahedral-interstitial bonds.
  std::vector<GridPoint> nn;
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j)
      for (int k = -1; k <= 1; ++k) {
        const GridPoint o{i, j, k};
        if (o.norm2() == 1 || o.norm2() == 2) nn.push_back(o);
      }
  double sum = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (const auto& o : nn) {
      const GridPoint q = pts[i] + o;
      if (!(pts[i] < q)) continue;
      const auto it = index.find(q);
      if (it != index.end()) sum += (e[it->second] - e[i]).squaredNorm();
    }
  }
  return std::sqrt(sum);
}

double defect_energy(const CoupledModel& m, const Eigen::VectorXd& x) {
  return model_energy(m, x).change;
}

SlopeFit fit_convergence_slope(std::span<const double> ndof, std::span<const double> error) {
  if (ndof.size() != error.size()) throw Error("degenerate point");
  std::set<double> distinct;
  for (std::size_t i = 0; i < ndof.size(); ++i) {
    if (!(ndof[i] > 0.0) || !(error[i] > 0.0) || !std::isfinite(ndof[i]) || !std::isfinite(error[i]))
      throw Error("degenerate point");
    distinct.insert(ndof[i]);
  }
  if (ndof.size() < 3 || distinct.size() < 2) throw Error("degenerate point");
  const double n = double(ndof.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < ndof.size(); ++i) {
    const double lx = std::log(ndof[i]), ly = std::log(error[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  SlopeFit fit;
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

}  // namespace gfc
