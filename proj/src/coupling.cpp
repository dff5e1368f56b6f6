#include "gfc/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace gfc {

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::atm: return "ATM";
    case ModelKind::bqce: return "BQCE";
    case ModelKind::bqcf: return "BQCF";
    case ModelKind::bgfc: return "BGFC";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
  std::string up;
  for (char c : name) up += char(std::toupper(static_cast<unsigned char>(c)));
  if (up == "ATM") return ModelKind::atm;
  if (up == "BQCE") return ModelKind::bqce;
  if (up == "BQCF") return ModelKind::bqcf;
  if (up == "BGFC") return ModelKind::bgfc;
  throw Error("unknown model '" + name + "'");
}

// ---------------------------------------------------------------------------
// Kinematics

std::vector<Vec3> CoupledModel::expand(const Eigen::VectorXd& x) const {
  if (std::size_t(x.size()) != num_dofs()) throw Error("displacement has the wrong size");
  std::vector<Vec3> u(mesh.num_vertices(), Vec3::Zero());
  for (std::size_t i = 0; i < free_vertices.size(); ++i)
    u[std::size_t(free_vertices[i])] = x.segment<3>(Eigen::Index(3 * i));
  return u;
}

Eigen::VectorXd CoupledModel::restrict(std::span<const Vec3> nodal) const {
  Eigen::VectorXd x(static_cast<Eigen::Index>(num_dofs()));
  for (std::size_t i = 0; i < free_vertices.size(); ++i)
    x.segment<3>(Eigen::Index(3 * i)) = nodal[std::size_t(free_vertices[i])];
  return x;
}

std::vector<Vec3> CoupledModel::site_displacements(std::span<const Vec3> nodal) const {
  std::vector<Vec3> u(lattice.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto& m = site_map[i];
    if (m.vertex >= 0) {
      u[i] = nodal[std::size_t(m.vertex)];
    } else {
      const auto& t = mesh.tets[std::size_t(m.tet)];
      u[i] = m.weights[0] * nodal[std::size_t(t[0])] + m.weights[1] * nodal[std::size_t(t[1])] +
             m.weights[2] * nodal[std::size_t(t[2])] + m.weights[3] * nodal[std::size_t(t[3])];
    }
  }
  return u;
}

std::vector<Vec3> CoupledModel::pull_back(std::span<const Vec3> per_site) const {
  std::vector<Vec3> g(mesh.num_vertices(), Vec3::Zero());
  for (std::size_t i = 0; i < per_site.size(); ++i) {
    const auto& m = site_map[i];
    if (m.vertex >= 0) {
      g[std::size_t(m.vertex)] += per_site[i];
    } else {
      const auto& t = mesh.tets[std::size_t(m.tet)];
      for (int k = 0; k < 4; ++k) g[std::size_t(t[std::size_t(k)])] += m.weights[std::size_t(k)] * per_site[i];
    }
  }
  return g;
}

namespace {

bool atomistic_ball(const CoupledModel& m) { return m.kind == ModelKind::atm || m.degenerate; }

Mat3 deformation_gradient(const GradedMesh& mesh, std::size_t t, std::span<const Vec3> u) {
  Mat3 F = Mat3::Identity();
  const auto& tet = mesh.tets[t];
  const auto& g = mesh.shape_gradients[t];
  for (int k = 0; k < 4; ++k) F += u[std::size_t(tet[std::size_t(k)])] * g[std::size_t(k)].transpose();
  return F;
}

struct Accum {
  double total = 0.0;
  double change = 0.0;
};

// Weighted site-energy sum over the active sites. gsite, if given, receives
// dE/du at every lattice site.
void add_site_terms(const CoupledModel& m, std::span<const Vec3> us, std::vector<Vec3>* gsite,
                    Accum& acc) {
  thread_local std::vector<Vec3> d, g;
  const SitePotential& pot = *m.potential;
  for (int l : m.active_sites) {
    const auto nb = m.lattice.neighbors(std::size_t(l));
    d.resize(nb.size());
    const Vec3 ul = us[std::size_t(l)];
    for (std::size_t k = 0; k < nb.size(); ++k) d[k] = nb[k].diff + us[std::size_t(nb[k].index)] - ul;
    const double w = m.site_weights[std::size_t(l)];
    double v;
    if (gsite) {
      g.resize(nb.size());
      v = pot.energy_and_gradient(d, g);
      Vec3 self = Vec3::Zero();
      for (std::size_t k = 0; k < nb.size(); ++k) {
        (*gsite)[std::size_t(nb[k].index)] += w * g[k];
        self += g[k];
      }
      (*gsite)[std::size_t(l)] -= w * self;
    } else {
      v = pot.energy(d);
    }
    acc.total += w * v;
    acc.change += w * (v - m.site_energy_ref[std::size_t(l)]);
  }
}

// Continuum quadrature over `tets` with per-tet weights. When
// `subtract_reference_stress` is set the stress P(F) - P(I) is assembled.
void add_cb_terms(const CoupledModel& m, std::span<const Vec3> u, std::span<const int> tets,
                  std::span<const double> weights, bool subtract_reference_stress,
                  std::vector<Vec3>* gnodal, Accum* acc) {
  const CBDensity& cb = *m.cb;
  for (int ti : tets) {
    const auto t = std::size_t(ti);
    const Mat3 F = deformation_gradient(m.mesh, t, u);
    const double w = weights[t];
    double W;
    if (gnodal) {
      Mat3 P;
      W = cb.energy_and_stress(F, P);
      if (subtract_reference_stress) P -= m.cb_stress_ref;
      const auto& tet = m.mesh.tets[t];
      const auto& sg = m.mesh.shape_gradients[t];
      for (int k = 0; k < 4; ++k)
        (*gnodal)[std::size_t(tet[std::size_t(k)])] += w * (P * sg[std::size_t(k)]);
    } else {
      W = cb.energy_density(F);
    }
    if (acc) {
      acc->total += w * W;
      acc->change += w * (W - m.cb_energy_ref);
    }
  }
}

Accum bqce_assemble(const CoupledModel& m, const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
  const auto u = m.expand(x);
  const auto us = m.site_displacements(u);
  Accum acc;
  if (grad) {
    std::vector<Vec3> gsite(m.lattice.size(), Vec3::Zero());
    add_site_terms(m, us, &gsite, acc);
    auto gn = m.pull_back(gsite);
    add_cb_terms(m, u, m.quad_tets, m.quad_weights, false, &gn, &acc);
    *grad = m.restrict(gn);
  } else {
    add_site_terms(m, us, nullptr, acc);
    add_cb_terms(m, u, m.quad_tets, m.quad_weights, false, nullptr, &acc);
  }
  return acc;
}

const Eigen::VectorXd& load_for_energy(const CoupledModel& m) {
  if (m.kind == ModelKind::bqcf) {
    if (m.energy_load.size() == 0)
      throw Error("BQCF energy needs the BGFC correction, which is unavailable for this defect");
    return m.energy_load;
  }
  return m.ghost_load;
}

double defect_extent(const DefectedLattice& lat) {
  double r = 0.0;
  for (const auto& g : lat.removed) r = std::max(r, g.to_position(lat.lattice_constant).norm());
  for (const auto& g : lat.added) r = std::max(r, g.to_position(lat.lattice_constant).norm());
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Construction

CoupledModel build_model(const SitePotential& potential, double a, const DefectSpec& defect,
                         const ModelSpec& spec) {
  if (!(a > 0.0)) throw Error("lattice constant must be positive");
  if (!(spec.r_domain > 0.0)) throw Error("r_domain must be positive");
  if (spec.kind != ModelKind::atm) {
    if (!(spec.r0 >= 0.0 && spec.r1 >= spec.r0)) throw Error("blend radii must satisfy 0 <= r0 <= r1");
  }

  CoupledModel m;
  m.kind = spec.kind;
  m.spec = spec;
  m.lattice_constant = a;
  m.list_radius = potential.cutoff() + spec.skin * a;
  m.potential = std::make_shared<SitePotential>(potential);
  m.cb = std::make_shared<CBDensity>(potential, a, m.list_radius);
  m.degenerate = spec.kind != ModelKind::atm && spec.r0 >= spec.r_domain;
  const bool ball = atomistic_ball(m);

  double lattice_radius = spec.r_domain;
  if (!ball) {
    lattice_radius = spec.r1 + 2.0 * m.list_radius;
    if (lattice_radius > spec.r_domain)
      throw Error("domain too small for the blend region: need r_domain >= r1 + 2 * list radius");
  }
  m.lattice = build_adjacency(apply_defect(build_fcc_ball(a, lattice_radius), defect), m.list_radius);
  const auto& lat = m.lattice;
  const std::size_t ns = lat.size();

  m.blend = ball && spec.kind == ModelKind::atm ? make_blend(spec.r_domain, spec.r_domain, spec.shape)
                                                : make_blend(spec.r0, spec.r1, spec.shape);

  // Mesh and site kinematics.
  m.site_map.assign(ns, {});
  if (ball) {
    auto& mesh = m.mesh;
    mesh.lattice_constant = a;
    mesh.domain_radius = spec.r_domain;
    mesh.vertices = lat.sites;
    mesh.grid = lat.grid;
    mesh.stride.assign(ns, 1);
    mesh.lattice_index.resize(ns);
    mesh.flags.resize(ns);
    const double inner = spec.r_domain - spec.clamp_cutoffs * potential.cutoff();
    for (std::size_t i = 0; i < ns; ++i) {
      mesh.lattice_index[i] = int(i);
      mesh.flags[i] = lat.sites[i].norm() > inner ? VertexFlag::clamped : VertexFlag::atomistic;
      m.site_map[i].vertex = int(i);
    }
    mesh.reindex();
  } else {
    MeshOptions opt;
    opt.grading_exponent = spec.grading_exponent;
    m.mesh = build_graded_mesh(lat, m.blend, spec.r_domain, opt);
    PointLocator loc(m.mesh);
    for (std::size_t i = 0; i < ns; ++i) {
      const int v = m.mesh.find_vertex(lat.grid[i]);
      if (v >= 0) {
        m.site_map[i].vertex = v;
        continue;
      }
      const auto p = loc.locate(lat.sites[i]);
      m.site_map[i].tet = p.tet;
      m.site_map[i].weights = p.bary;
    }
  }

  // Blend sampling.
  m.site_beta.resize(ns);
  m.site_weights.resize(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    m.site_beta[i] = spec.kind == ModelKind::atm ? 0.0 : m.blend(lat.sites[i]);
    m.site_weights[i] = 1.0 - m.site_beta[i];
    if (m.site_weights[i] > 0.0) m.active_sites.push_back(int(i));
  }
  const std::size_t nv = m.mesh.num_vertices();
  m.vertex_beta.resize(nv);
  for (std::size_t v = 0; v < nv; ++v)
    m.vertex_beta[v] = spec.kind == ModelKind::atm ? 0.0 : m.blend(m.mesh.vertices[v]);
  m.quad_weights.assign(m.mesh.num_tets(), 0.0);
  for (std::size_t t = 0; t < m.mesh.num_tets(); ++t) {
    m.quad_weights[t] = m.blend(m.mesh.barycenters[t]) * m.mesh.volumes[t];
    if (m.quad_weights[t] > 0.0) m.quad_tets.push_back(int(t));
  }

  // Free dofs.
  m.free_index.assign(nv, -1);
  for (std::size_t v = 0; v < nv; ++v) {
    if (m.mesh.flags[v] == VertexFlag::clamped) continue;
    m.free_index[v] = int(m.free_vertices.size());
    m.free_vertices.push_back(int(v));
  }
  if (m.free_vertices.empty()) throw Error("model has no free degrees of freedom");

  // Reference energies.
  m.site_energy_ref.assign(ns, 0.0);
  {
    std::vector<Vec3> d;
    for (int l : m.active_sites) {
      const auto nb = lat.neighbors(std::size_t(l));
      d.resize(nb.size());
      for (std::size_t k = 0; k < nb.size(); ++k) d[k] = nb[k].diff;
      m.site_energy_ref[std::size_t(l)] = potential.energy(d);
    }
  }
  m.cb_energy_ref = m.cb->energy_and_stress(Mat3::Identity(), m.cb_stress_ref);

  // BQCF force bookkeeping.
  {
    std::vector<char> need(ns, 0);
    for (int v : m.free_vertices) {
      if (!(m.vertex_beta[std::size_t(v)] < 1.0)) continue;
      const int l = m.mesh.lattice_index[std::size_t(v)];
      if (l < 0) throw Error("blended vertex is not a lattice site");
      m.force_targets.push_back(v);
      need[std::size_t(l)] = 1;
      for (const auto& nb : lat.neighbors(std::size_t(l))) need[std::size_t(nb.index)] = 1;
    }
    for (std::size_t i = 0; i < ns; ++i)
      if (need[i]) m.force_sites.push_back(int(i));
    for (std::size_t t = 0; t < m.mesh.num_tets(); ++t) {
      for (int v : m.mesh.tets[t]) {
        if (m.free_index[std::size_t(v)] >= 0 && m.vertex_beta[std::size_t(v)] > 0.0) {
          m.cb_force_tets.push_back(int(t));
          break;
        }
      }
    }
  }

  m.ghost_load = Eigen::VectorXd::Zero(Eigen::Index(m.num_dofs()));
  if (m.kind == ModelKind::bgfc) {
    m.ghost_load = compute_ghost_load(m);
  } else if (m.kind == ModelKind::bqcf) {
    try {
      m.energy_load = compute_ghost_load(m);
    } catch (const Error&) {
      m.energy_load.resize(0);
    }
  }
  return m;
}

Eigen::VectorXd compute_ghost_load(const CoupledModel& model) {
  if (model.kind == ModelKind::atm) return Eigen::VectorXd::Zero(Eigen::Index(model.num_dofs()));
  const auto& lat = model.lattice;
  if (!model.degenerate && defect_extent(lat) + model.potential->cutoff() >= model.spec.r0 &&
      (!lat.removed.empty() || !lat.added.empty()))
    throw Error("defect touches blend region");

  auto gradient_at_zero = [](const CoupledModel& m) {
    Eigen::VectorXd g;
    bqce_assemble(m, Eigen::VectorXd::Zero(Eigen::Index(m.num_dofs())), &g);
    return g;
  };
  if (lat.removed.empty() && lat.added.empty()) return gradient_at_zero(model);

  ModelSpec hs = model.spec;
  hs.kind = ModelKind::bqce;
  const CoupledModel hom = build_model(*model.potential, model.lattice_constant, DefectSpec{}, hs);
  const Eigen::VectorXd gh = gradient_at_zero(hom);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(Eigen::Index(model.num_dofs()));
  for (std::size_t i = 0; i < model.free_vertices.size(); ++i) {
    const int hv = hom.mesh.find_vertex(model.mesh.grid[std::size_t(model.free_vertices[i])]);
    if (hv < 0) continue;
    const int hf = hom.free_index[std::size_t(hv)];
    if (hf < 0) continue;
    g.segment<3>(Eigen::Index(3 * i)) = gh.segment<3>(Eigen::Index(3 * hf));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Energies and forces

EnergyValue model_energy(const CoupledModel& m, const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
  Accum acc = bqce_assemble(m, x, grad);
  if (m.kind == ModelKind::bgfc || m.kind == ModelKind::bqcf) {
    const auto& g = load_for_energy(m);
    const double lin = g.dot(x);
    acc.total -= lin;
    acc.change -= lin;
    if (grad) *grad -= g;
  }
  return {acc.total, acc.change};
}

double atomistic_energy(const CoupledModel& m, const Eigen::VectorXd& x) {
  if (!atomistic_ball(m)) throw Error("atomistic energy needs an atomistic model");
  return bqce_assemble(m, x, nullptr).total;
}

Eigen::VectorXd atomistic_gradient(const CoupledModel& m, const Eigen::VectorXd& x) {
  if (!atomistic_ball(m)) throw Error("atomistic energy needs an atomistic model");
  Eigen::VectorXd g;
  bqce_assemble(m, x, &g);
  return g;
}

double bqce_energy(const CoupledModel& m, const Eigen::VectorXd& x) {
  return bqce_assemble(m, x, nullptr).total;
}

Eigen::VectorXd bqce_gradient(const CoupledModel& m, const Eigen::VectorXd& x) {
  Eigen::VectorXd g;
  bqce_assemble(m, x, &g);
  return g;
}

double bgfc_energy(const CoupledModel& m, const Eigen::VectorXd& x) {
  if (m.kind != ModelKind::bgfc) throw Error("BGFC energy needs a BGFC model");
  return bqce_energy(m, x) - m.ghost_load.dot(x);
}

Eigen::VectorXd bgfc_gradient(const CoupledModel& m, const Eigen::VectorXd& x) {
  if (m.kind != ModelKind::bgfc) throw Error("BGFC gradient needs a BGFC model");
  return bqce_gradient(m, x) - m.ghost_load;
}

Eigen::VectorXd bgfc_gradient_renormalized(const CoupledModel& m, const Eigen::VectorXd& x) {
  if (m.kind != ModelKind::bgfc) throw Error("BGFC gradient needs a BGFC model");
  const auto& lat = m.lattice;
  const SitePotential& pot = *m.potential;
  const double a = m.lattice_constant;

  // Perfect-lattice site gradient keyed by grid offset.
  std::unordered_map<GridPoint, Vec3, GridPointHash> dv0;
  std::vector<GridPoint> shell;
  {
    const int n = int(std::ceil(2.0 * m.list_radius / a)) + 1;
    std::vector<Vec3> d;
    for (int i = -n; i <= n; ++i)
      for (int j = -n; j <= n; ++j)
        for (int k = -n; k <= n; ++k) {
          const GridPoint g{i, j, k};
          if ((i + j + k) % 2 != 0 || g.norm2() == 0) continue;
          if (g.to_position(a).norm() > m.list_radius) continue;
          shell.push_back(g);
          d.push_back(g.to_position(a));
        }
    std::vector<Vec3> gr(d.size());
    pot.energy_and_gradient(d, gr);
    for (std::size_t k = 0; k < shell.size(); ++k) dv0.emplace(shell[k], gr[k]);
  }
  const std::set<GridPoint> removed(lat.removed.begin(), lat.removed.end());
  const std::set<GridPoint> added(lat.added.begin(), lat.added.end());
  auto is_added = [&](std::size_t i) { return !added.empty() && added.count(lat.grid[i]) > 0; };

  const auto u = m.expand(x);
  const auto us = m.site_displacements(u);
  std::vector<Vec3> gsite(lat.size(), Vec3::Zero());
  std::vector<Vec3> d, g;
  for (int li : m.active_sites) {
    const auto l = std::size_t(li);
    const auto nb = lat.neighbors(l);
    d.resize(nb.size());
    g.resize(nb.size());
    for (std::size_t k = 0; k < nb.size(); ++k) d[k] = nb[k].diff + us[std::size_t(nb[k].index)] - us[l];
    pot.energy_and_gradient(d, g);
    const double w = m.site_weights[l];
    const bool renorm = !is_added(l);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      Vec3 gk = g[k];
      if (renorm && !is_added(std::size_t(nb[k].index))) {
        auto it = dv0.find(lat.grid[std::size_t(nb[k].index)] - lat.grid[l]);
        if (it != dv0.end()) gk -= it->second;
      }
      gsite[std::size_t(nb[k].index)] += w * gk;
      gsite[l] -= w * gk;
    }
    if (renorm && !removed.empty()) {
      // Bonds to removed sites: the neighbor displacement is zero.
      for (const auto& s : shell)
        if (removed.count(lat.grid[l] + s)) gsite[l] += w * dv0.at(s);
    }
  }
  // Removed sites keep their linear correction term.
  for (const auto& p : lat.removed) {
    const double w = 1.0 - m.blend(p.to_position(a));
    if (!(w > 0.0)) continue;
    for (const auto& s : shell) {
      const int k = lat.find(p + s);
      if (k < 0 || is_added(std::size_t(k))) continue;
      gsite[std::size_t(k)] -= w * dv0.at(s);
    }
  }
  auto gn = m.pull_back(gsite);
  add_cb_terms(m, u, m.quad_tets, m.quad_weights, true, &gn, nullptr);
  return m.restrict(gn);
}

Eigen::VectorXd bqcf_residual(const CoupledModel& m, const Eigen::VectorXd& x) {
  const auto& lat = m.lattice;
  const SitePotential& pot = *m.potential;
  const auto u = m.expand(x);
  const auto us = m.site_displacements(u);

  std::vector<Vec3> gsite(lat.size(), Vec3::Zero());
  std::vector<Vec3> d, g;
  for (int li : m.force_sites) {
    const auto l = std::size_t(li);
    const auto nb = lat.neighbors(l);
    d.resize(nb.size());
    g.resize(nb.size());
    for (std::size_t k = 0; k < nb.size(); ++k) d[k] = nb[k].diff + us[std::size_t(nb[k].index)] - us[l];
    pot.energy_and_gradient(d, g);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      gsite[std::size_t(nb[k].index)] += g[k];
      gsite[l] -= g[k];
    }
  }
  std::vector<Vec3> gcb(m.mesh.num_vertices(), Vec3::Zero());
  add_cb_terms(m, u, m.cb_force_tets, m.mesh.volumes, true, &gcb, nullptr);
  Eigen::VectorXd r(Eigen::Index(m.num_dofs()));
  for (std::size_t i = 0; i < m.free_vertices.size(); ++i) {
    const auto v = std::size_t(m.free_vertices[i]);
    const double b = m.vertex_beta[v];
    Vec3 f = Vec3::Zero();
    if (b < 1.0) f -= (1.0 - b) * gsite[std::size_t(m.mesh.lattice_index[v])];
    if (b > 0.0) f -= b * gcb[v];
    r.segment<3>(Eigen::Index(3 * i)) = f;
  }
  return r;
}

Eigen::VectorXd equilibrium_residual(const CoupledModel& m, const Eigen::VectorXd& x) {
  if (m.kind == ModelKind::bqcf) return -bqcf_residual(m, x);
  Eigen::VectorXd g;
  model_energy(m, x, &g);
  return g;
}

Eigen::SparseMatrix<double> scalar_laplacian(const CoupledModel& m) {
  const auto n = Eigen::Index(m.num_free());
  std::vector<Eigen::Triplet<double>> trip;
  if (m.mesh.num_tets() > 0) {
    trip.reserve(16 * m.mesh.num_tets());
    for (std::size_t t = 0; t < m.mesh.num_tets(); ++t) {
      const auto& tet = m.mesh.tets[t];
      const auto& sg = m.mesh.shape_gradients[t];
      for (int i = 0; i < 4; ++i) {
        const int fi = m.free_index[std::size_t(tet[std::size_t(i)])];
        if (fi < 0) continue;
        for (int j = 0; j < 4; ++j) {
          const int fj = m.free_index[std::size_t(tet[std::size_t(j)])];
          if (fj < 0) continue;
          trip.emplace_back(fi, fj, m.mesh.volumes[t] * sg[std::size_t(i)].dot(sg[std::size_t(j)]));
        }
      }
    }
  } else {
    const double nn = 1.05 * m.lattice_constant / std::numbers::sqrt2;
    for (std::size_t v = 0; v < m.mesh.num_vertices(); ++v) {
      const int fi = m.free_index[v];
      if (fi < 0) continue;
      const int l = m.mesh.lattice_index[v];
      for (const auto& nb : m.lattice.neighbors(std::size_t(l))) {
        if (nb.diff.norm() > nn) continue;
        trip.emplace_back(fi, fi, 1.0);
        const int fj = m.free_index[std::size_t(nb.index)];
        if (fj >= 0) trip.emplace_back(fi, fj, -1.0);
      }
    }
  }
  Eigen::SparseMatrix<double> K(n, n);
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

std::vector<double> free_vertex_radii(const CoupledModel& m) {
  std::vector<double> r(m.num_free());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = m.mesh.vertices[std::size_t(m.free_vertices[i])].norm();
  return r;
}

}  // namespace gfc
