#include "gfc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include "gfc/metrics.hpp"

namespace gfc {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Validation

void ExperimentConfig::validate() const {
  const auto& p = potential;
  if (!(p.alpha > 0.0)) throw Error("potential.alpha must be positive");
  if (!(p.rnn > 0.0)) throw Error("potential.rnn must be positive");
  if (!(p.beta_e > 0.0)) throw Error("potential.beta_e must be positive");
  if (!(p.embed_coeff >= 0.0)) throw Error("potential.embed_coeff must be non-negative");
  if (!(p.taper_factor > 0.0 && p.taper_factor < p.cutoff_factor))
    throw Error("potential.taper_factor must lie in (0, potential.cutoff_factor)");
  if (!(p.bracket_lo > 0.0 && p.bracket_lo < p.bracket_hi))
    throw Error("potential.bracket must satisfy 0 < lo < hi");
  if (defect.kind == DefectKind::microcrack && defect.crack_length < 1)
    throw Error("defect.crack_length must be at least 1");
  if (models.empty()) throw Error("models must be nonempty");
  if (std::set<ModelKind>(models.begin(), models.end()).size() != models.size())
    throw Error("models must not repeat");
  if (radii.r0.empty()) throw Error("radii.r0 must be nonempty");
  for (std::size_t i = 0; i < radii.r0.size(); ++i) {
    if (!(radii.r0[i] > 0.0)) throw Error("radii.r0 entries must be positive");
    if (i > 0 && !(radii.r0[i] > radii.r0[i - 1])) throw Error("radii.r0 must be strictly increasing");
  }
  if (!(radii.r1_ratio > 1.0)) throw Error("radii.r1_ratio must exceed 1 (r0 < r1)");
  if (!(radii.domain_ratio > radii.r1_ratio))
    throw Error("radii.domain_ratio must exceed radii.r1_ratio (r1 < r_domain)");
  if (!(grading_exponent >= 0.0)) throw Error("mesh.grading_exponent must be non-negative");
  if (!(reference.radius_factor >= 1.0)) throw Error("reference.radius_factor must be at least 1");
  if (!(reference.gradient_tolerance > 0.0)) throw Error("reference.gradient_tolerance must be positive");
  if (!(reference.comparison_radius >= 0.0)) throw Error("reference.comparison_radius must be non-negative");
  solver.validate();
  if (!(run.r0 > 0.0)) throw Error("run.r0 must be positive");
  if (output_dir.empty()) throw Error("output_dir must be nonempty");
  if (jobs < 1) throw Error("jobs must be at least 1");
}

// ---------------------------------------------------------------------------
// JSON

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw Error((where.empty() ? std::string("config") : where) + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(),
                                [&](const char* k) { return it.key() == k; });
    if (!ok) throw Error("unknown key '" + (where.empty() ? "" : where + ".") + it.key() + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error("invalid value for '" + where + "." + key + "'");
  }
}

template <class T, class F>
void read_enum(const json& obj, const char* key, const std::string& where, T& out, F parse) {
  if (!obj.contains(key)) return;
  if (!obj.at(key).is_string()) throw Error("invalid value for '" + where + "." + key + "'");
  out = parse(obj.at(key).get<std::string>());
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  check_keys(doc, "", {"schema_version", "potential", "defect", "models", "radii", "blend", "mesh",
                       "reference", "solver", "run", "output_dir", "seed", "deterministic", "jobs"});
  if (!doc.contains("schema_version")) throw Error("missing key 'schema_version'");
  if (!doc.at("schema_version").is_number_integer() ||
      doc.at("schema_version").get<int>() != config_schema_version)
    throw Error("unsupported schema_version (expected " + std::to_string(config_schema_version) + ")");

  ExperimentConfig c;
  if (doc.contains("potential")) {
    const auto& p = doc.at("potential");
    check_keys(p, "potential", {"kind", "alpha", "rnn", "beta_e", "embed_coeff", "cutoff_factor",
                                "taper_factor", "bracket"});
    read_enum(p, "kind", "potential", c.potential.kind, potential_kind_from_string);
    read(p, "alpha", "potential", c.potential.alpha);
    read(p, "rnn", "potential", c.potential.rnn);
    read(p, "beta_e", "potential", c.potential.beta_e);
    read(p, "embed_coeff", "potential", c.potential.embed_coeff);
    read(p, "cutoff_factor", "potential", c.potential.cutoff_factor);
    read(p, "taper_factor", "potential", c.potential.taper_factor);
    if (p.contains("bracket")) {
      std::vector<double> b;
      read(p, "bracket", "potential", b);
      if (b.size() != 2) throw Error("potential.bracket must have two entries");
      c.potential.bracket_lo = b[0];
      c.potential.bracket_hi = b[1];
    }
  }
  if (doc.contains("defect")) {
    const auto& d = doc.at("defect");
    check_keys(d, "defect", {"kind", "crack_length"});
    read_enum(d, "kind", "defect", c.defect.kind, defect_kind_from_string);
    read(d, "crack_length", "defect", c.defect.crack_length);
  }
  if (doc.contains("models")) {
    const auto& m = doc.at("models");
    if (!m.is_array()) throw Error("models must be an array");
    c.models.clear();
    for (const auto& e : m) {
      if (!e.is_string()) throw Error("models entries must be strings");
      c.models.push_back(model_kind_from_string(e.get<std::string>()));
    }
  }
  if (doc.contains("radii")) {
    const auto& r = doc.at("radii");
    check_keys(r, "radii", {"r0", "r1_ratio", "domain_ratio"});
    read(r, "r0", "radii", c.radii.r0);
    read(r, "r1_ratio", "radii", c.radii.r1_ratio);
    read(r, "domain_ratio", "radii", c.radii.domain_ratio);
  }
  if (doc.contains("blend")) {
    const auto& b = doc.at("blend");
    check_keys(b, "blend", {"shape"});
    read_enum(b, "shape", "blend", c.blend_shape, blend_shape_from_string);
  }
  if (doc.contains("mesh")) {
    const auto& m = doc.at("mesh");
    check_keys(m, "mesh", {"grading_exponent"});
    read(m, "grading_exponent", "mesh", c.grading_exponent);
  }
  if (doc.contains("reference")) {
    const auto& r = doc.at("reference");
    check_keys(r, "reference", {"enabled", "radius_factor", "gradient_tolerance", "comparison_radius"});
    read(r, "enabled", "reference", c.reference.enabled);
    read(r, "radius_factor", "reference", c.reference.radius_factor);
    read(r, "gradient_tolerance", "reference", c.reference.gradient_tolerance);
    read(r, "comparison_radius", "reference", c.reference.comparison_radius);
  }
  if (doc.contains("solver")) {
    const auto& s = doc.at("solver");
    check_keys(s, "solver", {"gradient_tolerance", "max_iterations", "history", "armijo", "backtrack",
                             "min_step", "max_step", "energy_noise", "preconditioner", "fd_step",
                             "krylov_max", "krylov_restart", "forcing", "fallback_steps"});
    auto& o = c.solver;
    read(s, "gradient_tolerance", "solver", o.gradient_tolerance);
    read(s, "max_iterations", "solver", o.max_iterations);
    read(s, "history", "solver", o.history);
    read(s, "armijo", "solver", o.armijo);
    read(s, "backtrack", "solver", o.backtrack);
    read(s, "min_step", "solver", o.min_step);
    read(s, "max_step", "solver", o.max_step);
    read(s, "energy_noise", "solver", o.energy_noise);
    read_enum(s, "preconditioner", "solver", o.preconditioner, preconditioner_kind_from_string);
    read(s, "fd_step", "solver", o.fd_step);
    read(s, "krylov_max", "solver", o.krylov_max);
    read(s, "krylov_restart", "solver", o.krylov_restart);
    read(s, "forcing", "solver", o.forcing);
    read(s, "fallback_steps", "solver", o.fallback_steps);
  }
  if (doc.contains("run")) {
    const auto& r = doc.at("run");
    check_keys(r, "run", {"model", "r0"});
    read_enum(r, "model", "run", c.run.model, model_kind_from_string);
    read(r, "r0", "run", c.run.r0);
  }
  read(doc, "output_dir", "config", c.output_dir);
  read(doc, "seed", "config", c.seed);
  read(doc, "deterministic", "config", c.deterministic);
  read(doc, "jobs", "config", c.jobs);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

json to_json(const ExperimentConfig& c) {
  json doc;
  doc["schema_version"] = config_schema_version;
  doc["potential"] = {{"kind", to_string(c.potential.kind)},
                      {"alpha", c.potential.alpha},
                      {"rnn", c.potential.rnn},
                      {"beta_e", c.potential.beta_e},
                      {"embed_coeff", c.potential.embed_coeff},
                      {"cutoff_factor", c.potential.cutoff_factor},
                      {"taper_factor", c.potential.taper_factor},
                      {"bracket", {c.potential.bracket_lo, c.potential.bracket_hi}}};
  doc["defect"] = {{"kind", to_string(c.defect.kind)}, {"crack_length", c.defect.crack_length}};
  json models = json::array();
  for (auto m : c.models) models.push_back(to_string(m));
  doc["models"] = models;
  doc["radii"] = {{"r0", c.radii.r0}, {"r1_ratio", c.radii.r1_ratio}, {"domain_ratio", c.radii.domain_ratio}};
  doc["blend"] = {{"shape", to_string(c.blend_shape)}};
  doc["mesh"] = {{"grading_exponent", c.grading_exponent}};
  doc["reference"] = {{"enabled", c.reference.enabled},
                      {"radius_factor", c.reference.radius_factor},
                      {"gradient_tolerance", c.reference.gradient_tolerance},
                      {"comparison_radius", c.reference.comparison_radius}};
  const auto& s = c.solver;
  doc["solver"] = {{"gradient_tolerance", s.gradient_tolerance},
                   {"max_iterations", s.max_iterations},
                   {"history", s.history},
                   {"armijo", s.armijo},
                   {"backtrack", s.backtrack},
                   {"min_step", s.min_step},
                   {"max_step", s.max_step},
                   {"energy_noise", s.energy_noise},
                   {"preconditioner", to_string(s.preconditioner)},
                   {"fd_step", s.fd_step},
                   {"krylov_max", s.krylov_max},
                   {"krylov_restart", s.krylov_restart},
                   {"forcing", s.forcing},
                   {"fallback_steps", s.fallback_steps}};
  doc["run"] = {{"model", to_string(c.run.model)}, {"r0", c.run.r0}};
  doc["output_dir"] = c.output_dir;
  doc["seed"] = c.seed;
  doc["deterministic"] = c.deterministic;
  doc["jobs"] = c.jobs;
  return doc;
}

// ---------------------------------------------------------------------------
// Setup

Setup calibrate(const ExperimentConfig& cfg) {
  PotentialParams p;
  p.kind = cfg.potential.kind;
  p.alpha = cfg.potential.alpha;
  p.rnn = cfg.potential.rnn;
  p.beta_e = cfg.potential.beta_e;
  p.embed_coeff = cfg.potential.embed_coeff;
  try {
    return {calibrate_scaled_cutoff(p, cfg.potential.cutoff_factor, cfg.potential.taper_factor,
                                    cfg.potential.bracket_lo, cfg.potential.bracket_hi)};
  } catch (const Error& e) {
    throw Error(std::string(e.what()) +
                "; widen potential.bracket so that it encloses the equilibrium lattice constant");
  }
}

DefectSpec defect_spec(const ExperimentConfig& cfg, double core_radius) {
  DefectSpec d;
  d.kind = cfg.defect.kind;
  d.crack_length = cfg.defect.crack_length;
  d.core_radius = core_radius;
  return d;
}

ModelSpec model_spec(const ExperimentConfig& cfg, ModelKind kind, double r0, double a) {
  ModelSpec s;
  s.kind = kind;
  s.r0 = r0 * a;
  s.r1 = cfg.radii.r1_ratio * r0 * a;
  s.r_domain = cfg.radii.domain_ratio * r0 * a;
  s.shape = cfg.blend_shape;
  s.grading_exponent = cfg.grading_exponent;
  return s;
}

SolverConfig solver_config(const ExperimentConfig& cfg, double a) {
  SolverConfig s = cfg.solver;
  s.max_step = cfg.solver.max_step * a;
  return s;
}

double comparison_radius(const ExperimentConfig& cfg, double a, double r0_min) {
  if (cfg.reference.comparison_radius > 0.0) return cfg.reference.comparison_radius * a;
  return 0.5 * cfg.radii.domain_ratio * r0_min * a;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Defects must fit inside the atomistic core of every model.
double core_radius(const ExperimentConfig& cfg, ModelKind kind, double r0, double a) {
  if (kind == ModelKind::atm) return 0.5 * cfg.radii.domain_ratio * r0 * a;
  return r0 * a;
}

}  // namespace

// ---------------------------------------------------------------------------
// Ghost forces

std::vector<GhostRow> run_ghost(const ExperimentConfig& cfg, const Setup& setup) {
  const double a = setup.a();
  const double cutoff = setup.calibrated.potential.cutoff();
  std::vector<GhostRow> rows;
  for (auto kind : cfg.models) {
    for (double r0 : cfg.radii.r0) {
      const auto spec = model_spec(cfg, kind, r0, a);
      const auto m = build_model(setup.calibrated.potential, a, DefectSpec{}, spec);
      const Eigen::VectorXd f = equilibrium_residual(m, Eigen::VectorXd::Zero(Eigen::Index(m.num_dofs())));
      GhostRow row;
      row.model = kind;
      row.r0 = r0;
      row.ndof = m.num_dofs();
      row.inf_norm = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
      row.l2_norm = f.norm();
      const double bin = 0.5;
      const int nbins = int(std::ceil(spec.r_domain / a / bin));
      row.bin_mass.assign(std::size_t(nbins), 0.0);
      for (int b = 0; b < nbins; ++b) row.bin_edges.push_back((b + 1) * bin);
      const auto radii = free_vertex_radii(m);
      double total = 0.0, inside = 0.0;
      for (std::size_t i = 0; i < radii.size(); ++i) {
        const double w = f.segment<3>(Eigen::Index(3 * i)).squaredNorm();
        const int b = std::min(nbins - 1, int(radii[i] / a / bin));
        row.bin_mass[std::size_t(b)] += w;
        total += w;
        if (radii[i] >= spec.r0 - cutoff && radii[i] <= spec.r1 + cutoff) inside += w;
      }
      if (total > 0.0)
        for (auto& v : row.bin_mass) v /= total;
      row.annulus_fraction = total > 0.0 ? inside / total : 1.0;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Runs

ReferenceSolution solve_reference(const ExperimentConfig& cfg, const Setup& setup, double r0_max) {
  const double a = setup.a();
  const double rmax = cfg.radii.domain_ratio * r0_max;
  const double radius = cfg.reference.radius_factor * rmax * a;
  ReferenceSolution ref;
  ref.model = std::make_shared<SymmetricAtomistic>(setup.calibrated.potential, a,
                                                   defect_spec(cfg, 0.5 * radius), radius);
  SolverConfig sc = solver_config(cfg, a);
  sc.gradient_tolerance = cfg.reference.gradient_tolerance;
  ref.result = ref.model->solve(sc);
  ref.y = ref.result.x;
  ref.defect_energy = ref.model->energy(ref.y).change;
  return ref;
}

SolvedModel run_model(const ExperimentConfig& cfg, const Setup& setup, ModelKind kind, double r0,
                      const ReferenceSolution* reference, double comparison, std::ostream* trace) {
  const auto t0 = Clock::now();
  const double a = setup.a();
  const auto spec = model_spec(cfg, kind, r0, a);
  SolvedModel out{build_model(setup.calibrated.potential, a, defect_spec(cfg, core_radius(cfg, kind, r0, a)), spec),
                  {}, {}};
  const auto& m = out.model;
  SolverConfig sc = solver_config(cfg, a);
  sc.trace = trace;
  out.result = solve_model(m, Eigen::VectorXd::Zero(Eigen::Index(m.num_dofs())), sc);

  auto& rec = out.record;
  rec.model = kind;
  rec.r0 = r0;
  rec.ndof = m.num_dofs();
  rec.iterations = out.result.iterations;
  rec.converged = out.result.converged;
  rec.message = out.result.message;
  try {
    rec.defect_energy = defect_energy(m, out.result.x);
  } catch (const Error&) {
    rec.defect_energy = std::numeric_limits<double>::quiet_NaN();
  }
  {
    const auto hom = build_model(setup.calibrated.potential, a, DefectSpec{}, spec);
    const auto f = equilibrium_residual(hom, Eigen::VectorXd::Zero(Eigen::Index(hom.num_dofs())));
    rec.ghost_inf_norm = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rec.err_grad = nan;
  rec.err_energy = nan;
  if (reference) {
    const double rc = comparison > 0.0 ? comparison : comparison_radius(cfg, a, r0);
    rec.err_grad = gradient_error(m, out.result.x, *reference->model, reference->y, rc);
    rec.err_energy = std::abs(rec.defect_energy - reference->defect_energy);
  }
  rec.wall_time = seconds_since(t0);
  return out;
}

BenchResult run_bench(const ExperimentConfig& cfg, const Setup& setup,
                      const std::function<void(const std::string&)>& log) {
  if (cfg.radii.r0.size() < 3) throw Error("bench needs at least 3 radii in radii.r0");
  if (cfg.reference.radius_factor < 2.0)
    throw Error("bench needs reference.radius_factor >= 2 (reference domain >= 2x largest r_domain)");
  std::mutex log_mutex;
  auto say = [&](const std::string& s) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    log(s);
  };

  BenchResult res;
  {
    const auto t0 = Clock::now();
    say("reference: solving");
    res.reference = solve_reference(cfg, setup, cfg.radii.r0.back());
    say("reference: " + std::to_string(res.reference.model->num_sites()) + " sites, " +
        std::to_string(res.reference.result.iterations) + " iterations, " + res.reference.result.message +
        ", " + std::to_string(seconds_since(t0)) + " s");
    if (!res.reference.result.converged) throw Error("reference solve did not converge: " + res.reference.result.message);
  }

  struct Job {
    ModelKind kind;
    double r0;
  };
  std::vector<Job> jobs;
  for (auto kind : cfg.models)
    for (double r0 : cfg.radii.r0) jobs.push_back({kind, r0});
  res.rows.resize(jobs.size());
  std::vector<std::string> failures(jobs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
      const auto& job = jobs[j];
      try {
        auto solved = run_model(cfg, setup, job.kind, job.r0, &res.reference,
                                comparison_radius(cfg, setup.a(), cfg.radii.r0.front()));
        res.rows[j] = solved.record;
        say(std::string(to_string(job.kind)) + " r0=" + std::to_string(job.r0) + ": " +
            solved.record.message + ", " + std::to_string(solved.record.iterations) + " iterations");
      } catch (const Error& e) {
        failures[j] = e.what();
        RunRecord rec;
        rec.model = job.kind;
        rec.r0 = job.r0;
        rec.err_grad = rec.err_energy = std::numeric_limits<double>::quiet_NaN();
        rec.message = e.what();
        res.rows[j] = rec;
        say(std::string(to_string(job.kind)) + " r0=" + std::to_string(job.r0) + ": failed: " + e.what());
      }
    }
  };
  const int nthreads = std::min<int>(cfg.jobs, int(jobs.size()));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const auto& r : res.rows) res.all_converged = res.all_converged && r.converged;
  res.slopes = fit_bench_slopes(res.rows, cfg.models);
  return res;
}

std::vector<SlopeRecord> fit_bench_slopes(const std::vector<RunRecord>& rows,
                                          const std::vector<ModelKind>& models) {
  std::vector<SlopeRecord> out;
  for (auto kind : models) {
    std::vector<double> nd, er;
    for (const auto& r : rows) {
      if (r.model != kind || !r.converged) continue;
      nd.push_back(double(r.ndof));
      er.push_back(r.err_grad);
    }
    SlopeRecord s;
    s.model = kind;
    s.points = int(nd.size());
    try {
      s.slope = fit_convergence_slope(nd, er).slope;
      s.valid = true;
    } catch (const Error&) {
      s.valid = false;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace gfc
