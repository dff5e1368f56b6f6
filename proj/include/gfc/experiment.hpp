#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfc/coupling.hpp"
#include "gfc/solvers.hpp"
#include "gfc/symmetric_atomistic.hpp"

namespace gfc {

inline constexpr int config_schema_version = 1;

/// Everything a run needs. Lengths given "in a" are multiples of the
/// calibrated lattice constant a*.
struct ExperimentConfig {
  struct Potential {
    PotentialKind kind = PotentialKind::morse_pair;
    double alpha = 4.4;
    double rnn = 1.0;
    double beta_e = 8.8;
    double embed_coeff = 1.0;
    double cutoff_factor = 1.4;  // cutoff = factor * a*
    double taper_factor = 1.2;   // taper start = factor * a*
    double bracket_lo = 1.0;
    double bracket_hi = 1.6;
  } potential;

  struct Defect {
    DefectKind kind = DefectKind::vacancy;
    int crack_length = 3;
  } defect;

  std::vector<ModelKind> models{ModelKind::bqce, ModelKind::bqcf, ModelKind::bgfc};

  struct Radii {
    std::vector<double> r0{3, 4, 6, 8};  // in a
    double r1_ratio = 2.0;
    double domain_ratio = 4.0;
  } radii;

  BlendShape blend_shape = BlendShape::quintic;
  double grading_exponent = 1.5;

  struct Reference {
    bool enabled = true;
    double radius_factor = 2.0;  // times the largest r_domain
    double gradient_tolerance = 1e-9;
    /// In a; 0 selects half the smallest domain radius.
    double comparison_radius = 0.0;
  } reference;

  /// Solver settings; max_step is in a.
  SolverConfig solver = [] {
    SolverConfig s;
    s.max_step = 0.1;
    return s;
  }();

  struct Run {
    ModelKind model = ModelKind::bgfc;
    double r0 = 4.0;  // in a
  } run;

  std::string output_dir = "out";
  unsigned seed = 1;
  bool deterministic = false;
  int jobs = 1;

  /// Throws an Error naming the offending field.
  void validate() const;
};

/// Parses a config document. Unknown keys, a missing or wrong
/// schema_version and invariant violations are errors.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);
/// Fully resolved document (every field explicit); parse_config(to_json(c))
/// reproduces c.
nlohmann::json to_json(const ExperimentConfig& cfg);

struct Setup {
  CalibratedPotential calibrated;
  double a() const { return calibrated.lattice_constant; }
};
Setup calibrate(const ExperimentConfig& cfg);

DefectSpec defect_spec(const ExperimentConfig& cfg, double a);
ModelSpec model_spec(const ExperimentConfig& cfg, ModelKind kind, double r0, double a);
/// Solver settings with lengths converted to absolute units.
SolverConfig solver_config(const ExperimentConfig& cfg, double a);

// ---------------------------------------------------------------------------
// Ghost-force diagnostics

struct GhostRow {
  ModelKind model;
  double r0;  // in a
  std::size_t ndof;
  double inf_norm;
  double l2_norm;
  /// Radial distribution of the squared force: bin upper edges (in a) and
  /// the fraction of the total in each bin.
  std::vector<double> bin_edges;
  std::vector<double> bin_mass;
  /// Fraction of the squared force with r in [r0 - cutoff, r1 + cutoff].
  double annulus_fraction;
};

std::vector<GhostRow> run_ghost(const ExperimentConfig& cfg, const Setup& setup);

// ---------------------------------------------------------------------------
// Runs and sweeps

/// Pure atomistic reference solution on a symmetry-reduced ball.
struct ReferenceSolution {
  std::shared_ptr<const SymmetricAtomistic> model;
  Eigen::VectorXd y;
  SolveResult result;
  double defect_energy = 0.0;
};

/// Reference on a ball of reference.radius_factor * domain_ratio * r0_max.
ReferenceSolution solve_reference(const ExperimentConfig& cfg, const Setup& setup, double r0_max);

struct RunRecord {
  ModelKind model;
  double r0;  // in a
  std::size_t ndof = 0;
  double err_grad = 0.0;  // NaN without a reference
  double err_energy = 0.0;
  double defect_energy = 0.0;
  double ghost_inf_norm = 0.0;
  int iterations = 0;
  double wall_time = 0.0;
  bool converged = false;
  std::string message;
};

struct SolvedModel {
  CoupledModel model;
  SolveResult result;
  RunRecord record;
};

/// Builds and solves one model; errors are filled in when a reference is given.
SolvedModel run_model(const ExperimentConfig& cfg, const Setup& setup, ModelKind kind, double r0,
                      const ReferenceSolution* reference, double comparison_radius = 0.0,
                      std::ostream* trace = nullptr);

struct SlopeRecord {
  ModelKind model;
  double slope = 0.0;
  int points = 0;
  bool valid = false;
};

struct BenchResult {
  std::vector<RunRecord> rows;  // model-major, radii ascending
  std::vector<SlopeRecord> slopes;
  ReferenceSolution reference;
  bool all_converged = true;
};

/// Full sweep. Rows are computed by up to cfg.jobs concurrent workers and
/// stored in schedule order, so the output does not depend on scheduling.
BenchResult run_bench(const ExperimentConfig& cfg, const Setup& setup,
                      const std::function<void(const std::string&)>& log = {});

/// Per-model slope of log err_grad against log ndof over converged rows;
/// invalid when fewer than three usable points remain.
std::vector<SlopeRecord> fit_bench_slopes(const std::vector<RunRecord>& rows,
                                          const std::vector<ModelKind>& models);

/// Comparison radius in absolute units: the configured value, or half the
/// domain radius belonging to `r0_min`.
double comparison_radius(const ExperimentConfig& cfg, double a, double r0_min);

}  // namespace gfc
