#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "gfc/common.hpp"

namespace gfc {

class CoupledModel;

enum class PreconditionerKind { none, laplacian };

const char* to_string(PreconditionerKind kind);
PreconditionerKind preconditioner_kind_from_string(const std::string& name);

struct SolverConfig {
  double gradient_tolerance = 1e-8;  // infinity norm
  int max_iterations = 5000;
  int history = 20;
  double armijo = 1e-4;
  double backtrack = 0.5;
  double min_step = 1e-14;
  /// Largest accepted change of any single displacement component per step.
  double max_step = 0.1;
  /// Energy differences below this are treated as rounding noise; the line
  /// search then falls back to a derivative test.
  double energy_noise = 1e-10;
  PreconditionerKind preconditioner = PreconditionerKind::laplacian;
  // Newton-Krylov.
  double fd_step = 1e-7;
  int krylov_max = 200;
  int krylov_restart = 50;
  double forcing = 1e-2;
  int fallback_steps = 50;
  /// Per-iteration CSV trace (iteration,value,residual_norm,step) if set.
  std::ostream* trace = nullptr;

  void validate() const;
};

struct SolveResult {
  Eigen::VectorXd x;
  double residual_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  /// Energy change per accepted iterate (minimisation) or residual 2-norm
  /// (force balance); entry 0 is the initial state.
  std::vector<double> energy_trace;
  bool converged = false;
  double wall_time = 0.0;
  std::string message;
};

class Preconditioner {
 public:
  virtual ~Preconditioner() = default;
  virtual Eigen::VectorXd apply(const Eigen::VectorXd& r) const = 0;
};

class IdentityPreconditioner final : public Preconditioner {
 public:
  Eigen::VectorXd apply(const Eigen::VectorXd& r) const override { return r; }
};

/// Sparse LDL^T of an SPD matrix, factorised once. With `components` = 3
/// the matrix is scalar over vertices and is applied to each Cartesian
/// component of a packed (x0,y0,z0,x1,...) vector.
class SparseCholeskyPreconditioner final : public Preconditioner {
 public:
  SparseCholeskyPreconditioner(const Eigen::SparseMatrix<double>& matrix, int components);
  Eigen::VectorXd apply(const Eigen::VectorXd& r) const override;

 private:
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  int components_;
};

/// Incomplete Cholesky (Eigen's IC with AMD ordering and diagonal shift)
/// of an SPD matrix. A fixed SPD operator, so quasi-Newton updates stay
/// consistent, at a fraction of the cost of the exact factor on 3D meshes.
class IncompleteCholeskyPreconditioner final : public Preconditioner {
 public:
  IncompleteCholeskyPreconditioner(const Eigen::SparseMatrix<double>& matrix, int components);
  Eigen::VectorXd apply(const Eigen::VectorXd& r) const override;

 private:
  Eigen::IncompleteCholesky<double> ic_;
  int components_;
};

/// Smooth objective for minimisation. evaluate() returns a value whose
/// differences are meaningful (typically E(x) - E(0)) and fills the gradient.
class EnergyObjective {
 public:
  virtual ~EnergyObjective() = default;
  virtual std::size_t size() const = 0;
  virtual double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const = 0;
  /// Norm used for the convergence test; reduced parameterisations override it.
  virtual double residual_norm(const Eigen::VectorXd& grad) const {
    return grad.size() ? grad.lpNorm<Eigen::Infinity>() : 0.0;
  }
};

/// Nonlinear system R(x) = 0.
class ResidualObjective {
 public:
  virtual ~ResidualObjective() = default;
  virtual std::size_t size() const = 0;
  virtual void residual(const Eigen::VectorXd& x, Eigen::VectorXd& r) const = 0;
};

/// Adapters for closures (tests inject quadratic energies and linear
/// residuals through these).
class FunctionObjective final : public EnergyObjective {
 public:
  using Fn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;
  FunctionObjective(std::size_t n, Fn fn) : n_(n), fn_(std::move(fn)) {}
  std::size_t size() const override { return n_; }
  double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& g) const override { return fn_(x, g); }

 private:
  std::size_t n_;
  Fn fn_;
};

class FunctionResidual final : public ResidualObjective {
 public:
  using Fn = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;
  FunctionResidual(std::size_t n, Fn fn) : n_(n), fn_(std::move(fn)) {}
  std::size_t size() const override { return n_; }
  void residual(const Eigen::VectorXd& x, Eigen::VectorXd& r) const override { fn_(x, r); }

 private:
  std::size_t n_;
  Fn fn_;
};

/// Preconditioned L-BFGS with backtracking (Armijo, then an approximate
/// Wolfe test once energy differences drown in rounding).
SolveResult minimize(const EnergyObjective& f, const Eigen::VectorXd& x0, const SolverConfig& cfg,
                     const Preconditioner* precond = nullptr);

/// Jacobian-free Newton-Krylov with right-preconditioned restarted GMRES,
/// residual-norm backtracking and a preconditioned residual-descent fallback.
SolveResult solve_root(const ResidualObjective& f, const Eigen::VectorXd& x0,
                       const SolverConfig& cfg, const Preconditioner* precond = nullptr);

/// Exact sparse factor for small matrices, incomplete Cholesky otherwise.
std::unique_ptr<Preconditioner> make_factor_preconditioner(const Eigen::SparseMatrix<double>& matrix,
                                                           int components);

std::unique_ptr<Preconditioner> make_preconditioner(const CoupledModel& model,
                                                    const SolverConfig& cfg);

/// ATM / BQCE / BGFC relaxation.
SolveResult minimize_energy(const CoupledModel& model, const Eigen::VectorXd& u0,
                            const SolverConfig& cfg);
/// BQCF force balance.
SolveResult solve_force_balance(const CoupledModel& model, const Eigen::VectorXd& u0,
                                const SolverConfig& cfg);
/// Dispatches on the model kind.
SolveResult solve_model(const CoupledModel& model, const Eigen::VectorXd& u0,
                        const SolverConfig& cfg);

}  // namespace gfc
