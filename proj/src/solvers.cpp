#include "gfc/solvers.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <ostream>

#include "gfc/coupling.hpp"

namespace gfc {

namespace {
// Above this many vertices the exact factor's fill-in dominates the solve.
constexpr Eigen::Index exact_factor_limit = 4000;
}  // namespace

const char* to_string(PreconditionerKind kind) {
  return kind == PreconditionerKind::none ? "none" : "laplacian";
}

PreconditionerKind preconditioner_kind_from_string(const std::string& name) {
  if (name == "none") return PreconditionerKind::none;
  if (name == "laplacian") return PreconditionerKind::laplacian;
  throw Error("unknown preconditioner '" + name + "'");
}

void SolverConfig::validate() const {
  if (!(gradient_tolerance > 0.0)) throw Error("solver.gradient_tolerance must be positive");
  if (max_iterations < 0) throw Error("solver.max_iterations must be non-negative");
  if (history < 1) throw Error("solver.history must be at least 1");
  if (!(armijo > 0.0 && armijo < 0.5)) throw Error("solver.armijo must lie in (0, 0.5)");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw Error("solver.backtrack must lie in (0, 1)");
  if (!(min_step > 0.0)) throw Error("solver.min_step must be positive");
  if (!(max_step > 0.0)) throw Error("solver.max_step must be positive");
  if (!(energy_noise >= 0.0)) throw Error("solver.energy_noise must be non-negative");
  if (!(fd_step > 0.0)) throw Error("solver.fd_step must be positive");
  if (krylov_max < 1) throw Error("solver.krylov_max must be at least 1");
  if (krylov_restart < 1) throw Error("solver.krylov_restart must be at least 1");
  if (!(forcing > 0.0 && forcing < 1.0)) throw Error("solver.forcing must lie in (0, 1)");
  if (fallback_steps < 0) throw Error("solver.fallback_steps must be non-negative");
}

SparseCholeskyPreconditioner::SparseCholeskyPreconditioner(const Eigen::SparseMatrix<double>& matrix,
                                                           int components)
    : components_(components) {
  ldlt_.compute(matrix);
  if (ldlt_.info() != Eigen::Success) throw Error("preconditioner factorisation failed");
}

Eigen::VectorXd SparseCholeskyPreconditioner::apply(const Eigen::VectorXd& r) const {
  if (components_ == 1) return ldlt_.solve(r);
  const Eigen::Index n = r.size() / components_;
  Eigen::MatrixXd b(n, components_);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < components_; ++c) b(i, c) = r[components_ * i + c];
  const Eigen::MatrixXd z = ldlt_.solve(b);
  Eigen::VectorXd out(r.size());
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < components_; ++c) out[components_ * i + c] = z(i, c);
  return out;
}

IncompleteCholeskyPreconditioner::IncompleteCholeskyPreconditioner(
    const Eigen::SparseMatrix<double>& matrix, int components)
    : components_(components) {
  ic_.compute(matrix);
  if (ic_.info() != Eigen::Success) throw Error("preconditioner factorisation failed");
}

Eigen::VectorXd IncompleteCholeskyPreconditioner::apply(const Eigen::VectorXd& r) const {
  if (components_ == 1) return ic_.solve(r);
  const Eigen::Index n = r.size() / components_;
  Eigen::VectorXd b(n), out(r.size());
  for (int c = 0; c < components_; ++c) {
    for (Eigen::Index i = 0; i < n; ++i) b[i] = r[components_ * i + c];
    const Eigen::VectorXd z = ic_.solve(b);
    for (Eigen::Index i = 0; i < n; ++i) out[components_ * i + c] = z[i];
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void trace_line(const SolverConfig& cfg, int it, double value, double res, double step) {
  if (!cfg.trace) return;
  *cfg.trace << it << ',' << value << ',' << res << ',' << step << '\n';
}

}  // namespace

// ---------------------------------------------------------------------------
// L-BFGS

SolveResult minimize(const EnergyObjective& f, const Eigen::VectorXd& x0, const SolverConfig& cfg,
                     const Preconditioner* precond) {
  cfg.validate();
  const auto t0 = Clock::now();
  IdentityPreconditioner identity;
  const Preconditioner& M = precond ? *precond : identity;

  SolveResult res;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd g(x.size());
  double e = f.evaluate(x, g);
  res.evaluations = 1;
  res.energy_trace.push_back(e);
  double gnorm = f.residual_norm(g);
  if (cfg.trace) *cfg.trace << "iteration,value,residual_norm,step\n";
  trace_line(cfg, 0, e, gnorm, 0.0);

  struct Pair {
    Eigen::VectorXd s, y;
    double rho;
  };
  std::deque<Pair> mem;
  double gamma = 1.0;
  Eigen::VectorXd gn(x.size());

  int it = 0;
  while (gnorm > cfg.gradient_tolerance && it < cfg.max_iterations) {
    // Two-loop recursion with H0 = gamma * M^{-1}.
    Eigen::VectorXd q = g;
    std::vector<double> alpha(mem.size());
    for (std::size_t i = mem.size(); i-- > 0;) {
      alpha[i] = mem[i].rho * mem[i].s.dot(q);
      q -= alpha[i] * mem[i].y;
    }
    Eigen::VectorXd d = gamma * M.apply(q);
    for (std::size_t i = 0; i < mem.size(); ++i) {
      const double b = mem[i].rho * mem[i].y.dot(d);
      d += (alpha[i] - b) * mem[i].s;
    }
    d = -d;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      mem.clear();
      gamma = 1.0;
      d = -M.apply(g);
      slope = g.dot(d);
      if (!(slope < 0.0)) {
        res.message = "preconditioned gradient is not a descent direction";
        break;
      }
    }

    const double dmax = d.lpNorm<Eigen::Infinity>();
    double step = std::min(1.0, cfg.max_step / dmax);
    bool accepted = false;
    double en = 0.0;
    Eigen::VectorXd xn;
    while (step * dmax >= cfg.min_step) {
      xn = x + step * d;
      try {
        en = f.evaluate(xn, gn);
        ++res.evaluations;
      } catch (const InvertedElement&) {
        ++res.evaluations;
        step *= cfg.backtrack;
        continue;
      }
      if (en <= e + cfg.armijo * step * slope) {
        accepted = true;
        break;
      }
      // Approximate Wolfe: energy flat to rounding, slope not overshooting.
      if (en <= e + cfg.energy_noise && gn.dot(d) <= (1.0 - 2.0 * cfg.armijo) * std::abs(slope)) {
        accepted = true;
        break;
      }
      step *= cfg.backtrack;
    }
    if (!accepted) {
      res.message = "line search failed (step below minimum)";
      break;
    }
    ++it;
    Eigen::VectorXd s = xn - x;
    Eigen::VectorXd y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-300 && sy > 1e-12 * s.norm() * y.norm()) {
      const Eigen::VectorXd My = M.apply(y);
      gamma = sy / y.dot(My);
      mem.push_back({std::move(s), std::move(y), 1.0 / sy});
      if (int(mem.size()) > cfg.history) mem.pop_front();
    }
    x = std::move(xn);
    g = gn;
    e = en;
    gnorm = f.residual_norm(g);
    res.energy_trace.push_back(e);
    trace_line(cfg, it, e, gnorm, step);
  }

  res.x = x;
  res.iterations = it;
  res.residual_norm = gnorm;
  res.converged = gnorm <= cfg.gradient_tolerance;
  if (res.converged) res.message = "converged";
  else if (res.message.empty()) res.message = "iteration limit reached";
  res.wall_time = seconds_since(t0);
  return res;
}

// ---------------------------------------------------------------------------
// Newton-Krylov

namespace {

struct GmresOutcome {
  Eigen::VectorXd delta;
  double residual = 0.0;
  int iterations = 0;
};

// Solves J delta = b with right preconditioning; J is given as a product.
GmresOutcome gmres(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& J,
                   const Preconditioner& M, const Eigen::VectorXd& b, double tol, int max_total,
                   int restart, int* evaluations) {
  const Eigen::Index n = b.size();
  GmresOutcome out;
  out.delta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r = b;
  double beta = r.norm();
  out.residual = beta;
  while (out.iterations < max_total && beta > tol) {
    const int m = std::min(restart, max_total - out.iterations);
    std::vector<Eigen::VectorXd> V;
    V.reserve(std::size_t(m + 1));
    V.push_back(r / beta);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
    Eigen::VectorXd cs = Eigen::VectorXd::Zero(m), sn = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(m + 1);
    s[0] = beta;
    int k = 0;
    for (; k < m; ++k) {
      Eigen::VectorXd w = J(M.apply(V[std::size_t(k)]));
      ++*evaluations;
      for (int i = 0; i <= k; ++i) {
        H(i, k) = w.dot(V[std::size_t(i)]);
        w -= H(i, k) * V[std::size_t(i)];
      }
      H(k + 1, k) = w.norm();
      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
        H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
        H(i, k) = t;
      }
      const double den = std::hypot(H(k, k), H(k + 1, k));
      if (den == 0.0) break;
      cs[k] = H(k, k) / den;
      sn[k] = H(k + 1, k) / den;
      const double hk1 = H(k + 1, k);
      H(k, k) = cs[k] * H(k, k) + sn[k] * hk1;
      H(k + 1, k) = 0.0;
      s[k + 1] = -sn[k] * s[k];
      s[k] = cs[k] * s[k];
      ++out.iterations;
      const double nrm = w.norm();
      if (nrm > 0.0) V.push_back(w / nrm);
      if (std::abs(s[k + 1]) <= tol || nrm == 0.0) {
        ++k;
        break;
      }
    }
    if (k == 0) break;
    const Eigen::VectorXd y =
        H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(s.head(k));
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < k; ++i) z += y[i] * V[std::size_t(i)];
    out.delta += M.apply(z);
    // True residual for the restart.
    r = b - J(out.delta);
    ++*evaluations;
    beta = r.norm();
    out.residual = beta;
  }
  return out;
}

}  // namespace

SolveResult solve_root(const ResidualObjective& f, const Eigen::VectorXd& x0, const SolverConfig& cfg,
                       const Preconditioner* precond) {
  cfg.validate();
  const auto t0 = Clock::now();
  IdentityPreconditioner identity;
  const Preconditioner& M = precond ? *precond : identity;

  SolveResult res;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd r(x.size());
  f.residual(x, r);
  res.evaluations = 1;
  double rinf = r.size() ? r.lpNorm<Eigen::Infinity>() : 0.0;
  double r2 = r.norm();
  res.energy_trace.push_back(r2);
  if (cfg.trace) *cfg.trace << "iteration,value,residual_norm,step\n";
  trace_line(cfg, 0, r2, rinf, 0.0);

  Eigen::VectorXd rt(x.size());
  auto try_point = [&](const Eigen::VectorXd& xt) -> bool {
    try {
      f.residual(xt, rt);
      ++res.evaluations;
      return std::isfinite(rt.squaredNorm());
    } catch (const InvertedElement&) {
      ++res.evaluations;
      return false;
    }
  };

  // Preconditioned residual descent; returns the number of accepted steps.
  auto fallback = [&]() {
    int accepted = 0;
    double tau = 1.0;
    for (int k = 0; k < cfg.fallback_steps && rinf > cfg.gradient_tolerance; ++k) {
      const Eigen::VectorXd p = -M.apply(r);
      const double pmax = p.lpNorm<Eigen::Infinity>();
      if (!(pmax > 0.0)) break;
      double t = std::min(tau, cfg.max_step / pmax);
      bool ok = false;
      for (int h = 0; h < 40; ++h) {
        const Eigen::VectorXd xt = x + t * p;
        if (try_point(xt) && rt.norm() <= (1.0 - cfg.armijo * t) * r2) {
          x = xt;
          r = rt;
          ok = true;
          break;
        }
        t *= cfg.backtrack;
      }
      if (!ok) break;
      ++accepted;
      tau = 2.0 * t;
      rinf = r.lpNorm<Eigen::Infinity>();
      r2 = r.norm();
    }
    return accepted;
  };

  int it = 0;
  while (rinf > cfg.gradient_tolerance && it < cfg.max_iterations) {
    const double xscale = std::max(1.0, x.lpNorm<Eigen::Infinity>());
    auto J = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      const double vmax = v.lpNorm<Eigen::Infinity>();
      if (vmax == 0.0) return Eigen::VectorXd::Zero(v.size());
      const double eps = cfg.fd_step * xscale / vmax;
      Eigen::VectorXd rp(v.size());
      f.residual(x + eps * v, rp);
      return (rp - r) / eps;
    };
    const auto lin = gmres(J, M, -r, cfg.forcing * r2, cfg.krylov_max, cfg.krylov_restart,
                           &res.evaluations);
    bool stepped = false;
    if (lin.residual < 0.99 * r2) {
      const double dmax = lin.delta.lpNorm<Eigen::Infinity>();
      double lam = dmax > 0.0 ? std::min(1.0, cfg.max_step / dmax) : 0.0;
      for (int h = 0; h < 12 && lam > 0.0; ++h) {
        const Eigen::VectorXd xt = x + lam * lin.delta;
        if (try_point(xt) && rt.norm() <= (1.0 - cfg.armijo * lam) * r2) {
          x = xt;
          r = rt;
          stepped = true;
          break;
        }
        lam *= cfg.backtrack;
      }
      if (stepped) {
        ++it;
        rinf = r.lpNorm<Eigen::Infinity>();
        r2 = r.norm();
        res.energy_trace.push_back(r2);
        trace_line(cfg, it, r2, rinf, lam);
      }
    }
    if (!stepped) {
      const int acc = fallback();
      ++it;
      res.energy_trace.push_back(r2);
      trace_line(cfg, it, r2, rinf, 0.0);
      if (acc == 0) {
        res.message = "Newton-Krylov stagnated";
        break;
      }
    }
  }

  res.x = x;
  res.iterations = it;
  res.residual_norm = rinf;
  res.converged = rinf <= cfg.gradient_tolerance;
  if (res.converged) res.message = "converged";
  else if (res.message.empty()) res.message = "iteration limit reached";
  res.wall_time = seconds_since(t0);
  return res;
}

// ---------------------------------------------------------------------------
// Model wrappers

namespace {

class ModelEnergy final : public EnergyObjective {
 public:
  explicit ModelEnergy(const CoupledModel& m) : m_(m) {}
  std::size_t size() const override { return m_.num_dofs(); }
  double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& g) const override {
    return model_energy(m_, x, &g).change;
  }

 private:
  const CoupledModel& m_;
};

class ModelResidual final : public ResidualObjective {
 public:
  explicit ModelResidual(const CoupledModel& m) : m_(m) {}
  std::size_t size() const override { return m_.num_dofs(); }
  void residual(const Eigen::VectorXd& x, Eigen::VectorXd& r) const override {
    r = equilibrium_residual(m_, x);
  }

 private:
  const CoupledModel& m_;
};

}  // namespace

std::unique_ptr<Preconditioner> make_factor_preconditioner(const Eigen::SparseMatrix<double>& matrix,
                                                           int components) {
  if (matrix.rows() <= exact_factor_limit)
    return std::make_unique<SparseCholeskyPreconditioner>(matrix, components);
  return std::make_unique<IncompleteCholeskyPreconditioner>(matrix, components);
}

std::unique_ptr<Preconditioner> make_preconditioner(const CoupledModel& model,
                                                    const SolverConfig& cfg) {
  if (cfg.preconditioner == PreconditionerKind::none) return std::make_unique<IdentityPreconditioner>();
  return make_factor_preconditioner(scalar_laplacian(model), 3);
}

SolveResult minimize_energy(const CoupledModel& model, const Eigen::VectorXd& u0,
                            const SolverConfig& cfg) {
  if (model.kind == ModelKind::bqcf) throw Error("BQCF has no energy to minimise; use force balance");
  const auto t0 = Clock::now();
  const auto M = make_preconditioner(model, cfg);
  auto res = minimize(ModelEnergy(model), u0, cfg, M.get());
  res.wall_time = seconds_since(t0);
  return res;
}

SolveResult solve_force_balance(const CoupledModel& model, const Eigen::VectorXd& u0,
                                const SolverConfig& cfg) {
  if (model.kind != ModelKind::bqcf) throw Error("force balance is defined for BQCF only");
  const auto t0 = Clock::now();
  const auto M = make_preconditioner(model, cfg);
  auto res = solve_root(ModelResidual(model), u0, cfg, M.get());
  res.wall_time = seconds_since(t0);
  return res;
}

SolveResult solve_model(const CoupledModel& model, const Eigen::VectorXd& u0,
                        const SolverConfig& cfg) {
  return model.kind == ModelKind::bqcf ? solve_force_balance(model, u0, cfg)
                                       : minimize_energy(model, u0, cfg);
}

}  // namespace gfc
