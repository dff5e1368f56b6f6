// End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero exit
// if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "gfc/io.hpp"
#include "gfc/metrics.hpp"

using namespace gfc;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("criterion %d: %s  %s [%s]\n", id, ok ? "PASS" : "FAIL", what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Eigen::VectorXd random_vector(std::size_t n, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = scale * u(rng);
  return v;
}

struct Bench {
  ExperimentConfig cfg;
  Setup setup = calibrate(cfg);
  double a = setup.a();

  CoupledModel model(ModelKind kind, DefectKind defect, double r0, double r1, double domain) const {
    ModelSpec s;
    s.kind = kind;
    s.r0 = r0 * a;
    s.r1 = r1 * a;
    s.r_domain = domain * a;
    return build_model(setup.calibrated.potential, a, DefectSpec{defect, 3, 1.0 * a}, s);
  }
};

void criterion1(const Bench& b) {
  auto cfg = b.cfg;
  cfg.defect.kind = DefectKind::none;
  cfg.radii.r0 = {4.0};  // r1 = 8a by the default ratio
  const auto t0 = Clock::now();
  const auto rows = run_ghost(cfg, b.setup);
  const double t = since(t0);
  std::map<ModelKind, double> g;
  for (const auto& r : rows) g[r.model] = r.inf_norm;
  const bool ok = g.at(ModelKind::bqce) >= 1e-8 && g.at(ModelKind::bgfc) <= 1e-12 &&
                  g.at(ModelKind::bqcf) <= 1e-12 && t < 10.0;
  report(1, ok, "ghost-force trichotomy at r0=4a, r1=8a",
         "BQCE " + fmt("%.3e", g.at(ModelKind::bqce)) + ", BGFC " + fmt("%.3e", g.at(ModelKind::bgfc)) +
             ", BQCF " + fmt("%.3e", g.at(ModelKind::bqcf)) + ", " + fmt("%.1f s", t));
}

void criterion2(const Bench& b) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(b.cfg.seed);
  const double h = 1e-5;
  double worst = 0.0;
  std::string detail;
  for (ModelKind kind : {ModelKind::atm, ModelKind::bqce, ModelKind::bgfc}) {
    const auto m = b.model(kind, DefectKind::vacancy, 4.0, 8.0, 16.0);
    double w = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd x = random_vector(m.num_dofs(), 0.01 * b.a, rng);
      const Eigen::VectorXd d = random_vector(m.num_dofs(), 1.0, rng);
      Eigen::VectorXd g;
      model_energy(m, x, &g);
      const double fd = (model_energy(m, x + h * d).change - model_energy(m, x - h * d).change) / (2 * h);
      // Relative to the RMS directional derivative over random directions,
      // so an accidental near-cancellation of g.d does not dominate.
      const double scale = g.norm() * d.norm() / std::sqrt(double(d.size()));
      w = std::max(w, std::abs(fd - g.dot(d)) / scale);
    }
    worst = std::max(worst, w);
    detail += std::string(to_string(kind)) + " " + fmt("%.2e", w) + ", ";
  }
  const double t = since(t0);
  report(2, worst <= 1e-6 && t < 60.0, "gradients vs central differences (h=1e-5, 20 displacements)",
         detail + fmt("%.1f s", t));
}

void criterion3(const Bench& b) {
  std::mt19937_64 rng(b.cfg.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (PotentialKind kind : {PotentialKind::morse_pair, PotentialKind::toy_eam}) {
    auto cfg = b.cfg;
    cfg.potential.kind = kind;
    const auto setup = calibrate(cfg);
    const double a = setup.a();
    const auto& pot = setup.calibrated.potential;
    const double list = pot.cutoff() + 0.1 * a;
    const auto lat = build_adjacency(build_fcc_ball(a, 5.0 * a), list);
    CBDensity cb(pot, a, list);
    for (int k = 0; k < 10; ++k) {
      Mat3 F = Mat3::Identity();
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) F(i, j) += 0.03 * u(rng);
      const double w = cb.cell_volume() * cb_energy_density(cb, F);
      for (std::size_t i = 0; i < lat.size(); ++i) {
        if (lat.sites[i].norm() > 5.0 * a - list) continue;
        std::vector<Vec3> d;
        for (const auto& n : lat.neighbors(i)) d.push_back(F * n.diff);
        worst = std::max(worst, std::abs(pot.energy(d) - w));
      }
    }
  }
  report(3, worst <= 1e-12, "Cauchy-Born patch test (Morse and EAM, 10 random F each)",
         "max |V - vol W(F)| " + fmt("%.2e", worst));
}

void criterion4(const Bench& b) {
  const auto scfg = solver_config(b.cfg, b.a);
  const auto atm = b.model(ModelKind::atm, DefectKind::vacancy, 4.0, 8.0, 8.0);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(Eigen::Index(atm.num_dofs()));
  const auto ref = solve_model(atm, zero, scfg);
  bool ok = ref.converged;
  std::string detail;
  for (ModelKind kind : {ModelKind::bqce, ModelKind::bgfc, ModelKind::bqcf}) {
    const auto m = b.model(kind, DefectKind::vacancy, 9.0, 18.0, 8.0);
    const auto r = solve_model(m, zero, scfg);
    const double diff = (r.x - ref.x).lpNorm<Eigen::Infinity>();
    ok = ok && m.degenerate && r.converged && diff <= 1e-7;
    detail += std::string(to_string(kind)) + " " + fmt("%.2e", diff) + (r.converged ? "" : " (unconverged)") + ", ";
  }
  report(4, ok, "beta = 0 vacancy solutions match ATM", detail.substr(0, detail.size() - 2));
}

void criterion5(const Bench& b) {
  std::mt19937_64 rng(b.cfg.seed);
  double worst = 0.0;
  for (DefectKind defect : {DefectKind::vacancy, DefectKind::interstitial}) {
    const auto m = b.model(ModelKind::bgfc, defect, 4.0, 8.0, 16.0);
    for (int k = 0; k < 3; ++k) {
      const Eigen::VectorXd x = random_vector(m.num_dofs(), 0.01 * b.a, rng);
      worst = std::max(worst, (bgfc_gradient(m, x) - bgfc_gradient_renormalized(m, x)).lpNorm<Eigen::Infinity>());
    }
  }
  report(5, worst <= 1e-12, "BGFC dead-load vs renormalised assembly", "max diff " + fmt("%.2e", worst));
}

struct CsvRow {
  std::string model;
  double r0, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(GFC_BENCH_PATH) + " " + args).c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion6(const fs::path& csv, int code, double seconds) {
  std::map<std::string, std::vector<CsvRow>> rows;
  std::map<std::string, double> slope;
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
    if (f.size() < 4) continue;
    if (f[0].rfind("slope:", 0) == 0) slope[f[0].substr(6)] = std::stod(f[3]);
    else rows[f[0]].push_back({f[0], std::stod(f[1]), std::stod(f[3])});
  }
  if (code != 0 || rows.size() != 3) {
    report(6, false, "vacancy convergence sweep", "bench exit code " + std::to_string(code));
    return;
  }
  bool mono = true;
  for (const auto& [m, rs] : rows)
    for (std::size_t i = 1; i < rs.size(); ++i) mono = mono && rs[i].err <= 1.05 * rs[i - 1].err;
  bool order = true;
  std::string at;
  const std::size_t n = rows["BGFC"].size();
  for (std::size_t i = n - 2; i < n; ++i) {
    const double g = rows["BGFC"][i].err, f = rows["BQCF"][i].err, e = rows["BQCE"][i].err;
    order = order && g <= f && f <= e;
    at += fmt("r0=%g: ", rows["BGFC"][i].r0) + fmt("%.3e", g) + fmt(" / %.3e", f) + fmt(" / %.3e; ", e);
  }
  const double sg = std::abs(slope["BGFC"]), sf = std::abs(slope["BQCF"]), se = std::abs(slope["BQCE"]);
  const bool slopes = sg >= sf && sf >= se && sg - se >= 0.3;
  report(6, mono && order && slopes && seconds <= 900.0, "vacancy convergence sweep",
         std::string("(a) monotone ") + (mono ? "yes" : "no") + "; (b) BGFC/BQCF/BQCE " + at +
             (order ? "ok" : "violated") + "; (c) |slope| BGFC " + fmt("%.3f", sg) + ", BQCF " +
             fmt("%.3f", sf) + ", BQCE " + fmt("%.3f", se) + (slopes ? " ok" : " violated") + "; " +
             fmt("%.0f s", seconds));
}

void criterion7(const Bench& b) {
  auto cfg = b.cfg;
  cfg.defect.kind = DefectKind::microcrack;
  cfg.defect.crack_length = 3;
  cfg.reference.enabled = false;
  // Two-fold rotation about the crack axis [110]: (x, y, z) -> (y, x, -z).
  auto rotate_grid = [](const GridPoint& g) { return GridPoint{g.y, g.x, -g.z}; };
  auto rotate = [](const Vec3& v) { return Vec3(v.y(), v.x(), -v.z()); };
  bool ok = true;
  std::string detail;
  for (ModelKind kind : {ModelKind::atm, ModelKind::bqce, ModelKind::bqcf, ModelKind::bgfc}) {
    const auto s = run_model(cfg, b.setup, kind, cfg.run.r0, nullptr);
    const auto u = s.model.expand(s.result.x);
    const auto& mesh = s.model.mesh;
    double err = 0.0;
    bool complete = true;
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
      const int w = mesh.find_vertex(rotate_grid(mesh.grid[v]));
      if (w < 0) {
        complete = false;
        continue;
      }
      err = std::max(err, (rotate(u[v]) - u[std::size_t(w)]).lpNorm<Eigen::Infinity>());
    }
    ok = ok && s.record.converged && complete && err <= 1e-6;
    detail += std::string(to_string(kind)) + (s.record.converged ? " converged " : " UNCONVERGED ") +
              fmt("%.2e", err) + ", ";
  }
  report(7, ok, "microcrack k=3 along [110], two-fold crack-axis symmetry", detail.substr(0, detail.size() - 2));
}

}  // namespace

int main() {
  try {
    const Bench b;
    criterion1(b);
    criterion2(b);
    criterion3(b);
    criterion4(b);
    criterion5(b);

    const fs::path root = fs::temp_directory_path() / "gfc_acceptance";
    fs::remove_all(root);
    auto t0 = Clock::now();
    const int code1 = run_cli("bench --deterministic --out " + (root / "first").string());
    const double seconds = since(t0);
    criterion6(root / "first" / "bench.csv", code1, seconds);

    criterion7(b);

    const int code2 = run_cli("bench --deterministic --out " + (root / "second").string());
    const std::string a = slurp(root / "first" / "bench.csv");
    const bool same = code1 == 0 && code2 == 0 && !a.empty() && a == slurp(root / "second" / "bench.csv");
    report(8, same, "deterministic bench reruns are byte-identical",
           "exit codes " + std::to_string(code1) + "/" + std::to_string(code2) + ", " +
               std::to_string(a.size()) + " bytes");
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
