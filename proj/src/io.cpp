#include "gfc/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace gfc {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  return out;
}

std::string r0_text(double r0) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", r0);
  return buf;
}

void bench_row(std::ostream& out, const RunRecord& r, bool deterministic) {
  std::string name = to_string(r.model);
  if (!r.converged) name = "unconverged:" + name;
  out << name << ',' << r0_text(r.r0) << ',' << r.ndof << ',' << format_number(r.err_grad) << ','
      << format_number(r.err_energy) << ',' << format_number(r.ghost_inf_norm) << ',' << r.iterations
      << ',' << format_number(deterministic ? 0.0 : r.wall_time) << '\n';
}

constexpr const char* bench_header =
    "model,r0,ndof,err_grad,err_energy,ghost_inf_norm,iterations,wall_time_seconds\n";

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

void write_ghost_csv(const std::string& path, const std::vector<GhostRow>& rows) {
  auto out = open_out(path);
  out << "model,r0,ndof,ghost_inf_norm,ghost_l2_norm\n";
  for (const auto& r : rows)
    out << to_string(r.model) << ',' << r0_text(r.r0) << ',' << r.ndof << ',' << format_number(r.inf_norm)
        << ',' << format_number(r.l2_norm) << '\n';
}

void write_ghost_histogram_csv(const std::string& path, const std::vector<GhostRow>& rows) {
  auto out = open_out(path);
  out << "model,r0,r_upper,mass_fraction\n";
  for (const auto& r : rows)
    for (std::size_t b = 0; b < r.bin_mass.size(); ++b)
      out << to_string(r.model) << ',' << r0_text(r.r0) << ',' << r0_text(r.bin_edges[b]) << ','
          << format_number(r.bin_mass[b]) << '\n';
}

void write_bench_csv(const std::string& path, const BenchResult& result, bool deterministic) {
  auto out = open_out(path);
  out << bench_header;
  for (const auto& r : result.rows) bench_row(out, r, deterministic);
  for (const auto& s : result.slopes)
    out << "slope:" << to_string(s.model) << ",," << s.points << ','
        << format_number(s.valid ? s.slope : std::nan("")) << ",,,,\n";
}

void write_run_csv(const std::string& path, const RunRecord& record, bool deterministic) {
  auto out = open_out(path);
  out << bench_header;
  bench_row(out, record, deterministic);
}

void write_xyz(const std::string& path, const CoupledModel& m, const Eigen::VectorXd& x,
               const std::string& comment) {
  const auto nodal = m.expand(x);
  const auto us = m.site_displacements(nodal);
  auto out = open_out(path);
  const auto& lat = m.lattice;
  out << lat.size() << '\n';
  out << "Properties=pos:R:3:disp:R:3:beta:R:1:flag:I:1 pbc=\"F F F\" lattice_constant="
      << format_number(m.lattice_constant) << " model=" << to_string(m.kind) << " comment=\"" << comment
      << "\"\n";
  char buf[256];
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const double beta = m.site_beta[i];
    int flag = beta <= 0.0 ? 0 : (beta < 1.0 ? 1 : 2);
    const auto& sm = m.site_map[i];
    if (sm.vertex >= 0 && m.free_index[std::size_t(sm.vertex)] < 0) flag = 3;
    const Vec3& p = lat.sites[i];
    const Vec3& u = us[i];
    std::snprintf(buf, sizeof buf, "%.10f %.10f %.10f %.12e %.12e %.12e %.10f %d\n", p.x(), p.y(), p.z(),
                  u.x(), u.y(), u.z(), beta, flag);
    out << buf;
  }
}

void write_manifest(const std::string& path, const Manifest& entries) {
  auto out = open_out(path);
  for (const auto& [k, v] : entries) out << k << " = " << v << '\n';
}

void write_bench_gnuplot(const std::string& path, const std::string& csv_name,
                         const std::vector<ModelKind>& models) {
  auto out = open_out(path);
  out << "# Convergence of err_grad against degrees of freedom.\n"
      << "set datafile separator ','\n"
      << "set logscale xy\n"
      << "set xlabel 'degrees of freedom'\n"
      << "set ylabel 'err_grad'\n"
      << "set key top right\n"
      << "set terminal pngcairo size 800,600\n"
      << "set output '" << csv_name.substr(0, csv_name.rfind('.')) << ".png'\n"
      << "plot \\\n";
  for (std::size_t i = 0; i < models.size(); ++i) {
    const std::string m = to_string(models[i]);
    out << "  '" << csv_name << "' using (strcol(1) eq '" << m << "' ? $3 : NaN):4 with linespoints title '"
        << m << "'" << (i + 1 < models.size() ? ", \\\n" : "\n");
  }
}

void write_ghost_gnuplot(const std::string& path, const std::string& csv_name,
                         const std::vector<GhostRow>& rows) {
  auto out = open_out(path);
  out << "# Ghost-force infinity norm against core radius.\n"
      << "set datafile separator ','\n"
      << "set logscale y\n"
      << "set xlabel 'r0 / a'\n"
      << "set ylabel 'ghost force (inf norm)'\n"
      << "set terminal pngcairo size 800,600\n"
      << "set output '" << csv_name.substr(0, csv_name.rfind('.')) << ".png'\n"
      << "plot \\\n";
  std::vector<std::string> names;
  for (const auto& r : rows) {
    const std::string m = to_string(r.model);
    if (std::find(names.begin(), names.end(), m) == names.end()) names.push_back(m);
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    // Exact zeros would vanish on a log axis; clamp them to 1e-17.
    out << "  '" << csv_name << "' using (strcol(1) eq '" << names[i] << "' ? $2 : NaN):($4 > 1e-17 ? $4 : 1e-17)"
        << " with linespoints title '" << names[i] << "'" << (i + 1 < names.size() ? ", \\\n" : "\n");
  }
}

void write_trace_gnuplot(const std::string& path, const std::string& csv_name) {
  auto out = open_out(path);
  out << "# Solver residual history.\n"
      << "set datafile separator ','\n"
      << "set logscale y\n"
      << "set xlabel 'iteration'\n"
      << "set ylabel 'residual (inf norm)'\n"
      << "set terminal pngcairo size 800,600\n"
      << "set output '" << csv_name.substr(0, csv_name.rfind('.')) << ".png'\n"
      << "plot '" << csv_name << "' using 1:3 skip 1 with lines title 'residual'\n";
}

void write_run_gnuplot(const std::string& path, const std::string& csv_name) {
  auto out = open_out(path);
  out << "# Single-run record: error columns as bars.\n"
      << "set datafile separator ','\n"
      << "set style data histograms\n"
      << "set style fill solid\n"
      << "set logscale y\n"
      << "set terminal pngcairo size 800,600\n"
      << "set output '" << csv_name.substr(0, csv_name.rfind('.')) << ".png'\n"
      << "plot '" << csv_name << "' using 4:xtic(1) skip 1 title 'err_grad', '' using 5 skip 1 title 'err_energy'\n";
}

}  // namespace gfc
