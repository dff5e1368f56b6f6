#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gfc/experiment.hpp"

namespace gfc {

/// Fixed-format number used in every table so runs compare byte for byte.
std::string format_number(double v);

void write_ghost_csv(const std::string& path, const std::vector<GhostRow>& rows);
/// Long format: model,r0,r_upper,mass_fraction.
void write_ghost_histogram_csv(const std::string& path, const std::vector<GhostRow>& rows);

/// One row per model and radius, then one footer row per model whose model
/// field is "slope:<MODEL>", with the fitted slope in the err_grad column
/// and the number of fitted points in the ndof column. Rows of solves that
/// did not converge carry the model name prefixed by "unconverged:".
/// With `deterministic` the wall time column is written as 0.
void write_bench_csv(const std::string& path, const BenchResult& result, bool deterministic);
void write_run_csv(const std::string& path, const RunRecord& record, bool deterministic);

/// Extended XYZ with per-atom columns pos(3) disp(3) beta(1) flag(1); flag is
/// 0 core, 1 blend, 2 continuum-weighted (beta = 1), 3 clamped.
void write_xyz(const std::string& path, const CoupledModel& model, const Eigen::VectorXd& x,
               const std::string& comment);

using Manifest = std::vector<std::pair<std::string, std::string>>;
/// Plain "key = value" lines.
void write_manifest(const std::string& path, const Manifest& entries);

/// Gnuplot scripts placed next to the CSVs they plot.
void write_bench_gnuplot(const std::string& path, const std::string& csv_name,
                         const std::vector<ModelKind>& models);
void write_ghost_gnuplot(const std::string& path, const std::string& csv_name,
                         const std::vector<GhostRow>& rows);
void write_trace_gnuplot(const std::string& path, const std::string& csv_name);
void write_run_gnuplot(const std::string& path, const std::string& csv_name);

}  // namespace gfc
