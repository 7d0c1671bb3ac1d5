#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stackopt/basis.hpp"
#include "stackopt/core.hpp"
#include "stackopt/parallel.hpp"
#include "stackopt/table_io.hpp"

namespace stackopt {

/// lo:hi:count, evenly spaced and inclusive of both ends.
std::vector<double> parse_grid(const std::string& spec);
std::vector<double> linear_grid(double lo, double hi, int count);

/// rbf:<lengthscale> or poly:<degree>,<offset>.
KernelSpec parse_kernel(const std::string& spec, double noise);

struct PipelineConfig {
  std::string response = "y";
  double split = 0.5;  // training share
  Index J = 10;
  GeneratorSpec generator;
  std::vector<double> m_grid = linear_grid(0.5, 1.5, 41);
  int K = 5;
  int restarts = 5;
  SelectMode select = SelectMode::Cv;
  std::uint64_t seed = 1;
  int k = 1;

  void validate() const;
};

struct SweepRow {
  double m = 0.0;
  double error = 0.0;  // sum of squared validation errors
  Vector w;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<std::string> variables;
  std::vector<Index> j_opt;  // per variable

  /// Row with the smallest error; ties go to the earlier row.
  std::size_t best() const;
};

/// Per-variable model produced by the pipeline.
struct VariableModel {
  std::string name;
  Index j_opt = 0;
  Matrix train_basis;  // training design points x selected basis evaluations
  Vector loo;          // held-out training predictions
  Vector validation;   // predictions at the validation points
};

struct PipelineResult {
  SweepResult sweep;
  std::vector<VariableModel> models;
  Vector y_train;
  Vector y_validation;
  double unconstrained_m = 0.0;  // sum of the unconstrained stacking weights
};

/// Additive stacking pipeline: seeded train/validation split; per explanatory
/// variable a searched orthonormal basis and a linear fit with held-out
/// training predictions; then a sum-to-m solve for every m on the grid,
/// scored by validation squared error.
PipelineResult run_pipeline(const PipelineConfig& cfg, const CsvTable& table,
                            Exec exec = Exec::Parallel);
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& csv,
                            Exec exec = Exec::Parallel);

/// Header and values for sweep.tsv: m, error, w_1..w_V.
void write_sweep_tsv(const std::filesystem::path& path, const SweepResult& sweep);

/// Vector plot of error against m with the minimum marked, plus a TSV of the
/// same rows next to it (same stem, .tsv extension). Needs at least two rows.
void emit_plot(const SweepResult& sweep, const std::filesystem::path& svg_path);

/// Synthetic additive data: six uniform explanatory variables x1..x6 and
/// y = offset + sum_v g_v(x_v) + noise with heterogeneous g_v.
CsvTable synthetic_additive(Index n, std::uint64_t seed);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

}  // namespace stackopt
