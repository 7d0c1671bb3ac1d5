#include "stackopt/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "stackopt/loocv.hpp"
#include "stackopt/solver.hpp"

namespace stackopt {

std::vector<double> linear_grid(double lo, double hi, int count) {
  if (count < 1) throw InvalidArgument("grid needs at least one point");
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    g[static_cast<std::size_t>(i)] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
  }
  return g;
}

std::vector<double> parse_grid(const std::string& spec) {
  std::istringstream in(spec);
  std::string lo, hi, count;
  if (!std::getline(in, lo, ':') || !std::getline(in, hi, ':') || !std::getline(in, count)) {
    throw InvalidArgument("--m-grid: expected lo:hi:count, got '" + spec + "'");
  }
  try {
    std::size_t used = 0;
    const int c = std::stoi(count, &used);
    if (used != count.size()) throw std::invalid_argument(count);
    return linear_grid(std::stod(lo), std::stod(hi), c);
  } catch (const std::logic_error&) {
    throw InvalidArgument("--m-grid: expected lo:hi:count, got '" + spec + "'");
  }
}

KernelSpec parse_kernel(const std::string& spec, double noise) {
  try {
    if (spec.rfind("rbf:", 0) == 0) return KernelSpec(Rbf{std::stod(spec.substr(4))}, noise);
    if (spec.rfind("poly:", 0) == 0) {
      const std::string rest = spec.substr(5);
      const auto comma = rest.find(',');
      if (comma == std::string::npos) throw std::invalid_argument(spec);
      return KernelSpec(Polynomial{std::stoi(rest.substr(0, comma)), std::stod(rest.substr(comma + 1))},
                        noise);
    }
  } catch (const std::logic_error&) {
  }
  throw InvalidArgument("--kernel: expected rbf:<lengthscale> or poly:<degree>,<offset>, got '" +
                        spec + "'");
}

void PipelineConfig::validate() const {
  if (!(split > 0.0 && split < 1.0)) throw InvalidArgument("--split: must be in (0, 1)");
  if (J < 1) throw InvalidArgument("--J: must be >= 1");
  if (m_grid.empty()) throw InvalidArgument("--m-grid: empty grid");
  for (double m : m_grid) {
    if (m == 0.0) throw InvalidArgument("m must be nonzero");
  }
  if (K < 1) throw InvalidArgument("--K: must be >= 1");
  if (restarts < 1) throw InvalidArgument("--restarts: must be >= 1");
  if (k < 1) throw InvalidArgument("--k: must be >= 1");
}

std::size_t SweepResult::best() const {
  if (rows.empty()) throw InvalidArgument("empty sweep");
  std::size_t b = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].error < rows[b].error) b = r;
  }
  return b;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const CsvTable& table, Exec exec) {
  cfg.validate();
  if (table.header.size() < 2) throw InvalidArgument("need at least two columns");
  const std::size_t ycol = table.column(cfg.response);
  std::vector<std::size_t> xcols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c != ycol) xcols.push_back(c);
  }
  const std::vector<std::size_t> ycols{ycol};
  const Matrix xall = table.numeric(xcols);
  const Vector yall = table.numeric(ycols).col(0);
  const Index n = yall.size();
  const auto n_train = static_cast<Index>(std::llround(cfg.split * static_cast<double>(n)));
  if (n_train <= cfg.J) {
    throw InvalidArgument("split leaves " + std::to_string(n_train) +
                          " training rows; need more than J=" + std::to_string(cfg.J));
  }
  if (n - n_train < 1) throw InvalidArgument("split leaves no validation rows");

  const RngPlan plan(cfg.seed);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  auto eng = plan.stream("split");
  std::shuffle(order.begin(), order.end(), eng);
  const std::span<const Index> tr(order.data(), static_cast<std::size_t>(n_train));
  const std::span<const Index> va(order.data() + n_train, static_cast<std::size_t>(n - n_train));

  PipelineResult res;
  res.y_train.resize(n_train);
  res.y_validation.resize(n - n_train);
  for (std::size_t i = 0; i < tr.size(); ++i) res.y_train(static_cast<Index>(i)) = yall(tr[i]);
  for (std::size_t i = 0; i < va.size(); ++i) res.y_validation(static_cast<Index>(i)) = yall(va[i]);

  BasisSearchConfig search;
  search.J = cfg.J;
  search.generator = cfg.generator;
  search.restarts = cfg.restarts;
  search.permutations = cfg.K;
  search.mode = cfg.select;

  const auto V = static_cast<std::ptrdiff_t>(xcols.size());
  res.models.resize(xcols.size());
  for_each_index(exec, V, [&](std::ptrdiff_t v) {
    const auto vs = static_cast<std::size_t>(v);
    VariableModel& model = res.models[vs];
    model.name = table.header[xcols[vs]];
    Matrix xt(n_train, 1), xv(n - n_train, 1);
    for (std::size_t i = 0; i < tr.size(); ++i) xt(static_cast<Index>(i), 0) = xall(tr[i], v);
    for (std::size_t i = 0; i < va.size(); ++i) xv(static_cast<Index>(i), 0) = xall(va[i], v);
    try {
      const Dataset data(xt, res.y_train);
      const RngPlan sub = plan.child("variable", {static_cast<std::uint64_t>(v)});
      const BasisSearchResult found = search_basis(data, search, sub, exec);
      const BasisSet basis = found.selected();
      model.j_opt = found.j_opt;
      model.train_basis = basis.evals;
      const LinearModelFit fit = fit_linear(basis.evals, res.y_train);
      if (cfg.k == 1) {
        model.loo = loo_linear(fit, res.y_train);
      } else {
        const Fitter fitter = linear_fitter([basis](const Matrix& x) { return basis.evaluate(x); });
        model.loo = loo_refit(fitter, data, cfg.k, sub, exec);
      }
      model.validation = basis.evaluate(xv) * fit.coef;
    } catch (const Error& e) {
      throw Error(e.kind(), "variable '" + model.name + "': " + e.what());
    }
  });

  std::vector<Vector> columns;
  Matrix val_preds(n - n_train, V);
  for (std::size_t v = 0; v < res.models.size(); ++v) {
    columns.push_back(res.models[v].loo);
    val_preds.col(static_cast<Index>(v)) = res.models[v].validation;
    res.sweep.variables.push_back(res.models[v].name);
    res.sweep.j_opt.push_back(res.models[v].j_opt);
  }
  const LooMatrix loo = assemble_loo_matrix(columns, cfg.k);
  res.unconstrained_m = solve_unconstrained(loo, res.y_train).w.sum();

  res.sweep.rows.resize(cfg.m_grid.size());
  for_each_index(exec, static_cast<std::ptrdiff_t>(cfg.m_grid.size()), [&](std::ptrdiff_t g) {
    const double m = cfg.m_grid[static_cast<std::size_t>(g)];
    WeightSolution s;
    try {
      s = solve_sum_to_m(loo, res.y_train, m);
    } catch (const Error& e) {
      throw Error(e.kind(), "m=" + format_double(m) + ": " + e.what());
    }
    SweepRow& row = res.sweep.rows[static_cast<std::size_t>(g)];
    row.m = m;
    row.w = s.w;
    row.error = (res.y_validation - val_preds * s.w).squaredNorm();
  });
  return res;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& csv,
                            Exec exec) {
  return run_pipeline(cfg, CsvTable::read(csv), exec);
}

namespace {

std::pair<std::vector<std::string>, Matrix> sweep_table(const SweepResult& sweep) {
  const Index width = sweep.rows.empty() ? 0 : sweep.rows.front().w.size();
  std::vector<std::string> header{"m", "error"};
  for (Index j = 0; j < width; ++j) header.push_back("w_" + std::to_string(j + 1));
  Matrix vals(static_cast<Index>(sweep.rows.size()), 2 + width);
  for (std::size_t r = 0; r < sweep.rows.size(); ++r) {
    const auto& row = sweep.rows[r];
    if (row.w.size() != width) throw DimensionError("columns: sweep rows have different widths");
    vals(static_cast<Index>(r), 0) = row.m;
    vals(static_cast<Index>(r), 1) = row.error;
    vals.row(static_cast<Index>(r)).tail(width) = row.w.transpose();
  }
  return {header, vals};
}

}  // namespace

void write_sweep_tsv(const std::filesystem::path& path, const SweepResult& sweep) {
  const auto [header, vals] = sweep_table(sweep);
  write_tsv(path, header, vals);
}

void emit_plot(const SweepResult& sweep, const std::filesystem::path& svg_path) {
  if (sweep.rows.size() < 2) throw InvalidArgument("a sweep plot needs at least two rows");
  std::filesystem::path tsv_path = svg_path;
  tsv_path.replace_extension(".tsv");

  const double w = 640, h = 420, left = 80, right = 20, top = 30, bottom = 60;
  double mlo = sweep.rows.front().m, mhi = mlo, elo = sweep.rows.front().error, ehi = elo;
  for (const auto& r : sweep.rows) {
    mlo = std::min(mlo, r.m);
    mhi = std::max(mhi, r.m);
    elo = std::min(elo, r.error);
    ehi = std::max(ehi, r.error);
  }
  if (mhi == mlo) mhi = mlo + 1.0;
  if (ehi == elo) ehi = elo + 1.0;
  const auto px = [&](double m) { return left + (m - mlo) / (mhi - mlo) * (w - left - right); };
  const auto py = [&](double e) { return h - bottom - (e - elo) / (ehi - elo) * (h - top - bottom); };
  const auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return std::string(buf);
  };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\""
      << h - bottom << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double m = mlo + (mhi - mlo) * t / 4.0;
    const double e = elo + (ehi - elo) * t / 4.0;
    svg << "<text x=\"" << px(m) << "\" y=\"" << h - bottom + 18 << "\" text-anchor=\"middle\">"
        << num(m) << "</text>\n"
        << "<text x=\"" << left - 6 << "\" y=\"" << py(e) + 4 << "\" text-anchor=\"end\">" << num(e)
        << "</text>\n";
  }
  svg << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 15
      << "\" text-anchor=\"middle\">m (sum of stacking weights)</text>\n"
      << "<text x=\"18\" y=\"" << (top + h - bottom) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << (top + h - bottom) / 2 << ")\">cumulative predictive error</text>\n"
      << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (const auto& r : sweep.rows) svg << px(r.m) << ',' << py(r.error) << ' ';
  svg << "\"/>\n";
  const auto& b = sweep.rows[sweep.best()];
  svg << "<circle cx=\"" << px(b.m) << "\" cy=\"" << py(b.error) << "\" r=\"5\" fill=\"firebrick\"/>\n"
      << "<text id=\"minimum\" x=\"" << px(b.m) << "\" y=\"" << py(b.error) - 10
      << "\" text-anchor=\"middle\" fill=\"firebrick\" data-m=\"" << format_double(b.m)
      << "\" data-error=\"" << format_double(b.error) << "\">m_opt = " << num(b.m) << "</text>\n"
      << "</svg>\n";

  std::ofstream out(svg_path, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + svg_path.string());
  out << svg.str();
  if (!out) throw Error("io", "failed writing " + svg_path.string());
  write_sweep_tsv(tsv_path, sweep);
}

CsvTable synthetic_additive(Index n, std::uint64_t seed) {
  if (n < 2) throw InvalidArgument("synthetic data needs n >= 2");
  const RngPlan plan(seed);
  auto eng = plan.stream("synthetic");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  constexpr double pi = std::numbers::pi;
  CsvTable t;
  t.header = {"x1", "x2", "x3", "x4", "x5", "x6", "y"};
  for (Index i = 0; i < n; ++i) {
    std::array<double, 6> x{};
    for (double& v : x) v = u(eng);
    const double g = 2.0 * std::sin(2.0 * pi * x[0]) +
                     6.0 * (x[1] - 0.5) * (x[1] - 0.5) +
                     1.5 * std::tanh(12.0 * (x[2] - 0.4)) +
                     std::sin(5.0 * pi * x[3]) * x[3] +
                     std::exp(1.5 * x[4]) +
                     std::cos(3.0 * pi * x[5]) * (1.0 - x[5]);
    const double y = 5.0 + g + noise(eng);
    std::vector<std::string> row;
    for (double v : x) row.push_back(format_double(v));
    row.push_back(format_double(y));
    t.rows.push_back(std::move(row));
    t.line_numbers.push_back(static_cast<std::size_t>(i) + 2);
  }
  return t;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + path.string());
  for (std::size_t c = 0; c < table.header.size(); ++c) out << (c ? "," : "") << table.header[c];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
    out << '\n';
  }
  if (!out) throw Error("io", "failed writing " + path.string());
}

}  // namespace stackopt
