#include "stackopt/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "stackopt/bayes.hpp"
#include "stackopt/loocv.hpp"
#include "stackopt/pipeline.hpp"
#include "stackopt/solver.hpp"

namespace stackopt {
namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config;
  int threads = 0;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
};

struct DataOpts {
  std::string data;
  std::string response = "y";
};

struct SearchOpts {
  Index J = 10;
  std::string generator = "nw";
  std::string kernel = "rbf:1";
  double noise = 0.1;
  int K = 5;
  int restarts = 5;
  std::string select = "cv";
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "flat key = value file; flags win")
      ->check(CLI::ExistingFile);
  sub->add_option("--threads", c.threads, "worker threads, 0 for all")->check(CLI::NonNegativeNumber);
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--out-dir", c.out_dir, "output directory");
}

void add_data(CLI::App* sub, DataOpts& d) {
  sub->add_option("--data", d.data, "input table (.csv, or .tsv for tabs)")->required();
  sub->add_option("--response", d.response, "response column name or index");
}

void add_search(CLI::App* sub, SearchOpts& s) {
  sub->add_option("--J", s.J, "candidate basis size")->check(CLI::PositiveNumber);
  sub->add_option("--generator", s.generator)->check(CLI::IsMember({"nw", "gp"}));
  sub->add_option("--kernel", s.kernel, "rbf:<lengthscale> or poly:<degree>,<offset>");
  sub->add_option("--noise", s.noise, "GP noise variance")->check(CLI::NonNegativeNumber);
  sub->add_option("--K", s.K, "permutations for the sequential score")->check(CLI::PositiveNumber);
  sub->add_option("--restarts", s.restarts)->check(CLI::PositiveNumber);
  sub->add_option("--select", s.select)->check(CLI::IsMember({"sequential", "cv"}));
}

BasisSearchConfig search_config(const SearchOpts& s) {
  BasisSearchConfig cfg;
  cfg.J = s.J;
  cfg.generator.kind =
      s.generator == "gp" ? GeneratorKind::GaussianProcess : GeneratorKind::NadarayaWatson;
  cfg.generator.kernel = parse_kernel(s.kernel, s.noise);
  cfg.restarts = s.restarts;
  cfg.permutations = s.K;
  cfg.mode = s.select == "sequential" ? SelectMode::Sequential : SelectMode::Cv;
  return cfg;
}

CsvTable read_table(const std::string& path) {
  const char delim = fs::path(path).extension() == ".tsv" ? '\t' : ',';
  return CsvTable::read(path, delim);
}

fs::path out_path(const Common& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return fs::path(c.out_dir) / name;
}

std::string file_safe(const std::string& name) {
  std::string s = name;
  for (char& ch : s) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.')) ch = '_';
  }
  return s;
}

void write_basis(const Common& c, const std::string& var, const Matrix& evals) {
  std::vector<std::string> header;
  for (Index j = 0; j < evals.cols(); ++j) header.push_back("b_" + std::to_string(j + 1));
  write_tsv(out_path(c, "basis_" + file_safe(var) + ".tsv"), header, evals);
}

/// Explanatory columns and the response, in table order.
struct Columns {
  std::vector<std::string> names;
  Matrix x;
  Vector y;
};

Columns split_columns(const CsvTable& t, const std::string& response) {
  const std::size_t ycol = t.column(response);
  std::vector<std::size_t> xcols;
  Columns out;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c == ycol) continue;
    xcols.push_back(c);
    out.names.push_back(t.header[c]);
  }
  if (xcols.empty()) throw InvalidArgument("need at least one column besides the response");
  const std::vector<std::size_t> ycols{ycol};
  out.x = t.numeric(xcols);
  out.y = t.numeric(ycols).col(0);
  return out;
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> vals;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw InvalidArgument(flag + ": expected a comma-separated list of numbers, got '" + text + "'");
    }
  }
  if (vals.empty()) throw InvalidArgument(flag + ": empty list");
  return vals;
}

LossKind parse_loss(const std::string& s) {
  if (s == "squared") return LossKind::Squared;
  if (s == "absolute") return LossKind::Absolute;
  return LossKind::LogUtility;
}

/// Config keys become flags placed before the command-line flags, so the
/// latter take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  if (!fs::is_regular_file(path)) throw InvalidArgument("--config: no such file '" + path + "'");
  const auto items = CLI::ConfigINI().from_file(path);
  std::vector<std::string> out;
  std::size_t first = 0;
  if (!args.empty() && args[0].rfind("-", 0) != 0) out.push_back(args[first++]);
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty()) {
      throw InvalidArgument("--config: sections are not supported ('" + item.fullname() + "')");
    }
    if (item.name == "config") continue;
    out.push_back("--" + item.name);
    for (const auto& v : item.inputs) out.push_back(v);
  }
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(first), args.end());
  return out;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  const auto fail = [&](const std::string& kind, const std::string& msg, int code) {
    err << "stackopt: error: " << kind << ": " << one_line(msg) << '\n';
    return code;
  };

  CLI::App app{"Stacking with sum constraints, data-driven bases and risk checks", "stackopt"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Common common;
  DataOpts data;
  SearchOpts search;
  double split = 0.5;
  std::string m_grid = "0.5:1.5:41";
  int k = 1;

  auto* pipeline = app.add_subcommand("pipeline", "split, per-variable bases, m sweep");
  add_common(pipeline, common);
  add_data(pipeline, data);
  add_search(pipeline, search);
  pipeline->add_option("--split", split, "training share")->check(CLI::Range(0.0, 1.0));
  pipeline->add_option("--m-grid", m_grid, "lo:hi:count");
  pipeline->add_option("--k", k, "leave-k-out block size")->check(CLI::PositiveNumber);

  auto* gen_basis = app.add_subcommand("gen-basis", "search an orthonormal basis per variable");
  add_common(gen_basis, common);
  add_data(gen_basis, data);
  add_search(gen_basis, search);

  auto* loo = app.add_subcommand("loo", "held-out predictions per variable (loo.tsv)");
  add_common(loo, common);
  add_data(loo, data);
  add_search(loo, search);
  loo->add_option("--k", k, "leave-k-out block size")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep-m", "sum-to-m weights over a grid from a held-out table");
  add_common(sweep, common);
  add_data(sweep, data);
  sweep->add_option("--m-grid", m_grid, "lo:hi:count");
  sweep->add_option("--k", k, "leave-k-out block size of the table")->check(CLI::PositiveNumber);

  std::string loss = "squared", predictor = "bayes", n_grid = "50,100,200,400,800",
              degrees = "1,2,3", weights;
  int reps = 20;
  double noise_sd = 0.5;
  auto* verify = app.add_subcommand("verify-bayes", "posterior risk against CV risk (gaps.tsv)");
  add_common(verify, common);
  verify->add_option("--loss", loss)->check(CLI::IsMember({"squared", "absolute", "log"}));
  verify->add_option("--predictor", predictor)->check(CLI::IsMember({"bayes", "plugin"}));
  verify->add_option("--n-grid", n_grid, "comma-separated sample sizes");
  verify->add_option("--reps", reps, "replicates per sample size")->check(CLI::Range(10, 1000000));
  verify->add_option("--degrees", degrees, "polynomial degree of each component");
  verify->add_option("--weights", weights, "stacking weights, uniform by default");
  verify->add_option("--noise-sd", noise_sd, "truth noise sd")->check(CLI::PositiveNumber);

  Index synth_n = 1000;
  std::string synth_out = "synthetic_additive.csv";
  auto* synth = app.add_subcommand("synth", "write the synthetic additive dataset");
  add_common(synth, common);
  synth->add_option("--n", synth_n, "rows")->check(CLI::Range(Index{2}, Index{100000000}));
  synth->add_option("--output", synth_out, "file name inside --out-dir");

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  } catch (const Error& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (common.threads > 0) set_threads(common.threads);
    const RngPlan plan(common.seed);

    if (pipeline->parsed()) {
      PipelineConfig cfg;
      cfg.response = data.response;
      cfg.split = split;
      const BasisSearchConfig sc = search_config(search);
      cfg.J = sc.J;
      cfg.generator = sc.generator;
      cfg.K = sc.permutations;
      cfg.restarts = sc.restarts;
      cfg.select = sc.mode;
      cfg.m_grid = parse_grid(m_grid);
      cfg.seed = common.seed;
      cfg.k = k;
      const PipelineResult res = run_pipeline(cfg, read_table(data.data));
      write_sweep_tsv(out_path(common, "sweep.tsv"), res.sweep);
      for (const auto& m : res.models) write_basis(common, m.name, m.train_basis);
      if (res.sweep.rows.size() >= 2) emit_plot(res.sweep, out_path(common, "plot.svg"));
      const auto& best = res.sweep.rows[res.sweep.best()];
      out << "m_opt\t" << format_double(best.m) << "\nerror\t" << format_double(best.error)
          << "\nunconstrained_m\t" << format_double(res.unconstrained_m) << '\n';
      for (std::size_t v = 0; v < res.models.size(); ++v) {
        out << "variable\t" << res.models[v].name << "\tj_opt\t" << res.models[v].j_opt << "\tw\t"
            << format_double(best.w(static_cast<Index>(v))) << '\n';
      }
    } else if (gen_basis->parsed() || loo->parsed()) {
      const Columns cols = split_columns(read_table(data.data), data.response);
      const BasisSearchConfig sc = search_config(search);
      const auto V = static_cast<Index>(cols.names.size());
      std::vector<Vector> held_out(static_cast<std::size_t>(V));
      std::vector<Matrix> evals(static_cast<std::size_t>(V));
      std::vector<Index> j_opt(static_cast<std::size_t>(V));
      for_each_index(Exec::Parallel, V, [&](std::ptrdiff_t v) {
        const auto vs = static_cast<std::size_t>(v);
        try {
          const Dataset ds(cols.x.col(v), cols.y);
          const RngPlan sub = plan.child("variable", {static_cast<std::uint64_t>(v)});
          const BasisSearchResult found = search_basis(ds, sc, sub);
          const BasisSet basis = found.selected();
          j_opt[vs] = found.j_opt;
          evals[vs] = basis.evals;
          if (loo->parsed()) {
            if (k == 1) {
              held_out[vs] = loo_linear(fit_linear(basis.evals, cols.y), cols.y);
            } else {
              const Fitter fitter =
                  linear_fitter([basis](const Matrix& x) { return basis.evaluate(x); });
              held_out[vs] = loo_refit(fitter, ds, k, sub);
            }
          }
        } catch (const Error& e) {
          throw Error(e.kind(), "variable '" + cols.names[vs] + "': " + e.what());
        }
      });
      if (gen_basis->parsed()) {
        for (Index v = 0; v < V; ++v) {
          write_basis(common, cols.names[static_cast<std::size_t>(v)], evals[static_cast<std::size_t>(v)]);
        }
      } else {
        std::vector<std::string> header{data.response};
        Matrix table(cols.y.size(), V + 1);
        table.col(0) = cols.y;
        for (Index v = 0; v < V; ++v) {
          header.push_back(cols.names[static_cast<std::size_t>(v)]);
          table.col(v + 1) = held_out[static_cast<std::size_t>(v)];
        }
        write_tsv(out_path(common, "loo.tsv"), header, table);
      }
      for (Index v = 0; v < V; ++v) {
        out << "variable\t" << cols.names[static_cast<std::size_t>(v)] << "\tj_opt\t"
            << j_opt[static_cast<std::size_t>(v)] << '\n';
      }
    } else if (sweep->parsed()) {
      const std::vector<double> grid = parse_grid(m_grid);
      for (double m : grid) {
        if (m == 0.0) throw InvalidArgument("m must be nonzero");
      }
      const Columns cols = split_columns(read_table(data.data), data.response);
      const LooMatrix lm(cols.x, k);
      SweepResult res;
      res.variables = cols.names;
      res.rows.resize(grid.size());
      for_each_index(Exec::Parallel, static_cast<std::ptrdiff_t>(grid.size()), [&](std::ptrdiff_t g) {
        const double m = grid[static_cast<std::size_t>(g)];
        try {
          const WeightSolution s = solve_sum_to_m(lm, cols.y, m);
          res.rows[static_cast<std::size_t>(g)] = SweepRow{m, s.q, s.w};
        } catch (const Error& e) {
          throw Error(e.kind(), "m=" + format_double(m) + ": " + e.what());
        }
      });
      write_sweep_tsv(out_path(common, "sweep.tsv"), res);
      if (res.rows.size() >= 2) emit_plot(res, out_path(common, "plot.svg"));
      const auto& best = res.rows[res.best()];
      out << "m_opt\t" << format_double(best.m) << "\nerror\t" << format_double(best.error)
          << "\nunconstrained_m\t" << format_double(solve_unconstrained(lm, cols.y).w.sum()) << '\n';
    } else if (verify->parsed()) {
      std::vector<GaussianLinearModel> models;
      const double sigma2 = noise_sd * noise_sd;
      for (double d : parse_list(degrees, "--degrees")) {
        if (d < 0 || d != std::floor(d)) throw InvalidArgument("--degrees: degrees must be whole numbers >= 0");
        models.push_back(GaussianLinearModel::polynomial(static_cast<int>(d), 1.0, sigma2));
      }
      const ModelMixture mixture(std::move(models));
      Vector w = mixture.pi;
      if (!weights.empty()) {
        const auto wv = parse_list(weights, "--weights");
        if (static_cast<Index>(wv.size()) != mixture.J()) {
          throw InvalidArgument("--weights: expected " + std::to_string(mixture.J()) + " values");
        }
        w = Eigen::Map<const Vector>(wv.data(), mixture.J());
      }
      std::vector<Index> ns;
      for (double n : parse_list(n_grid, "--n-grid")) {
        if (n < 2 || n != std::floor(n)) throw InvalidArgument("--n-grid: sizes must be whole numbers >= 2");
        ns.push_back(static_cast<Index>(n));
      }
      const TruthGenerator truth{[](double x) { return std::sin(2.0 * x) + 0.3 * x * x; }, noise_sd};
      const GapReport rep = convergence_experiment(
          truth, mixture, w, parse_loss(loss),
          predictor == "plugin" ? PredictorKind::PlugIn : PredictorKind::Bayes, ns, reps, plan);
      Matrix gaps(static_cast<Index>(ns.size()) * reps, 3);
      for (std::size_t i = 0; i < ns.size(); ++i) {
        for (int r = 0; r < reps; ++r) {
          const Index row = static_cast<Index>(i) * reps + r;
          gaps(row, 0) = static_cast<double>(ns[i]);
          gaps(row, 1) = r;
          gaps(row, 2) = rep.gaps[i][static_cast<std::size_t>(r)];
        }
      }
      write_tsv(out_path(common, "gaps.tsv"), {"n", "rep", "gap"}, gaps);
      out << "n\tmedian\tp90\trms\n";
      for (std::size_t i = 0; i < ns.size(); ++i) {
        out << ns[i] << '\t' << format_double(rep.median[i]) << '\t' << format_double(rep.p90[i])
            << '\t' << format_double(rep.rms[i]) << '\n';
      }
    } else if (synth->parsed()) {
      write_csv(out_path(common, synth_out), synthetic_additive(synth_n, common.seed));
    }
  } catch (const Error& e) {
    return fail(e.kind(), e.what(), 1);
  } catch (const std::exception& e) {
    return fail("io", e.what(), 1);
  }
  return 0;
}

}  // namespace stackopt
