// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "stackopt/basis.hpp"
#include "stackopt/bayes.hpp"
#include "stackopt/linalg.hpp"
#include "stackopt/loocv.hpp"
#include "stackopt/pipeline.hpp"
#include "stackopt/solver.hpp"
#include "support.hpp"

using namespace stackopt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double rel_dev(const Vector& a, const Vector& b) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

Outcome solver_oracle() {
  std::mt19937_64 eng(1001);
  std::uniform_int_distribution<Index> pick_n(20, 200), pick_j(1, 8);
  std::uniform_real_distribution<double> pick_m(-2.0, 2.0);
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  int bad = 0;
  for (int t = 0; t < 200; ++t) {
    const auto in = testing_support::random_instance(pick_n(eng), pick_j(eng), eng);
    double m = 0.0;
    while (m == 0.0) m = pick_m(eng);
    const LooMatrix loo(in.preds);
    const Vector pairs[3][2] = {
        {solve_unconstrained(loo, in.y).w, kkt_oracle(loo, in.y).w},
        {solve_sum_to_one(loo, in.y).w, kkt_oracle(loo, in.y, 1.0).w},
        {solve_sum_to_m(loo, in.y, m).w, kkt_oracle(loo, in.y, m).w}};
    for (const auto& p : pairs) {
      worst = std::max(worst, rel_dev(p[0], p[1]));
      if (!weights_agree(p[0], p[1], 1e-8)) ++bad;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {bad == 0 && secs < 5.0, "200 instances x 3 solvers, max rel dev " + sci(worst) +
                                      ", mismatches " + std::to_string(bad) + ", " + sci(secs) + " s (< 5 s)"};
}

Outcome appendix_example() {
  std::mt19937_64 eng(1002);
  std::normal_distribution<double> z;
  const Index h = 50;
  Matrix x1 = Matrix::Zero(2 * h, 1), x2 = Matrix::Zero(2 * h, 1);
  Vector y(2 * h);
  for (Index i = 0; i < h; ++i) {
    const double u = 1.0 + z(eng);
    x1(i, 0) = u;
    x2(h + i, 0) = u;
    y(i) = y(h + i) = 1.5 * u + 0.5 * z(eng);
  }
  const std::vector<Vector> cols{loo_linear(fit_linear(x1, y), y), loo_linear(fit_linear(x2, y), y)};
  const LooMatrix loo = assemble_loo_matrix(cols);
  const Vector w1 = solve_sum_to_one(loo, y).w;
  const Vector w2 = solve_sum_to_m(loo, y, 2.0).w;
  const double d1 = (w1.array() - 0.5).abs().maxCoeff();
  const double d2 = (w2.array() - 1.0).abs().maxCoeff();
  return {d1 <= 1e-6 && d2 <= 1e-6, "sum-to-one (" + sci(w1(0)) + ", " + sci(w1(1)) + "), sum-to-two (" +
                                        sci(w2(0)) + ", " + sci(w2(1)) + "), tol 1e-6"};
}

Outcome span_invariance() {
  std::mt19937_64 eng(1003);
  const auto in = testing_support::random_instance(80, 5, eng);
  const double q = solve_unconstrained(LooMatrix(in.preds), in.y).q;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    Matrix a;
    do {
      a = testing_support::gaussian_matrix(5, 5, eng);
    } while (reciprocal_condition(a) < 1e-3);
    const double q2 = solve_unconstrained(LooMatrix(in.preds * a), in.y).q;
    worst = std::max(worst, std::abs(q2 - q) / std::max(1.0, q));
  }
  return {worst <= 1e-8, "100 recombinations, max rel change in Q " + sci(worst) + " (<= 1e-8)"};
}

Outcome monotonicity() {
  std::mt19937_64 eng(1004);
  std::uniform_int_distribution<Index> pick_j(2, 8);
  int violations = 0;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Index J = pick_j(eng);
    const auto in = testing_support::random_instance(60, J, eng);
    const double q = solve_unconstrained(LooMatrix(in.preds), in.y).q;
    for (Index drop = 0; drop < J; ++drop) {
      Matrix sub(in.preds.rows(), J - 1);
      for (Index j = 0, c = 0; j < J; ++j) {
        if (j != drop) sub.col(c++) = in.preds.col(j);
      }
      const double qs = solve_unconstrained(LooMatrix(sub), in.y).q;
      worst = std::min(worst, qs - q);
      if (qs < q - 1e-10) ++violations;
    }
  }
  return {violations == 0, "100 instances, every single-column drop; most negative change " + sci(worst) +
                               ", violations " + std::to_string(violations)};
}

Outcome constraint_ordering() {
  std::mt19937_64 eng(1005);
  std::uniform_int_distribution<Index> pick_n(20, 200), pick_j(1, 8);
  std::vector<double> grid;
  for (double m : linear_grid(-2.0, 2.0, 41)) {
    if (std::abs(m) > 1e-12) grid.push_back(m);
  }
  int violations = 0;
  for (int t = 0; t < 200; ++t) {
    const auto in = testing_support::random_instance(pick_n(eng), pick_j(eng), eng);
    const LooMatrix loo(in.preds);
    const double q0 = solve_unconstrained(loo, in.y).q;
    for (double m : grid) {
      if (q0 > solve_sum_to_m(loo, in.y, m).q + 1e-10 * std::max(1.0, q0)) ++violations;
    }
  }
  return {violations == 0, "200 instances x " + std::to_string(grid.size()) + " grid values of m, violations " +
                               std::to_string(violations)};
}

Outcome leverage_identity() {
  std::mt19937_64 eng(1006);
  std::uniform_int_distribution<Index> pick_n(15, 80), pick_p(1, 6);
  const Fitter identity = linear_fitter([](const Matrix& x) { return x; });
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Index n = pick_n(eng);
    const Matrix x = testing_support::gaussian_matrix(n, std::min(pick_p(eng), n - 2), eng);
    const Vector y = testing_support::gaussian_vector(n, eng);
    const Vector shortcut = loo_linear(fit_linear(x, y), y);
    const Vector refit = loo_refit(identity, Dataset(x, y), 1, RngPlan(t));
    worst = std::max(worst, (shortcut - refit).cwiseAbs().maxCoeff());
  }
  // Leave-k-out: compare against a direct refit without each block.
  const Matrix x = testing_support::gaussian_matrix(40, 3, eng);
  const Vector y = testing_support::gaussian_vector(40, eng);
  double worst_k = 0.0;
  for (int k : {2, 5}) {
    const RngPlan plan(77);
    const Vector got = loo_refit(identity, Dataset(x, y), k, plan);
    for (const auto& block : make_fold_schedule(40, k, plan)) {
      std::vector<bool> held(40, false);
      for (Index i : block) held[static_cast<std::size_t>(i)] = true;
      Matrix a(40 - static_cast<Index>(block.size()), 3);
      Vector b(a.rows());
      for (Index r = 0, c = 0; r < 40; ++r) {
        if (!held[static_cast<std::size_t>(r)]) {
          a.row(c) = x.row(r);
          b(c++) = y(r);
        }
      }
      const Vector beta = oracle::lstsq(a, b);
      for (Index i : block) worst_k = std::max(worst_k, std::abs(got(i) - x.row(i).dot(beta)));
    }
  }
  return {worst <= 1e-8 && worst_k <= 1e-8, "50 instances, max |shortcut - refit| " + sci(worst) +
                                                 "; k in {2, 5} max dev from block refit " + sci(worst_k)};
}

Outcome gram_schmidt() {
  std::mt19937_64 eng(1007);
  double worst = 0.0;
  int accepted = 0;
  for (int t = 0; t < 100; ++t) {
    const GramSchmidtOutcome gs = gram_schmidt_empirical(testing_support::gaussian_matrix(50, 6, eng));
    if (!gs.accepted) continue;
    ++accepted;
    worst = std::max(worst, (empirical_gram(gs.evals) - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff());
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    Matrix x(60, 1);
    Vector y(60);
    for (Index i = 0; i < 60; ++i) {
      x(i, 0) = u(eng);
      y(i) = std::cos(5.0 * x(i, 0)) + 0.2 * u(eng);
    }
    GeneratorSpec gen;
    if (t % 2) {
      gen.kind = GeneratorKind::GaussianProcess;
      gen.kernel = KernelSpec(Rbf{0.4}, 0.05);
    }
    const BasisSet b = generate_orthonormal_basis(Dataset(x, y), 6, gen, RngPlan(t));
    ++accepted;
    worst = std::max(worst, (b.gram - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff());
  }
  int rejected = 0;
  std::uniform_int_distribution<Index> pick(0, 5);
  for (int t = 0; t < 100; ++t) {
    Matrix c = testing_support::gaussian_matrix(50, 6, eng);
    const Index a = pick(eng);
    const Index b = (a + 1 + pick(eng) % 5) % 6;
    c.col(b) = c.col(a);
    if (!gram_schmidt_empirical(c).accepted) ++rejected;
  }
  return {worst <= 1e-8 && rejected == 100, std::to_string(accepted) + " accepted bases, max |gram - I| " +
                                                sci(worst) + "; duplicate batches rejected " +
                                                std::to_string(rejected) + "/100"};
}

Outcome surface_area_check() {
  const Box box{Vector::Constant(1, 0.0), Vector::Constant(1, std::numbers::pi)};
  const BatchFn sine = [](const Matrix& q) -> Vector { return q.col(0).array().sin().matrix(); };
  const double want = oracle::arc_length([](double t) { return std::cos(t); }, 0.0, std::numbers::pi);
  const double d_sin = std::abs(surface_area(sine, box, 10000) - want);
  const Box line_box{Vector::Constant(1, -1.0), Vector::Constant(1, 2.0)};
  const BatchFn line = [](const Matrix& q) -> Vector { return (0.75 * q.col(0).array() - 0.2).matrix(); };
  const double d_line = std::abs(surface_area(line, line_box, 1000) - 3.0 * 1.25);
  return {d_sin <= 1e-4 && d_line <= 1e-12,
          "sin on [0, pi] dev " + sci(d_sin) + " (<= 1e-4), line dev " + sci(d_line) + " (<= 1e-12)"};
}

Outcome risk_formulas() {
  std::mt19937_64 eng(1009);
  std::uniform_real_distribution<double> mu(-2.0, 2.0), var(0.1, 2.0), wt(0.1, 1.0);
  std::uniform_int_distribution<int> pick_j(1, 4);
  double worst_z = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int J = pick_j(eng);
    GaussianMixtureDensity p{Vector(J), Vector(J), Vector(J)};
    GaussianMixtureDensity a{Vector(J), Vector(J), Vector(J)};
    for (int j = 0; j < J; ++j) {
      p.weights(j) = wt(eng);
      p.means(j) = mu(eng);
      p.vars(j) = var(eng);
      a.weights(j) = wt(eng);
      a.means(j) = mu(eng);
      a.vars(j) = var(eng);
    }
    p.weights /= p.weights.sum();
    a.weights /= a.weights.sum();
    const double point = mu(eng);
    const auto sq = oracle::mixture_expectation(p.weights, p.means, p.vars,
                                                [&](double v) { return (v - point) * (v - point); }, 1000000, 3 * t);
    const auto ab = oracle::mixture_expectation(p.weights, p.means, p.vars,
                                                [&](double v) { return std::abs(v - point); }, 1000000, 3 * t + 1);
    const auto lg = oracle::mixture_expectation(p.weights, p.means, p.vars,
                                                [&](double v) { return -std::log(a.pdf(v)); }, 1000000, 3 * t + 2);
    worst_z = std::max({worst_z, std::abs(posterior_risk(p, point, LossKind::Squared) - sq.mean) / sq.se,
                        std::abs(posterior_risk(p, point, LossKind::Absolute) - ab.mean) / ab.se,
                        std::abs(posterior_risk(p, a, LossKind::LogUtility) - lg.mean) / lg.se});
  }
  double worst_h = 0.0;
  for (double v : {0.05, 0.7, 3.0, 25.0}) {
    const GaussianMixtureDensity g{Vector::Ones(1), Vector::Constant(1, 1.3), Vector::Constant(1, v)};
    worst_h = std::max(worst_h, std::abs(posterior_risk(g, g, LossKind::LogUtility) - oracle::gaussian_entropy(v)));
  }
  return {worst_z <= 4.0 && worst_h <= 1e-6, "20 configs x 3 losses, worst |risk - MC| " + sci(worst_z) +
                                                  " SE (<= 4); entropy dev " + sci(worst_h) + " (<= 1e-6)"};
}

Outcome convergence() {
  const auto start = std::chrono::steady_clock::now();
  const double sd = 0.5;
  const TruthGenerator truth{[](double x) { return 0.4 + 1.2 * x; }, sd};
  const ModelMixture mixture({GaussianLinearModel::polynomial(1, 4.0, sd * sd)});
  const Vector w = Vector::Ones(1);
  const std::vector<Index> ns{50, 800};
  std::string detail;
  bool pass = true;
  int cell = 0;
  for (LossKind loss : {LossKind::Squared, LossKind::Absolute, LossKind::LogUtility}) {
    for (PredictorKind pk : {PredictorKind::Bayes, PredictorKind::PlugIn}) {
      const GapReport r = convergence_experiment(truth, mixture, w, loss, pk, ns, 50,
                                                 RngPlan(2000 + static_cast<std::uint64_t>(cell++)));
      pass = pass && r.median[1] < r.median[0];
      detail += (detail.empty() ? "" : "; ") + sci(r.median[0]) + " -> " + sci(r.median[1]);
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {pass && secs < 600.0, "median gap n=50 -> n=800 over {sq, abs, log} x {bayes, plug-in}: " + detail +
                                    "; " + sci(secs) + " s"};
}

Outcome pipeline_replication(const fs::path& data) {
  const CsvTable table = CsvTable::read(data);
  int high_j = 0, interior = 0;
  std::string js;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    PipelineConfig cfg;
    cfg.seed = seed;
    const PipelineResult r = run_pipeline(cfg, table);
    int high = 0;
    for (const auto& m : r.models) high += m.j_opt >= 7;
    if (2 * high > static_cast<int>(r.models.size())) ++high_j;
    js += std::to_string(high);
    if (seed <= 10) {
      const std::size_t b = r.sweep.best();
      if (b > 0 && b + 1 < r.sweep.rows.size()) ++interior;
    }
  }
  return {high_j >= 14 && interior >= 8,
          "j_opt >= 7 for most variables in " + std::to_string(high_j) + "/20 seeds (need 14; per seed " + js +
              " of 6); interior m_opt in " + std::to_string(interior) + "/10 seeds (need 8)"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const std::string& cli) {
  const fs::path root = fs::temp_directory_path() / "stackopt_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const auto run = [&](const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " > /dev/null";
    return std::system(cmd.c_str()) == 0;
  };
  bool ok = run("synth --n 240 --seed 5 --out-dir \"" + root.string() + "\" --output data.csv");
  const std::string data = (root / "data.csv").string();
  int files = 0, differing = 0;
  for (int round = 0; round < 3 && ok; ++round) {
    const std::string threads = round == 0 ? "1" : (round == 1 ? "4" : "2");
    const fs::path out = root / ("run" + std::to_string(round));
    const std::string common = " --seed 11 --threads " + threads + " --out-dir \"" + out.string() + "\"";
    ok = ok && run("pipeline --data \"" + data + "\" --J 5 --restarts 2 --m-grid 0.5:1.5:21" + common);
    ok = ok && run("pipeline --data \"" + data + "\" --J 4 --restarts 2 --select sequential --K 2 --k 3 --m-grid 0.6:1.4:9 --out-dir \"" +
                   (out / "seq").string() + "\" --seed 11 --threads " + threads);
    ok = ok && run("gen-basis --data \"" + data + "\" --J 3 --generator gp --kernel rbf:0.8 --restarts 2 --out-dir \"" +
                   (out / "gp").string() + "\" --seed 11 --threads " + threads);
    ok = ok && run("loo --data \"" + data + "\" --J 4 --restarts 2" + common);
    ok = ok && run("sweep-m --data \"" + (out / "loo.tsv").string() + "\" --m-grid 0.5:2:16 --out-dir \"" +
                   (out / "sweep").string() + "\" --threads " + threads);
    ok = ok && run("verify-bayes --n-grid 20,80 --reps 12 --loss log" + common);
  }
  if (ok) {
    for (const auto& entry : fs::recursive_directory_iterator(root / "run0")) {
      if (entry.path().extension() != ".tsv") continue;
      const fs::path rel = fs::relative(entry.path(), root / "run0");
      ++files;
      const std::string base = slurp(entry.path());
      if (base != slurp(root / "run1" / rel) || base != slurp(root / "run2" / rel)) ++differing;
    }
  }
  fs::remove_all(root);
  return {ok && files > 0 && differing == 0,
          std::string(ok ? "" : "a command failed; ") + std::to_string(files) +
              " TSV outputs from 6 commands compared across 1, 4 and 2 threads, differing " +
              std::to_string(differing)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::string data, cli;
  app.add_option("--data", data, "shipped synthetic additive dataset")->required()->check(CLI::ExistingFile);
  app.add_option("--cli", cli, "stackopt executable")->required()->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"solver-oracle equivalence", solver_oracle},
      {"orthogonal two-model example", appendix_example},
      {"span invariance", span_invariance},
      {"monotonicity under column removal", monotonicity},
      {"constraint ordering", constraint_ordering},
      {"leverage identity and leave-k-out", leverage_identity},
      {"gram-schmidt", gram_schmidt},
      {"surface area", surface_area_check},
      {"risk formulas", risk_formulas},
      {"cv risk convergence", convergence},
      {"pipeline qualitative replication", [&] { return pipeline_replication(data); }},
      {"determinism", [&] { return determinism(cli); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << "  " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return failed ? 1 : 0;
}
