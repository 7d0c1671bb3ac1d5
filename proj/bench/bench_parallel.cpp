// Serial reference path against the OpenMP path for the hot kernels.
// The second argument of every benchmark selects the path: 0 serial, 1 parallel.

#include <benchmark/benchmark.h>

#include <numbers>
#include <random>

#include "stackopt/basis.hpp"
#include "stackopt/bayes.hpp"
#include "stackopt/kernels.hpp"
#include "stackopt/loocv.hpp"

using namespace stackopt;

namespace {

Dataset sample(Index n) {
  std::mt19937_64 eng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 0.3);
  Matrix x(n, 1);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = u(eng);
    y(i) = std::sin(2.0 * std::numbers::pi * x(i, 0)) + z(eng);
  }
  return Dataset(x, y);
}

Exec exec_of(const benchmark::State& s) { return s.range(1) ? Exec::Parallel : Exec::Serial; }

void BM_BandwidthCv(benchmark::State& state) {
  const Dataset d = sample(state.range(0));
  const auto grid = default_bandwidth_grid(d.x());
  for (auto _ : state) benchmark::DoNotOptimize(select_bandwidth_cv(d, grid, exec_of(state)));
}

void BM_NwEvaluate(benchmark::State& state) {
  const Dataset d = sample(state.range(0));
  const RegressionFn f = nw_fit(d, 0.1);
  const Matrix q = sample(4 * state.range(0)).x();
  for (auto _ : state) benchmark::DoNotOptimize(f.evaluate(q, exec_of(state)));
}

void BM_SequentialScores(benchmark::State& state) {
  const Dataset d = sample(state.range(0));
  const BasisSet b = generate_orthonormal_basis(d, 8, GeneratorSpec{}, RngPlan(2));
  const PermutationPlan p = PermutationPlan::draw(d.n(), 5, RngPlan(3));
  for (auto _ : state) benchmark::DoNotOptimize(sequential_scores(d, b, p, 0.1, exec_of(state)));
}

void BM_LeaveKOut(benchmark::State& state) {
  const Dataset d = sample(state.range(0));
  const Fitter nw = [](const Matrix& xt, const Vector& yt, const Matrix& xq) {
    return nw_fit(xt, yt, 0.1).evaluate(xq, Exec::Serial);
  };
  for (auto _ : state) benchmark::DoNotOptimize(loo_refit(nw, d, 1, RngPlan(4), exec_of(state)));
}

void BM_ConvergenceExperiment(benchmark::State& state) {
  const ModelMixture mix({GaussianLinearModel::polynomial(1, 1.0, 0.25),
                          GaussianLinearModel::polynomial(3, 1.0, 0.25)});
  const TruthGenerator truth{[](double x) { return std::sin(2.0 * x); }, 0.5};
  const std::vector<Index> ns{state.range(0)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(convergence_experiment(truth, mix, mix.pi, LossKind::Squared,
                                                    PredictorKind::Bayes, ns, 20, RngPlan(5),
                                                    exec_of(state)));
  }
}

}  // namespace

BENCHMARK(BM_BandwidthCv)->ArgsProduct({{250, 1000}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NwEvaluate)->ArgsProduct({{250, 1000}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SequentialScores)->ArgsProduct({{250, 500}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LeaveKOut)->ArgsProduct({{200}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvergenceExperiment)->ArgsProduct({{200, 800}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
