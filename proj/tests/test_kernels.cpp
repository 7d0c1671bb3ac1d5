#include <doctest.h>

#include "oracles.hpp"
#include "stackopt/errors.hpp"
#include "stackopt/kernels.hpp"
#include "support.hpp"

using namespace stackopt;

namespace {

Matrix column(std::initializer_list<double> v) {
  Matrix m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST_CASE("standardizer uses the sample standard deviation") {
  const Matrix x = column({1, 2, 3, 4});
  const Standardizer s = Standardizer::fit(x);
  CHECK(s.mean(0) == doctest::Approx(2.5));
  CHECK(s.scale(0) == doctest::Approx(std::sqrt(5.0 / 3.0)));
  const Standardizer flat = Standardizer::fit(column({2, 2, 2}));
  CHECK(flat.scale(0) == 1.0);
  CHECK_THROWS_AS(s.apply(Matrix(2, 2)), DimensionError);
}

TEST_CASE("nadaraya-watson matches a direct evaluation") {
  std::mt19937_64 eng(31);
  const Matrix x = testing_support::gaussian_matrix(40, 2, eng);
  const Vector y = testing_support::gaussian_vector(40, eng);
  const Matrix q = testing_support::gaussian_matrix(15, 2, eng);
  for (double lam : {0.2, 0.7, 3.0}) {
    const RegressionFn f = nw_fit(x, y, lam);
    const Vector got = f.evaluate(q);
    for (Index i = 0; i < q.rows(); ++i) {
      CHECK(got(i) == doctest::Approx(oracle::nw(x, y, lam, q.row(i).transpose())).epsilon(1e-12));
      CHECK(got(i) == f(q.row(i).transpose()));
    }
    CHECK(f.evaluate(q, Exec::Serial) == got);
  }
}

TEST_CASE("nadaraya-watson is reflection symmetric") {
  const Matrix x = column({-2, -1, 0, 1, 2});
  Vector y(5);
  y << 1, 3, 0, 3, 1;
  const RegressionFn f = nw_fit(x, y, 0.5);
  for (double t : {0.1, 0.6, 1.3, 2.5}) {
    Vector a(1), b(1);
    a << t;
    b << -t;
    CHECK(f(a) == doctest::Approx(f(b)).epsilon(1e-14));
  }
}

TEST_CASE("all-zero kernel weights fall back to the nearest anchor") {
  const Matrix x = column({0, 1, 2, 3});
  Vector y(4);
  y << 10, 20, 30, 40;
  const RegressionFn f = nw_fit(x, y, 1e-3);
  Vector q(1);
  q << 2.9e3;
  CHECK(f(q) == 40.0);
  q << -5e3;
  CHECK(f(q) == 10.0);
  CHECK_THROWS_AS(nw_fit(x, y, 0.0), InvalidArgument);
  CHECK_THROWS_AS(nw_fit(x, y, -1.0), InvalidArgument);
}

TEST_CASE("bandwidth selection minimizes the leave-one-out error") {
  std::mt19937_64 eng(32);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 0.2);
  Matrix x(60, 1);
  Vector y(60);
  for (Index i = 0; i < 60; ++i) {
    x(i, 0) = u(eng);
    y(i) = std::sin(6.0 * x(i, 0)) + z(eng);
  }
  const std::vector<double> grid = default_bandwidth_grid(x, 12);
  CHECK(grid.size() == 12);
  CHECK(grid.back() / grid.front() == doctest::Approx(1000.0));
  double best = grid.front(), best_err = INFINITY;
  for (double g : grid) {
    const double e = oracle::nw_loo_error(x, y, g);
    if (e < best_err) {
      best_err = e;
      best = g;
    }
  }
  CHECK(select_bandwidth_cv(x, y, grid) == best);
  CHECK(select_bandwidth_cv(x, y, grid, Exec::Serial) == best);
}

TEST_CASE("bandwidth ties go to the larger value and degenerate grids are handled") {
  // Constant response: every bandwidth has zero error.
  const Matrix x = column({0, 1, 2, 3, 4});
  const Vector y = Vector::Constant(5, 2.0);
  const std::vector<double> grid{0.5, 1.0, 2.0};
  CHECK(select_bandwidth_cv(x, y, grid) == 2.0);

  // Tiny bandwidths leave held-out points with no weight and are skipped.
  const Matrix far = column({0, 100, 200, 1000});
  Vector yf(4);
  yf << 1, 2, 3, 4;
  const std::vector<double> tiny{1e-4, 1e-3};
  CHECK_THROWS_AS(select_bandwidth_cv(far, yf, tiny), NumericalError);
  const std::vector<double> mixed{1e-4, 50.0};
  CHECK(select_bandwidth_cv(far, yf, mixed) == 50.0);
  CHECK_THROWS_AS(select_bandwidth_cv(x, y, std::vector<double>{}), InvalidArgument);
  CHECK_THROWS_AS(select_bandwidth_cv(x, y, std::vector<double>{1.0, -1.0}), InvalidArgument);
}

TEST_CASE("gp posterior mean matches a dense solve") {
  std::mt19937_64 eng(33);
  const Matrix x = testing_support::gaussian_matrix(30, 2, eng);
  const Vector y = testing_support::gaussian_vector(30, eng);
  const Matrix q = testing_support::gaussian_matrix(10, 2, eng);
  for (double noise : {0.01, 0.5}) {
    const RegressionFn f = gp_fit(x, y, KernelSpec(Rbf{0.8}, noise));
    const Vector want = oracle::gp_rbf(x, y, 0.8, noise, q);
    CHECK((f.evaluate(q) - want).cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, want.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("gp at the noise floor nearly interpolates") {
  const Matrix x = column({0, 1, 2, 3, 4, 5});
  Vector y(6);
  y << 0.3, -1, 2, 0.5, 1, -0.2;
  const RegressionFn f = gp_fit(x, y, KernelSpec(Rbf{0.3}, 0.0));
  CHECK(f.kernel()->noise() == KernelSpec::kNoiseFloor);
  CHECK((f.evaluate(x) - y).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("polynomial kernels") {
  const KernelSpec k(Polynomial{2, 1.0}, 0.1);
  Vector a(2), b(2);
  a << 1, 2;
  b << 3, -1;
  CHECK(k(a, b) == doctest::Approx(4.0));
  std::mt19937_64 eng(34);
  const Matrix x = testing_support::gaussian_matrix(25, 1, eng);
  Vector y(25);
  for (Index i = 0; i < 25; ++i) y(i) = 1.0 + 2.0 * x(i, 0) - x(i, 0) * x(i, 0);
  const RegressionFn f = gp_fit(x, y, KernelSpec(Polynomial{2, 1.0}, 1e-8));
  CHECK((f.evaluate(x) - y).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("kernel spec validation") {
  CHECK_THROWS_AS(KernelSpec(Rbf{0.0}, 0.1), InvalidArgument);
  CHECK_THROWS_AS(KernelSpec(Rbf{1.0}, -0.1), InvalidArgument);
  CHECK_THROWS_AS(KernelSpec(Polynomial{0, 1.0}, 0.1), InvalidArgument);
  CHECK(KernelSpec(Rbf{1.0}, 1e-14).noise() == KernelSpec::kNoiseFloor);
}

TEST_CASE("gaussian weights agree with exp above the underflow point") {
  for (double a : {0.0, -1.0, -700.0, -740.0, -745.0, -746.5, -1e6}) {
    CHECK(gaussian_weight(a) == std::exp(a));
  }
}
