#include <doctest.h>

#include <atomic>
#include <set>

#include "stackopt/core.hpp"
#include "stackopt/errors.hpp"
#include "stackopt/parallel.hpp"
#include "stackopt/rng.hpp"

using namespace stackopt;

TEST_CASE("dataset validates shape and values") {
  Matrix x(3, 1);
  x << 0, 1, 2;
  Vector y(3);
  y << 1, 2, 3;
  CHECK_NOTHROW(Dataset(x, y));
  CHECK_THROWS_AS(Dataset(x, Vector(2)), DimensionError);
  CHECK_THROWS_AS(Dataset(Matrix(1, 1), Vector(1)), InvalidArgument);
  CHECK_THROWS_AS(Dataset(Matrix(3, 0), y), InvalidArgument);
  Vector bad = y;
  bad(1) = std::nan("");
  CHECK_THROWS_AS(Dataset(x, bad), InvalidArgument);

  const Dataset d(x, y);
  const std::vector<Index> idx{2, 2, 0};
  const Dataset r = d.rows(idx);
  CHECK(r.n() == 3);
  CHECK(r.y()(0) == 3);
  CHECK(r.y()(1) == 3);
  CHECK(r.x()(2, 0) == 0);
}

TEST_CASE("loo matrix and constraint validation") {
  CHECK_THROWS_AS(LooMatrix(Matrix(3, 0)), InvalidArgument);
  CHECK_THROWS_AS(LooMatrix(Matrix::Zero(3, 2), 0), InvalidArgument);
  Matrix p = Matrix::Zero(3, 2);
  p(0, 0) = INFINITY;
  CHECK_THROWS_AS(LooMatrix{p}, InvalidArgument);

  CHECK_FALSE(ConstraintSpec::unconstrained().is_sum_to());
  CHECK(ConstraintSpec::sum_to(2.0).m() == 2.0);
  CHECK_THROWS_WITH_AS(ConstraintSpec::sum_to(0.0), "m must be nonzero", InvalidArgument);
  CHECK_THROWS_AS(ConstraintSpec::sum_to(NAN), InvalidArgument);
  CHECK_THROWS_AS(ConstraintSpec::unconstrained().m(), InvalidArgument);
  CHECK(ConstraintSpec::sum_to(1.5) == ConstraintSpec::sum_to(1.5));
}

TEST_CASE("stacking error by hand") {
  Matrix p(2, 2);
  p << 1, 0, 0, 1;
  Vector y(2), w(2);
  y << 1, 2;
  w << 1, 1;
  CHECK(stacking_error(p, y, w) == doctest::Approx(1.0));
  w << 0.5, 2;
  CHECK(stacking_error(LooMatrix(p), y, w) == doctest::Approx(0.25));
  CHECK_THROWS_WITH_AS(stacking_error(p, Vector(3), w), doctest::Contains("rows"), DimensionError);
  CHECK_THROWS_WITH_AS(stacking_error(p, y, Vector(3)), doctest::Contains("columns"),
                       DimensionError);
}

TEST_CASE("empirical inner product") {
  Vector g(2), h(2);
  g << 1, 0;
  h << 0, 1;
  CHECK(empirical_inner_product(g, h) == 0.0);
  CHECK(empirical_inner_product(g, g) == doctest::Approx(0.5));

  std::mt19937_64 eng(3);
  std::normal_distribution<double> z;
  for (int t = 0; t < 20; ++t) {
    Vector a(7), b(7), c(7);
    for (Index i = 0; i < 7; ++i) {
      a(i) = z(eng);
      b(i) = z(eng);
      c(i) = z(eng);
    }
    const double s = z(eng);
    const double lhs = empirical_inner_product(a, s * b + c);
    const double rhs = s * empirical_inner_product(a, b) + empirical_inner_product(a, c);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
    CHECK(empirical_inner_product(a, b) == doctest::Approx(empirical_inner_product(b, a)));
  }
}

TEST_CASE("rng streams are keyed by label and index only") {
  const RngPlan plan(42);
  auto a = plan.stream("x", {1, 2});
  auto b = plan.stream("x", {1, 2});
  CHECK(a() == b());
  std::set<std::uint64_t> firsts;
  firsts.insert(plan.stream("x", {1, 2})());
  firsts.insert(plan.stream("x", {2, 1})());
  firsts.insert(plan.stream("y", {1, 2})());
  firsts.insert(plan.stream("x", {1})());
  firsts.insert(RngPlan(43).stream("x", {1, 2})());
  firsts.insert(plan.child("x", {1}).stream("x", {1, 2})());
  CHECK(firsts.size() == 6);
}

TEST_CASE("for_each_index visits every index and rethrows the lowest failure") {
  for (Exec e : {Exec::Serial, Exec::Parallel}) {
    std::vector<int> hits(100, 0);
    for_each_index(e, 100, [&](std::ptrdiff_t i) { hits[static_cast<std::size_t>(i)]++; });
    CHECK(std::count(hits.begin(), hits.end(), 1) == 100);

    set_threads(4);
    std::atomic<int> ran{0};
    try {
      for_each_index(e, 50, [&](std::ptrdiff_t i) {
        ++ran;
        if (i == 7 || i == 31) throw InvalidArgument("index " + std::to_string(i));
      });
      FAIL("expected an exception");
    } catch (const InvalidArgument& err) {
      CHECK(std::string(err.what()) == "index 7");
    }
    set_threads(1);
  }
}
