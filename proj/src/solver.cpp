#include "stackopt/solver.hpp"

#include <cmath>
#include <string>

#include "stackopt/linalg.hpp"

namespace stackopt {
namespace {

constexpr double kOracleAgreement = 1e-8;

void check_inputs(const LooMatrix& loo, const Vector& y) {
  if (loo.n() != y.size()) {
    throw DimensionError("rows: LooMatrix has " + std::to_string(loo.n()) +
                         " rows but y has " + std::to_string(y.size()));
  }
  if (!y.allFinite()) throw InvalidArgument("y contains non-finite values");
  if (loo.n() < loo.J()) {
    throw InvalidArgument("need n >= J (n=" + std::to_string(loo.n()) +
                          ", J=" + std::to_string(loo.J()) + ")");
  }
}

WeightSolution finish(const LooMatrix& loo, const Vector& y, Vector w, ConstraintSpec c) {
  WeightSolution s;
  s.q = stacking_error(loo, y, w);
  s.w = std::move(w);
  s.constraint = c;
  return s;
}

Vector rescale_to_sum(const Vector& v, double m, const char* what) {
  const double total = v.sum();
  if (!(std::abs(total) > 1e-14 * v.lpNorm<1>())) {
    throw NumericalError(std::string(what) + ": weights sum to zero, rescale undefined");
  }
  return (m / total) * v;
}

}  // namespace

bool weights_agree(const Vector& a, const Vector& b, double tol) {
  if (a.size() != b.size()) return false;
  const double scale = std::max(1.0, b.size() ? b.cwiseAbs().maxCoeff() : 0.0);
  return ((a - b).cwiseAbs().array() <= tol * scale).all();
}

SolverMatrices solver_matrices(const LooMatrix& loo, const Vector& y, std::optional<double> m) {
  if (loo.n() != y.size()) throw DimensionError("rows: LooMatrix and y lengths differ");
  const Matrix& p = loo.preds();
  const Index J = loo.J();
  SolverMatrices s;
  s.T = p.transpose() * p;
  s.c = p.transpose() * y;
  s.ehat = (-p).colwise() + y;
  s.ones = Vector::Ones(J);
  if (m) {
    if (*m == 0.0 || !std::isfinite(*m)) throw InvalidArgument("m must be nonzero");
    // sum_i (y_i - preds(i, j)) y_i, one value per weight j.
    const Vector resid_dot_y = s.ehat.transpose() * y;
    s.U.resize(J, J);
    for (Index l = 0; l < J; ++l) {
      for (Index j = 0; j < J; ++j) {
        s.U(l, j) = s.c(l) / *m - s.T(l, j) - resid_dot_y(j);
      }
    }
  }
  return s;
}

WeightSolution solve_unconstrained(const LooMatrix& loo, const Vector& y) {
  check_inputs(loo, y);
  const SolverMatrices s = solver_matrices(loo, y);
  Vector w = solve_checked(s.T, s.c, "T (predictor cross-product matrix)");
  return finish(loo, y, std::move(w), ConstraintSpec::unconstrained());
}

WeightSolution solve_sum_to_m(const LooMatrix& loo, const Vector& y, double m) {
  if (m == 0.0) throw InvalidArgument("m must be nonzero");
  const ConstraintSpec constraint = ConstraintSpec::sum_to(m);
  check_inputs(loo, y);
  const SolverMatrices s = solver_matrices(loo, y, m);
  const Vector v = solve_checked(s.U, s.ones, "U (sum-to-m system)");
  Vector w = rescale_to_sum(v, m, "sum-to-m");

  const WeightSolution oracle = kkt_oracle(loo, y, m);
  if (!weights_agree(w, oracle.w, kOracleAgreement)) {
    throw NumericalError("sum-to-m closed form disagrees with the KKT solution beyond 1e-8");
  }
  return finish(loo, y, std::move(w), constraint);
}

WeightSolution solve_sum_to_one(const LooMatrix& loo, const Vector& y) {
  check_inputs(loo, y);
  const SolverMatrices s = solver_matrices(loo, y);
  const Matrix ete = s.ehat.transpose() * s.ehat;
  const Vector v = solve_checked(ete, s.ones, "ehat'ehat (residual cross-product)");
  Vector w = rescale_to_sum(v, 1.0, "sum-to-one");
  return finish(loo, y, std::move(w), ConstraintSpec::sum_to(1.0));
}

WeightSolution kkt_oracle(const LooMatrix& loo, const Vector& y, std::optional<double> m) {
  check_inputs(loo, y);
  const Matrix& p = loo.preds();
  const Index J = loo.J();
  if (!m) {
    const double rcond = reciprocal_condition(p);
    if (!(rcond * rcond >= kSingularRcond)) {
      throw SingularSystem("oracle least-squares design", rcond * rcond);
    }
    Vector w = p.householderQr().solve(y);
    return finish(loo, y, std::move(w), ConstraintSpec::unconstrained());
  }
  const ConstraintSpec constraint = ConstraintSpec::sum_to(*m);
  Matrix a = Matrix::Zero(J + 1, J + 1);
  a.topLeftCorner(J, J) = 2.0 * (p.transpose() * p);
  a.topRightCorner(J, 1).setOnes();
  a.bottomLeftCorner(1, J).setOnes();
  Vector rhs(J + 1);
  rhs.head(J) = 2.0 * (p.transpose() * y);
  rhs(J) = *m;
  const double rcond = reciprocal_condition(a);
  if (!(rcond >= kSingularRcond)) throw SingularSystem("bordered KKT system", rcond);
  const Vector sol = a.fullPivLu().solve(rhs);
  Vector w = sol.head(J);
  return finish(loo, y, std::move(w), constraint);
}

WeightSolution solve_in_hilbert(const Matrix& evals, const Vector& y) {
  const LooMatrix loo(evals);
  check_inputs(loo, y);
  const double n = static_cast<double>(evals.rows());
  const Matrix gram = (evals.transpose() * evals) / n;
  const Vector proj = (evals.transpose() * y) / n;
  Vector w = solve_checked(gram, proj, "empirical Gram matrix");
  return finish(loo, y, std::move(w), ConstraintSpec::unconstrained());
}

}  // namespace stackopt
