#pragma once

#include <optional>

#include "stackopt/core.hpp"

namespace stackopt {

/// Quantities shared by the closed-form weight solutions.
///
///   T(l, j)    = sum_i preds(i, l) preds(i, j)
///   c(j)       = sum_i y_i preds(i, j)
///   U(l, j)    = sum_i (y_i/m - preds(i, j)) preds(i, l) - sum_i (y_i - preds(i, j)) y_i
///   ehat(i, j) = y_i - preds(i, j)
///
/// U is only filled when a sum target m is supplied. Its row index l runs
/// over the stationarity conditions and its column index j over the weights,
/// so U w is proportional to the ones vector at the constrained optimum.
struct SolverMatrices {
  Matrix T;
  Vector c;
  Matrix U;
  Matrix ehat;
  Vector ones;
};

SolverMatrices solver_matrices(const LooMatrix& loo, const Vector& y,
                               std::optional<double> m = std::nullopt);

/// w = T^{-1} c, the unconstrained minimizer of the stacking error.
WeightSolution solve_unconstrained(const LooMatrix& loo, const Vector& y);

/// Minimizer subject to sum(w) = m: v = U^{-1} 1, then w = (m / sum v) v.
/// The result is checked against kkt_oracle before it is returned.
WeightSolution solve_sum_to_m(const LooMatrix& loo, const Vector& y, double m);

/// Minimizer subject to sum(w) = 1 via (ehat' ehat)^{-1} 1, rescaled.
WeightSolution solve_sum_to_one(const LooMatrix& loo, const Vector& y);

/// Independent equality-constrained least squares. With m it solves the
/// bordered system [2T 1; 1' 0][w; lambda] = [2c; m]; without m it solves
/// min ||y - preds w|| by Householder QR on preds directly.
WeightSolution kkt_oracle(const LooMatrix& loo, const Vector& y,
                          std::optional<double> m = std::nullopt);

/// Unconstrained weights for function evaluations under the empirical inner
/// product. The 1/n factors cancel, so this is solve_unconstrained on evals.
WeightSolution solve_in_hilbert(const Matrix& evals, const Vector& y);

/// |a_j - b_j| <= tol * max(1, max|b|) for every j.
bool weights_agree(const Vector& a, const Vector& b, double tol);

}  // namespace stackopt
