#pragma once

#include <functional>
#include <span>
#include <vector>

#include "stackopt/core.hpp"
#include "stackopt/parallel.hpp"
#include "stackopt/rng.hpp"

namespace stackopt {

/// Ordinary least-squares fit with its hat-matrix diagonal.
struct LinearModelFit {
  Matrix design;
  Vector coef;
  Vector fitted;
  Vector residuals;
  Vector leverages;  // h_ii, each in [0, 1], summing to design.cols()
};

/// QR least squares. Requires n > p and a full-column-rank design whose
/// squared reciprocal condition is at least 1e-12.
LinearModelFit fit_linear(const Matrix& design, const Vector& y);

/// Held-out predictions from the leverage identity y_i - e_i / (1 - h_ii).
Vector loo_linear(const LinearModelFit& fit, const Vector& y);

/// A deterministic fitting procedure: trains on (x, y) and returns
/// predictions at the query rows.
using Fitter = std::function<Vector(const Matrix& x_train, const Vector& y_train,
                                    const Matrix& x_query)>;

/// Disjoint held-out blocks covering 0..n-1 exactly once.
using FoldSchedule = std::vector<std::vector<Index>>;

/// k = 1: every point on its own, in order. k > 1: a permutation drawn from
/// the plan's "folds" stream cut into consecutive blocks of k; the last block
/// holds the remainder.
FoldSchedule make_fold_schedule(Index n, int k, const RngPlan& plan);

/// Refits on the complement of each block and predicts the block's points.
/// Entry i holds the prediction for point i from the fit that excluded it.
Vector loo_refit(const Fitter& fitter, const Dataset& data, const FoldSchedule& folds,
                 Exec exec = Exec::Parallel);
Vector loo_refit(const Fitter& fitter, const Dataset& data, int k, const RngPlan& plan,
                 Exec exec = Exec::Parallel);

/// Column-stacks held-out prediction vectors.
LooMatrix assemble_loo_matrix(std::span<const Vector> columns, int k = 1);

/// Fitter running fit_linear on design_map(x).
Fitter linear_fitter(std::function<Matrix(const Matrix&)> design_map);

}  // namespace stackopt
