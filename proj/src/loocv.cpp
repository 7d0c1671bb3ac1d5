#include "stackopt/loocv.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "stackopt/linalg.hpp"

namespace stackopt {

LinearModelFit fit_linear(const Matrix& design, const Vector& y) {
  const Index n = design.rows();
  const Index p = design.cols();
  if (y.size() != n) throw DimensionError("rows: design and y lengths differ");
  if (p < 1) throw InvalidArgument("design has no columns");
  if (n <= p) {
    throw InvalidArgument("fit_linear needs n > p (n=" + std::to_string(n) +
                          ", p=" + std::to_string(p) + ")");
  }
  if (!design.allFinite() || !y.allFinite()) throw InvalidArgument("non-finite regression input");
  const double rcond = reciprocal_condition(design);
  if (!(rcond * rcond >= kSingularRcond)) {
    throw SingularSystem("design matrix is rank deficient", rcond * rcond);
  }

  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  LinearModelFit fit;
  fit.design = design;
  fit.coef = qr.solve(y);
  fit.fitted = design * fit.coef;
  fit.residuals = y - fit.fitted;
  const Matrix q = qr.householderQ() * Matrix::Identity(n, p);
  fit.leverages = q.rowwise().squaredNorm().cwiseMin(1.0).cwiseMax(0.0);
  return fit;
}

Vector loo_linear(const LinearModelFit& fit, const Vector& y) {
  if (y.size() != fit.residuals.size()) throw DimensionError("rows: fit and y lengths differ");
  Vector out(y.size());
  for (Index i = 0; i < y.size(); ++i) {
    const double h = fit.leverages(i);
    if (!(h < 1.0 - 1e-10)) {
      throw NumericalError("row " + std::to_string(i) +
                           " has leverage 1; it determines its own fit");
    }
    out(i) = y(i) - fit.residuals(i) / (1.0 - h);
  }
  return out;
}

FoldSchedule make_fold_schedule(Index n, int k, const RngPlan& plan) {
  if (k < 1) throw InvalidArgument("k must be positive");
  if (k >= n) {
    throw InvalidArgument("leave-k-out needs k < n (k=" + std::to_string(k) +
                          ", n=" + std::to_string(n) + ")");
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  if (k > 1) {
    auto eng = plan.stream("folds", {static_cast<std::uint64_t>(k)});
    std::shuffle(order.begin(), order.end(), eng);
  }
  FoldSchedule folds;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(k)) {
    const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(k));
    folds.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                       order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return folds;
}

Vector loo_refit(const Fitter& fitter, const Dataset& data, const FoldSchedule& folds,
                 Exec exec) {
  const Index n = data.n();
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (const auto& fold : folds) {
    for (Index i : fold) {
      if (i < 0 || i >= n || seen[static_cast<std::size_t>(i)]) {
        throw InvalidArgument("fold schedule is not a partition of the data rows");
      }
      seen[static_cast<std::size_t>(i)] = 1;
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw InvalidArgument("fold schedule does not cover every row");
  }

  Vector out(n);
  for_each_index(exec, static_cast<std::ptrdiff_t>(folds.size()), [&](std::ptrdiff_t f) {
    const auto& held = folds[static_cast<std::size_t>(f)];
    std::vector<char> out_mask(static_cast<std::size_t>(n), 0);
    for (Index i : held) out_mask[static_cast<std::size_t>(i)] = 1;
    const Index n_train = n - static_cast<Index>(held.size());
    Matrix xt(n_train, data.d());
    Vector yt(n_train);
    Index r = 0;
    for (Index i = 0; i < n; ++i) {
      if (out_mask[static_cast<std::size_t>(i)]) continue;
      xt.row(r) = data.x().row(i);
      yt(r) = data.y()(i);
      ++r;
    }
    Matrix xq(static_cast<Index>(held.size()), data.d());
    for (std::size_t h = 0; h < held.size(); ++h) xq.row(static_cast<Index>(h)) = data.x().row(held[h]);
    Vector pred;
    try {
      pred = fitter(xt, yt, xq);
    } catch (const Error& e) {
      throw Error(e.kind(), "fold " + std::to_string(f) + ": " + e.what());
    }
    if (pred.size() != static_cast<Index>(held.size())) {
      throw DimensionError("fold " + std::to_string(f) + ": fitter returned wrong length");
    }
    for (std::size_t h = 0; h < held.size(); ++h) out(held[h]) = pred(static_cast<Index>(h));
  });
  return out;
}

Vector loo_refit(const Fitter& fitter, const Dataset& data, int k, const RngPlan& plan,
                 Exec exec) {
  return loo_refit(fitter, data, make_fold_schedule(data.n(), k, plan), exec);
}

LooMatrix assemble_loo_matrix(std::span<const Vector> columns, int k) {
  if (columns.empty()) throw InvalidArgument("no held-out prediction columns (J = 0)");
  const Index n = columns.front().size();
  Matrix preds(n, static_cast<Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j].size() != n) {
      throw DimensionError("rows: column " + std::to_string(j) + " has length " +
                           std::to_string(columns[j].size()) + ", expected " +
                           std::to_string(n));
    }
    preds.col(static_cast<Index>(j)) = columns[j];
  }
  return LooMatrix(std::move(preds), k);
}

Fitter linear_fitter(std::function<Matrix(const Matrix&)> design_map) {
  return [map = std::move(design_map)](const Matrix& xt, const Vector& yt, const Matrix& xq) {
    const LinearModelFit fit = fit_linear(map(xt), yt);
    return Vector(map(xq) * fit.coef);
  };
}

}  // namespace stackopt
