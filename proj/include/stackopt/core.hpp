#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "stackopt/errors.hpp"

namespace stackopt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Design points x (n×d) and responses y (n). Immutable once built.
///
/// Construction rejects n < 2, d < 1, mismatched row counts and any
/// non-finite entry.
class Dataset {
 public:
  Dataset(Matrix x, Vector y);

  const Matrix& x() const noexcept { return x_; }
  const Vector& y() const noexcept { return y_; }
  Index n() const noexcept { return y_.size(); }
  Index d() const noexcept { return x_.cols(); }

  /// Rows picked in the given order; repeats are allowed (bootstrap).
  Dataset rows(std::span<const Index> idx) const;

 private:
  Matrix x_;
  Vector y_;
};

/// Held-out predictions: entry (i, j) is model j's prediction at x_i from a
/// fit that did not see point i. k records the leave-k-out order used.
class LooMatrix {
 public:
  explicit LooMatrix(Matrix preds, int k = 1);

  const Matrix& preds() const noexcept { return preds_; }
  Index n() const noexcept { return preds_.rows(); }
  Index J() const noexcept { return preds_.cols(); }
  int k() const noexcept { return k_; }

 private:
  Matrix preds_;
  int k_;
};

/// Either no constraint on the weights or sum(w) == m with m finite and nonzero.
class ConstraintSpec {
 public:
  static ConstraintSpec unconstrained() { return ConstraintSpec{}; }
  static ConstraintSpec sum_to(double m);

  bool is_sum_to() const noexcept { return m_.has_value(); }
  double m() const;  // throws InvalidArgument when unconstrained

  friend bool operator==(const ConstraintSpec&, const ConstraintSpec&) = default;

 private:
  std::optional<double> m_;
};

struct WeightSolution {
  Vector w;
  ConstraintSpec constraint;
  double q = 0.0;  // stacking error achieved by w
};

/// Sum over i of (y_i - sum_j w_j preds(i, j))^2.
double stacking_error(const LooMatrix& loo, const Vector& y, const Vector& w);
double stacking_error(const Matrix& preds, const Vector& y, const Vector& w);

/// (1/n) sum_i g_i h_i.
double empirical_inner_product(const Vector& g, const Vector& h);

bool all_finite(const Matrix& m);

}  // namespace stackopt
