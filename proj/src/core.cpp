#include "stackopt/core.hpp"

#include <cmath>
#include <string>

namespace stackopt {

bool all_finite(const Matrix& m) { return m.allFinite(); }

Dataset::Dataset(Matrix x, Vector y) : x_(std::move(x)), y_(std::move(y)) {
  if (x_.rows() != y_.size()) {
    throw DimensionError("dataset rows: x has " + std::to_string(x_.rows()) +
                         " rows but y has " + std::to_string(y_.size()));
  }
  if (y_.size() < 2) throw InvalidArgument("dataset needs n >= 2 observations");
  if (x_.cols() < 1) throw InvalidArgument("dataset needs d >= 1 explanatory columns");
  if (!x_.allFinite() || !y_.allFinite()) {
    throw InvalidArgument("dataset contains non-finite values");
  }
}

Dataset Dataset::rows(std::span<const Index> idx) const {
  Matrix xs(static_cast<Index>(idx.size()), d());
  Vector ys(static_cast<Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const Index i = idx[r];
    if (i < 0 || i >= n()) throw DimensionError("dataset rows: index out of range");
    xs.row(static_cast<Index>(r)) = x_.row(i);
    ys(static_cast<Index>(r)) = y_(i);
  }
  return Dataset(std::move(xs), std::move(ys));
}

LooMatrix::LooMatrix(Matrix preds, int k) : preds_(std::move(preds)), k_(k) {
  if (preds_.cols() < 1) throw InvalidArgument("LooMatrix needs at least one column");
  if (preds_.rows() < 1) throw InvalidArgument("LooMatrix needs at least one row");
  if (k_ < 1) throw InvalidArgument("leave-k-out order must be positive");
  if (!preds_.allFinite()) throw InvalidArgument("LooMatrix contains non-finite entries");
}

ConstraintSpec ConstraintSpec::sum_to(double m) {
  if (!std::isfinite(m)) throw InvalidArgument("m must be finite");
  if (m == 0.0) throw InvalidArgument("m must be nonzero");
  ConstraintSpec c;
  c.m_ = m;
  return c;
}

double ConstraintSpec::m() const {
  if (!m_) throw InvalidArgument("constraint has no sum target");
  return *m_;
}

double stacking_error(const Matrix& preds, const Vector& y, const Vector& w) {
  if (preds.rows() != y.size()) {
    throw DimensionError("rows: predictions have " + std::to_string(preds.rows()) +
                         " rows but y has " + std::to_string(y.size()));
  }
  if (preds.cols() != w.size()) {
    throw DimensionError("columns: predictions have " + std::to_string(preds.cols()) +
                         " columns but w has " + std::to_string(w.size()));
  }
  return (y - preds * w).squaredNorm();
}

double stacking_error(const LooMatrix& loo, const Vector& y, const Vector& w) {
  return stacking_error(loo.preds(), y, w);
}

double empirical_inner_product(const Vector& g, const Vector& h) {
  if (g.size() != h.size()) throw DimensionError("inner product: length mismatch");
  if (g.size() == 0) throw InvalidArgument("inner product: empty vectors");
  return g.dot(h) / static_cast<double>(g.size());
}

}  // namespace stackopt
