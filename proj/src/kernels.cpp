#include "stackopt/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace stackopt {
namespace {

Matrix pairwise_sq_dist(const Matrix& z) {
  const Index n = z.rows();
  Matrix d(n, n);
  for (Index j = 0; j < n; ++j) d.col(j) = (z.rowwise() - z.row(j)).rowwise().squaredNorm();
  return d;
}

}  // namespace

Eigen::ArrayXd gaussian_weights(double c, const Eigen::ArrayXd& d2) {
  return d2.unaryExpr([c](double v) { return gaussian_weight(c * v); });
}

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  const Index n = x.rows();
  s.mean = n > 0 ? Vector(x.colwise().mean().transpose()) : Vector::Zero(x.cols());
  s.scale = Vector::Ones(x.cols());
  if (n >= 2) {
    for (Index c = 0; c < x.cols(); ++c) {
      const double var = (x.col(c).array() - s.mean(c)).square().sum() / static_cast<double>(n - 1);
      const double sd = std::sqrt(var);
      if (sd > 0.0 && std::isfinite(sd)) s.scale(c) = sd;
    }
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  if (x.cols() != mean.size()) throw DimensionError("columns: standardizer dimension mismatch");
  return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

KernelSpec::KernelSpec(std::variant<Rbf, Polynomial> family, double noise)
    : family_(family), noise_(noise) {
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw InvalidArgument("noise must be >= 0");
  noise_ = std::max(noise, kNoiseFloor);
  if (const auto* r = std::get_if<Rbf>(&family_)) {
    if (!(r->lengthscale > 0.0)) throw InvalidArgument("RBF lengthscale must be positive");
  } else {
    const auto& p = std::get<Polynomial>(family_);
    if (p.degree < 1) throw InvalidArgument("polynomial degree must be >= 1");
  }
}

double KernelSpec::operator()(const Eigen::Ref<const Vector>& a,
                              const Eigen::Ref<const Vector>& b) const {
  if (const auto* r = std::get_if<Rbf>(&family_)) {
    return std::exp(-(a - b).squaredNorm() / (2.0 * r->lengthscale * r->lengthscale));
  }
  const auto& p = std::get<Polynomial>(family_);
  return std::pow(a.dot(b) + p.offset, p.degree);
}

double RegressionFn::operator()(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != x_.cols()) throw DimensionError("columns: query dimension mismatch");
  const Vector z = ((x - std_.mean).array() / std_.scale.array()).matrix();
  return eval_standardized(z);
}

double RegressionFn::eval_standardized(const Eigen::Ref<const Vector>& z) const {
  if (kind_ == RegressionKind::GaussianProcess) {
    double acc = 0.0;
    for (Index i = 0; i < z_.rows(); ++i) acc += (*kernel_)(z_.row(i).transpose(), z) * alpha_(i);
    return acc;
  }
  const Eigen::ArrayXd d2 = (z_.rowwise() - z.transpose()).rowwise().squaredNorm().array();
  const Eigen::ArrayXd w = gaussian_weights(-0.5 / (bandwidth_ * bandwidth_), d2);
  const double den = w.sum();
  if (den > 0.0) return (w * y_.array()).sum() / den;
  Index nearest = 0;
  d2.minCoeff(&nearest);
  return y_(nearest);
}

Vector RegressionFn::evaluate(const Matrix& xq, Exec exec) const {
  if (xq.cols() != x_.cols()) throw DimensionError("columns: query dimension mismatch");
  const Matrix zq = std_.apply(xq);
  Vector out(xq.rows());
  for_each_index(exec, xq.rows(), [&](std::ptrdiff_t i) {
    out(i) = eval_standardized(zq.row(i).transpose());
  });
  return out;
}

RegressionFn nw_fit(const Matrix& x, const Vector& y, double lambda,
                    std::optional<Standardizer> standardizer) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("bandwidth must be positive");
  if (x.rows() < 1) throw InvalidArgument("nw_fit needs at least one anchor");
  if (x.rows() != y.size()) throw DimensionError("rows: x and y lengths differ");
  RegressionFn f;
  f.kind_ = RegressionKind::NadarayaWatson;
  f.x_ = x;
  f.y_ = y;
  f.std_ = standardizer ? *standardizer : Standardizer::fit(x);
  f.z_ = f.std_.apply(x);
  f.bandwidth_ = lambda;
  return f;
}

RegressionFn nw_fit(const Dataset& data, double lambda) { return nw_fit(data.x(), data.y(), lambda); }

std::vector<double> default_bandwidth_grid(const Matrix& x, int count,
                                           std::optional<Standardizer> standardizer) {
  if (count < 1) throw InvalidArgument("bandwidth grid needs at least one point");
  const Standardizer s = standardizer ? *standardizer : Standardizer::fit(x);
  const Matrix z = s.apply(x);
  const Index n = z.rows();
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) dists.push_back((z.row(i) - z.row(j)).norm());
  }
  double scale = 1.0;
  if (!dists.empty()) {
    auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    scale = *mid;
    if (!(scale > 0.0)) scale = *std::max_element(dists.begin(), dists.end());
    if (!(scale > 0.0)) scale = 1.0;
  }
  std::vector<double> grid(static_cast<std::size_t>(count));
  const double lo = std::log(0.01), hi = std::log(10.0);
  for (int g = 0; g < count; ++g) {
    const double t = count == 1 ? 0.5 : static_cast<double>(g) / (count - 1);
    grid[static_cast<std::size_t>(g)] = scale * std::exp(lo + t * (hi - lo));
  }
  return grid;
}

double select_bandwidth_cv(const Matrix& x, const Vector& y, std::span<const double> grid,
                           Exec exec, std::optional<Standardizer> standardizer) {
  if (grid.empty()) throw InvalidArgument("bandwidth grid is empty");
  if (x.rows() != y.size()) throw DimensionError("rows: x and y lengths differ");
  for (double g : grid) {
    if (!(g > 0.0)) throw InvalidArgument("bandwidth grid values must be positive");
  }
  if (grid.size() == 1) return grid.front();
  const Standardizer s = standardizer ? *standardizer : Standardizer::fit(x);
  const Matrix d2 = pairwise_sq_dist(s.apply(x));
  const Index n = x.rows();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<double> score(grid.size(), nan);
  for_each_index(exec, static_cast<std::ptrdiff_t>(grid.size()), [&](std::ptrdiff_t g) {
    const double lam = grid[static_cast<std::size_t>(g)];
    const double c = -0.5 / (lam * lam);
    Vector num = Vector::Zero(n), den = Vector::Zero(n);
    for (Index j = 0; j < n; ++j) {
      for (Index i = j + 1; i < n; ++i) {
        const double w = gaussian_weight(c * d2(i, j));
        num(i) += w * y(j);
        den(i) += w;
        num(j) += w * y(i);
        den(j) += w;
      }
    }
    if (!(den.array() > 0.0).all()) return;  // undefined held-out prediction; skip this bandwidth
    const double total = (y.array() - num.array() / den.array()).square().sum();
    score[static_cast<std::size_t>(g)] = total;
  });

  std::optional<std::size_t> best;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (std::isnan(score[g])) continue;
    if (!best || score[g] < score[*best] ||
        (score[g] == score[*best] && grid[g] > grid[*best])) {
      best = g;
    }
  }
  if (!best) throw NumericalError("every bandwidth gives undefined leave-one-out predictions");
  return grid[*best];
}

double select_bandwidth_cv(const Dataset& data, std::span<const double> grid, Exec exec) {
  return select_bandwidth_cv(data.x(), data.y(), grid, exec);
}

RegressionFn gp_fit(const Matrix& x, const Vector& y, const KernelSpec& spec,
                    std::optional<Standardizer> standardizer) {
  if (x.rows() < 1) throw InvalidArgument("gp_fit needs at least one anchor");
  if (x.rows() != y.size()) throw DimensionError("rows: x and y lengths differ");
  RegressionFn f;
  f.kind_ = RegressionKind::GaussianProcess;
  f.x_ = x;
  f.y_ = y;
  f.std_ = standardizer ? *standardizer : Standardizer::fit(x);
  f.z_ = f.std_.apply(x);
  f.kernel_ = spec;
  const Index n = x.rows();
  Matrix k(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) {
      k(i, j) = spec(f.z_.row(i).transpose(), f.z_.row(j).transpose());
      k(j, i) = k(i, j);
    }
  }
  for (double jitter : {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
    Matrix a = k;
    a.diagonal().array() += spec.noise() + jitter;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) {
      f.alpha_ = llt.solve(y);
      if (f.alpha_.allFinite()) return f;
    }
  }
  throw NumericalError("GP Gram matrix is not positive definite after jitter 1e-6");
}

RegressionFn gp_fit(const Dataset& data, const KernelSpec& spec) {
  return gp_fit(data.x(), data.y(), spec);
}

}  // namespace stackopt
