#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "stackopt/core.hpp"
#include "stackopt/parallel.hpp"

namespace stackopt {

/// Per-coordinate centering and scaling learned from training x.
/// Zero-spread coordinates keep scale 1.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
};

struct Rbf {
  double lengthscale = 1.0;
};
struct Polynomial {
  int degree = 2;
  double offset = 1.0;
};

/// GP covariance family plus observation noise variance. Noise below the
/// 1e-10 jitter floor is raised to the floor.
class KernelSpec {
 public:
  static constexpr double kNoiseFloor = 1e-10;

  KernelSpec(std::variant<Rbf, Polynomial> family, double noise);

  const std::variant<Rbf, Polynomial>& family() const noexcept { return family_; }
  double noise() const noexcept { return noise_; }

  double operator()(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) const;

 private:
  std::variant<Rbf, Polynomial> family_;
  double noise_;
};

enum class RegressionKind { NadarayaWatson, GaussianProcess };

/// A fitted nonparametric regression estimate. Immutable; evaluation is pure.
///
/// Inputs are always mapped through the Standardizer captured at fit time,
/// so bandwidths and lengthscales are in standardized units.
class RegressionFn {
 public:
  RegressionKind kind() const noexcept { return kind_; }
  const Matrix& anchors_x() const noexcept { return x_; }
  const Vector& anchors_y() const noexcept { return y_; }
  const Standardizer& standardizer() const noexcept { return std_; }
  double bandwidth() const noexcept { return bandwidth_; }  // NW only
  const std::optional<KernelSpec>& kernel() const noexcept { return kernel_; }

  double operator()(const Eigen::Ref<const Vector>& x) const;

  /// One prediction per row of xq.
  Vector evaluate(const Matrix& xq, Exec exec = Exec::Parallel) const;

 private:
  friend RegressionFn nw_fit(const Matrix&, const Vector&, double, std::optional<Standardizer>);
  friend RegressionFn gp_fit(const Matrix&, const Vector&, const KernelSpec&,
                             std::optional<Standardizer>);

  double eval_standardized(const Eigen::Ref<const Vector>& z) const;

  RegressionKind kind_ = RegressionKind::NadarayaWatson;
  Matrix x_;
  Vector y_;
  Standardizer std_;
  Matrix z_;  // standardized anchors
  double bandwidth_ = 0.0;
  std::optional<KernelSpec> kernel_;
  Vector alpha_;  // GP: (K + noise I)^{-1} y
};

/// Gaussian-kernel Nadaraya-Watson estimate with bandwidth lambda > 0. When
/// every kernel weight underflows, the nearest anchor's y is returned.
RegressionFn nw_fit(const Matrix& x, const Vector& y, double lambda,
                    std::optional<Standardizer> standardizer = std::nullopt);
RegressionFn nw_fit(const Dataset& data, double lambda);

/// Grid value with the smallest leave-one-out squared error of nw_fit; exact
/// ties go to the larger bandwidth. A grid value is skipped when some
/// held-out prediction has an all-zero kernel denominator.
double select_bandwidth_cv(const Matrix& x, const Vector& y, std::span<const double> grid,
                           Exec exec = Exec::Parallel,
                           std::optional<Standardizer> standardizer = std::nullopt);
double select_bandwidth_cv(const Dataset& data, std::span<const double> grid,
                           Exec exec = Exec::Parallel);

/// exp(a) that returns 0 without calling exp below the underflow point,
/// where exp would round to 0 anyway.
inline double gaussian_weight(double a) {
  return a < -746.0 ? 0.0 : std::exp(a);
}

/// Elementwise gaussian_weight(c * d2).
Eigen::ArrayXd gaussian_weights(double c, const Eigen::ArrayXd& d2);

/// count log-spaced values over [0.01, 10] times the median pairwise distance
/// of the standardized anchors.
std::vector<double> default_bandwidth_grid(const Matrix& x, int count = 25,
                                           std::optional<Standardizer> standardizer = std::nullopt);

/// GP posterior mean k(x)' (K + noise I)^{-1} y with zero prior mean. Jitter
/// is added in decades from 1e-10 up to 1e-6 if the Cholesky factorization fails.
RegressionFn gp_fit(const Matrix& x, const Vector& y, const KernelSpec& spec,
                    std::optional<Standardizer> standardizer = std::nullopt);
RegressionFn gp_fit(const Dataset& data, const KernelSpec& spec);

}  // namespace stackopt
