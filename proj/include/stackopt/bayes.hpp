#pragma once

#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "stackopt/core.hpp"
#include "stackopt/parallel.hpp"
#include "stackopt/rng.hpp"

namespace stackopt {

/// Maps one design point to its regressor vector.
using FeatureMap = std::function<Vector(const Eigen::Ref<const Vector>& x)>;

/// Conjugate Gaussian linear model y = phi(x)' beta + N(0, sigma2) with prior
/// beta ~ N(0, tau2 I) and known noise variance.
class GaussianLinearModel {
 public:
  GaussianLinearModel(FeatureMap phi, Index p, double tau2, double sigma2);

  /// 1-D polynomial regressors (1, x, ..., x^degree).
  static GaussianLinearModel polynomial(int degree, double tau2, double sigma2);

  Index p() const noexcept { return p_; }
  double tau2() const noexcept { return tau2_; }
  double sigma2() const noexcept { return sigma2_; }
  Vector features(const Eigen::Ref<const Vector>& x) const;
  Matrix design(const Matrix& x) const;

 private:
  FeatureMap phi_;
  Index p_;
  double tau2_;
  double sigma2_;
};

struct Predictive {
  double mean = 0.0;
  double var = 0.0;
};

/// Posterior predictive at x_new given (x, y); x may have zero rows.
Predictive posterior_predictive(const GaussianLinearModel& model, const Matrix& x,
                                const Vector& y, const Vector& x_new);
Predictive posterior_predictive(const GaussianLinearModel& model, const Dataset& data,
                                const Vector& x_new);

/// Posterior predictive mean.
double bayes_point_predictor(const GaussianLinearModel& model, const Matrix& x, const Vector& y,
                             const Vector& x_new);

/// phi(x_new)' beta_hat with beta_hat the least-squares estimate. Needs n > p.
double plugin_point_predictor(const GaussianLinearModel& model, const Matrix& x, const Vector& y,
                              const Vector& x_new);

/// Component models with fixed convex weights pi.
struct ModelMixture {
  std::vector<GaussianLinearModel> models;
  Vector pi;

  ModelMixture(std::vector<GaussianLinearModel> models, Vector pi);
  /// Uniform pi.
  explicit ModelMixture(std::vector<GaussianLinearModel> models);
  Index J() const noexcept { return static_cast<Index>(models.size()); }
};

/// Finite Gaussian mixture sum_j weights_j N(means_j, vars_j). Weights may be
/// any reals; log_pdf throws where the mixture is not positive.
struct GaussianMixtureDensity {
  Vector weights;
  Vector means;
  Vector vars;

  double pdf(double t) const;
  double log_pdf(double t) const;
  double cdf(double t) const;  // convex weights only
  double mean() const;
};

/// Predictive mixture sum_j pi_j N(mu_j, s_j^2) at x_new.
GaussianMixtureDensity mixture_predictive(const ModelMixture& mixture, const Matrix& x,
                                          const Vector& y, const Vector& x_new);

/// Quantile of a convex mixture by bisection on its CDF.
double mixture_quantile(const GaussianMixtureDensity& mix, double prob);

enum class LossKind { Squared, Absolute, LogUtility };
enum class PredictorKind { Bayes, PlugIn };

/// A point prediction (squared / absolute loss) or a predictive density
/// (log-utility).
using Action = std::variant<double, GaussianMixtureDensity>;

/// Expected loss of the action under the predictive mixture. LogUtility
/// reports negative expected log-utility, integrated by adaptive
/// Gauss-Kronrod quadrature over the components' mean +/- 10 sd envelope.
double posterior_risk(const GaussianMixtureDensity& predictive, const Action& action,
                      LossKind loss);
double posterior_risk(const ModelMixture& mixture, const Matrix& x, const Vector& y,
                      const Vector& x_new, const Action& action, LossKind loss);

/// The stacked action sum_j w_j (prediction or density of model j) at x_new.
Action stacked_action(const ModelMixture& mixture, const Matrix& x, const Vector& y,
                      const Vector& x_new, const Vector& w, LossKind loss,
                      PredictorKind predictor);

/// (1/n) sum_i loss(y_i, a(y_{-i})) with every component refit without point i.
double cv_risk(const ModelMixture& mixture, const Dataset& data, const Vector& w, LossKind loss,
               PredictorKind predictor);

/// 1-D data generator: x ~ U[lo, hi], y = mean(x) + N(0, noise_sd^2).
struct TruthGenerator {
  std::function<double(double)> mean;
  double noise_sd = 1.0;
  double lo = -1.0;
  double hi = 1.0;
};

struct GapReport {
  std::vector<Index> n_values;
  std::vector<std::vector<double>> gaps;  // gaps[n index][replicate]
  std::vector<double> median;
  std::vector<double> p90;
  std::vector<double> rms;
};

/// For each n and replicate (stream "sim", n, rep): simulate data, draw a
/// fresh x_new, and record |posterior_risk(a) - cv_risk(a)| for the fixed
/// weights w. LogUtility requires convex w.
GapReport convergence_experiment(const TruthGenerator& truth, const ModelMixture& mixture,
                                 const Vector& w, LossKind loss, PredictorKind predictor,
                                 std::span<const Index> n_grid, int reps, const RngPlan& plan,
                                 Exec exec = Exec::Parallel);

}  // namespace stackopt
