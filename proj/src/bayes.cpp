#include "stackopt/bayes.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "stackopt/linalg.hpp"

namespace stackopt {
namespace {

constexpr double kQuadratureTol = 1e-8;

double normal_pdf(double t, double mean, double var) {
  const double z = t - mean;
  return std::exp(-0.5 * z * z / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

double normal_log_pdf(double t, double mean, double var) {
  const double z = t - mean;
  return -0.5 * z * z / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// E|Z - a| for Z ~ N(mean, var).
double abs_deviation(double a, double mean, double var) {
  const double s = std::sqrt(var);
  const double d = (a - mean) / s;
  return s * std::sqrt(2.0 / std::numbers::pi) * std::exp(-0.5 * d * d) +
         (a - mean) * (2.0 * normal_cdf(d) - 1.0);
}

void check_convex(const Vector& w, const char* what) {
  if ((w.array() < 0.0).any() || std::abs(w.sum() - 1.0) > 1e-12) {
    throw InvalidArgument(std::string(what) + " must be convex weights");
  }
}

// Posterior precision and scaled moment for one model.
struct Conjugate {
  Matrix precision;  // Phi'Phi / sigma2 + I / tau2
  Vector moment;     // Phi'y / sigma2
};

Conjugate conjugate(const GaussianLinearModel& m, const Matrix& phi, const Vector& y) {
  Conjugate c;
  c.precision = phi.transpose() * phi / m.sigma2();
  c.precision.diagonal().array() += 1.0 / m.tau2();
  c.moment = phi.transpose() * y / m.sigma2();
  return c;
}

Predictive predict_from(const GaussianLinearModel& m, const Matrix& precision,
                        const Vector& moment, const Vector& f) {
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    Matrix jittered = precision;
    jittered.diagonal().array() += 1e-10 * precision.diagonal().cwiseAbs().maxCoeff();
    llt.compute(jittered);
    if (llt.info() != Eigen::Success) throw NumericalError("posterior precision is not positive definite");
  }
  Predictive p;
  p.mean = f.dot(llt.solve(moment));
  p.var = m.sigma2() + f.dot(llt.solve(f));
  return p;
}

double plugin_from(const Matrix& gram, const Vector& moment, const Vector& f) {
  return f.dot(solve_checked(gram, moment, "plug-in normal equations"));
}

}  // namespace

GaussianLinearModel::GaussianLinearModel(FeatureMap phi, Index p, double tau2, double sigma2)
    : phi_(std::move(phi)), p_(p), tau2_(tau2), sigma2_(sigma2) {
  if (p_ < 1) throw InvalidArgument("model needs at least one regressor");
  if (!(tau2_ > 0.0) || !std::isfinite(tau2_)) throw InvalidArgument("prior variance tau2 must be > 0");
  if (!(sigma2_ > 0.0) || !std::isfinite(sigma2_)) throw InvalidArgument("noise variance sigma2 must be > 0");
}

GaussianLinearModel GaussianLinearModel::polynomial(int degree, double tau2, double sigma2) {
  if (degree < 0) throw InvalidArgument("polynomial degree must be >= 0");
  FeatureMap phi = [degree](const Eigen::Ref<const Vector>& x) {
    Vector f(degree + 1);
    double v = 1.0;
    for (int k = 0; k <= degree; ++k) {
      f(k) = v;
      v *= x(0);
    }
    return f;
  };
  return GaussianLinearModel(std::move(phi), degree + 1, tau2, sigma2);
}

Vector GaussianLinearModel::features(const Eigen::Ref<const Vector>& x) const {
  Vector f = phi_(x);
  if (f.size() != p_) throw DimensionError("feature map returned the wrong length");
  return f;
}

Matrix GaussianLinearModel::design(const Matrix& x) const {
  Matrix phi(x.rows(), p_);
  for (Index i = 0; i < x.rows(); ++i) phi.row(i) = features(x.row(i).transpose()).transpose();
  return phi;
}

Predictive posterior_predictive(const GaussianLinearModel& model, const Matrix& x,
                                const Vector& y, const Vector& x_new) {
  if (x.rows() != y.size()) throw DimensionError("rows: x and y lengths differ");
  const Conjugate c = conjugate(model, model.design(x), y);
  return predict_from(model, c.precision, c.moment, model.features(x_new));
}

Predictive posterior_predictive(const GaussianLinearModel& model, const Dataset& data,
                                const Vector& x_new) {
  return posterior_predictive(model, data.x(), data.y(), x_new);
}

double bayes_point_predictor(const GaussianLinearModel& model, const Matrix& x, const Vector& y,
                             const Vector& x_new) {
  return posterior_predictive(model, x, y, x_new).mean;
}

double plugin_point_predictor(const GaussianLinearModel& model, const Matrix& x, const Vector& y,
                              const Vector& x_new) {
  if (x.rows() != y.size()) throw DimensionError("rows: x and y lengths differ");
  if (x.rows() <= model.p()) throw InvalidArgument("plug-in predictor needs n > p");
  const Matrix phi = model.design(x);
  const double rcond = reciprocal_condition(phi);
  if (!(rcond * rcond >= kSingularRcond)) throw SingularSystem("plug-in design is rank deficient", rcond * rcond);
  const Vector beta = phi.colPivHouseholderQr().solve(y);
  return model.features(x_new).dot(beta);
}

ModelMixture::ModelMixture(std::vector<GaussianLinearModel> m, Vector p)
    : models(std::move(m)), pi(std::move(p)) {
  if (models.empty()) throw InvalidArgument("mixture needs at least one model");
  if (pi.size() != J()) throw DimensionError("mixture weights length differs from model count");
  check_convex(pi, "mixture weights pi");
}

namespace {
Vector uniform_weights(std::size_t count) {
  if (count == 0) throw InvalidArgument("mixture needs at least one model");
  return Vector::Constant(static_cast<Index>(count), 1.0 / static_cast<double>(count));
}
}  // namespace

ModelMixture::ModelMixture(std::vector<GaussianLinearModel> m) : models(std::move(m)) {
  pi = uniform_weights(models.size());
}

double GaussianMixtureDensity::pdf(double t) const {
  double acc = 0.0;
  for (Index j = 0; j < weights.size(); ++j) acc += weights(j) * normal_pdf(t, means(j), vars(j));
  return acc;
}

double GaussianMixtureDensity::log_pdf(double t) const {
  if ((weights.array() >= 0.0).all()) {
    double hi = -std::numeric_limits<double>::infinity();
    Vector terms(weights.size());
    for (Index j = 0; j < weights.size(); ++j) {
      terms(j) = weights(j) > 0.0 ? std::log(weights(j)) + normal_log_pdf(t, means(j), vars(j))
                                  : -std::numeric_limits<double>::infinity();
      hi = std::max(hi, terms(j));
    }
    if (!std::isfinite(hi)) throw NumericalError("mixture density is zero");
    return hi + std::log((terms.array() - hi).exp().sum());
  }
  const double p = pdf(t);
  if (!(p > 0.0)) throw NumericalError("action density is not positive; log-utility undefined");
  return std::log(p);
}

double GaussianMixtureDensity::cdf(double t) const {
  double acc = 0.0;
  for (Index j = 0; j < weights.size(); ++j) {
    acc += weights(j) * normal_cdf((t - means(j)) / std::sqrt(vars(j)));
  }
  return acc;
}

double GaussianMixtureDensity::mean() const { return weights.dot(means); }

GaussianMixtureDensity mixture_predictive(const ModelMixture& mixture, const Matrix& x,
                                          const Vector& y, const Vector& x_new) {
  GaussianMixtureDensity mix;
  mix.weights = mixture.pi;
  mix.means.resize(mixture.J());
  mix.vars.resize(mixture.J());
  for (Index j = 0; j < mixture.J(); ++j) {
    const Predictive p = posterior_predictive(mixture.models[static_cast<std::size_t>(j)], x, y, x_new);
    mix.means(j) = p.mean;
    mix.vars(j) = p.var;
  }
  return mix;
}

double mixture_quantile(const GaussianMixtureDensity& mix, double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw InvalidArgument("quantile probability must be in (0, 1)");
  check_convex(mix.weights, "mixture weights");
  const Vector sd = mix.vars.cwiseSqrt();
  double lo = (mix.means - 40.0 * sd).minCoeff();
  double hi = (mix.means + 40.0 * sd).maxCoeff();
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (mix.cdf(mid) < prob ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double posterior_risk(const GaussianMixtureDensity& predictive, const Action& action,
                      LossKind loss) {
  const Index J = predictive.weights.size();
  if (loss == LossKind::Squared || loss == LossKind::Absolute) {
    const auto* a = std::get_if<double>(&action);
    if (!a) throw InvalidArgument("point losses need a scalar action");
    double risk = 0.0;
    for (Index j = 0; j < J; ++j) {
      const double mu = predictive.means(j), v = predictive.vars(j);
      risk += predictive.weights(j) *
              (loss == LossKind::Squared ? v + (mu - *a) * (mu - *a) : abs_deviation(*a, mu, v));
    }
    return risk;
  }
  const auto* dens = std::get_if<GaussianMixtureDensity>(&action);
  if (!dens) throw InvalidArgument("log-utility needs a density action");
  const Vector sd = predictive.vars.cwiseSqrt();
  const double lo = (predictive.means - 10.0 * sd).minCoeff();
  const double hi = (predictive.means + 10.0 * sd).maxCoeff();
  const auto integrand = [&](double t) { return predictive.pdf(t) * dens->log_pdf(t); };
  double err = 0.0;
  const double val = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      integrand, lo, hi, 20, 1e-13, &err);
  if (!(err <= kQuadratureTol) || !std::isfinite(val)) {
    throw NumericalError("log-utility quadrature did not converge (error estimate " +
                         std::to_string(err) + ")");
  }
  return -val;
}

double posterior_risk(const ModelMixture& mixture, const Matrix& x, const Vector& y,
                      const Vector& x_new, const Action& action, LossKind loss) {
  return posterior_risk(mixture_predictive(mixture, x, y, x_new), action, loss);
}

Action stacked_action(const ModelMixture& mixture, const Matrix& x, const Vector& y,
                      const Vector& x_new, const Vector& w, LossKind loss,
                      PredictorKind predictor) {
  if (w.size() != mixture.J()) throw DimensionError("columns: weights and model count differ");
  GaussianMixtureDensity dens;
  dens.weights = w;
  dens.means.resize(w.size());
  dens.vars.resize(w.size());
  for (Index j = 0; j < w.size(); ++j) {
    const auto& m = mixture.models[static_cast<std::size_t>(j)];
    if (predictor == PredictorKind::Bayes) {
      const Predictive p = posterior_predictive(m, x, y, x_new);
      dens.means(j) = p.mean;
      dens.vars(j) = p.var;
    } else {
      dens.means(j) = plugin_point_predictor(m, x, y, x_new);
      dens.vars(j) = m.sigma2();
    }
  }
  if (loss == LossKind::LogUtility) return dens;
  return w.dot(dens.means);
}

double cv_risk(const ModelMixture& mixture, const Dataset& data, const Vector& w, LossKind loss,
               PredictorKind predictor) {
  if (w.size() != mixture.J()) throw DimensionError("columns: weights and model count differ");
  const Index n = data.n();
  const Index J = mixture.J();

  std::vector<Matrix> phis;
  std::vector<Conjugate> full;
  for (const auto& m : mixture.models) {
    phis.push_back(m.design(data.x()));
    full.push_back(predictor == PredictorKind::Bayes
                       ? conjugate(m, phis.back(), data.y())
                       : Conjugate{phis.back().transpose() * phis.back(),
                                   phis.back().transpose() * data.y()});
  }

  double total = 0.0;
  Vector means(J), vars(J);
  for (Index i = 0; i < n; ++i) {
    const double yi = data.y()(i);
    for (Index j = 0; j < J; ++j) {
      const auto& m = mixture.models[static_cast<std::size_t>(j)];
      const Vector f = phis[static_cast<std::size_t>(j)].row(i).transpose();
      const auto& c = full[static_cast<std::size_t>(j)];
      if (predictor == PredictorKind::Bayes) {
        const Matrix prec = c.precision - f * f.transpose() / m.sigma2();
        const Vector mom = c.moment - f * yi / m.sigma2();
        const Predictive p = predict_from(m, prec, mom, f);
        means(j) = p.mean;
        vars(j) = p.var;
      } else {
        if (n - 1 <= m.p()) throw InvalidArgument("plug-in leave-one-out needs n - 1 > p");
        const Matrix gram = c.precision - f * f.transpose();
        const Vector mom = c.moment - f * yi;
        means(j) = plugin_from(gram, mom, f);
        vars(j) = m.sigma2();
      }
    }
    switch (loss) {
      case LossKind::Squared: {
        const double r = yi - w.dot(means);
        total += r * r;
        break;
      }
      case LossKind::Absolute:
        total += std::abs(yi - w.dot(means));
        break;
      case LossKind::LogUtility:
        total -= GaussianMixtureDensity{w, means, vars}.log_pdf(yi);
        break;
    }
  }
  return total / static_cast<double>(n);
}

GapReport convergence_experiment(const TruthGenerator& truth, const ModelMixture& mixture,
                                 const Vector& w, LossKind loss, PredictorKind predictor,
                                 std::span<const Index> n_grid, int reps, const RngPlan& plan,
                                 Exec exec) {
  if (reps < 10) throw InvalidArgument("convergence experiment needs reps >= 10");
  if (n_grid.empty()) throw InvalidArgument("n grid is empty");
  for (std::size_t k = 0; k < n_grid.size(); ++k) {
    if (n_grid[k] < 2 || (k > 0 && n_grid[k] <= n_grid[k - 1])) {
      throw InvalidArgument("n grid must be increasing with every n >= 2");
    }
  }
  if (w.size() != mixture.J()) throw DimensionError("columns: weights and model count differ");
  if (loss == LossKind::LogUtility) check_convex(w, "log-utility action weights");
  if (!(truth.noise_sd > 0.0) || !(truth.hi > truth.lo)) throw InvalidArgument("bad truth generator");

  GapReport rep;
  rep.n_values.assign(n_grid.begin(), n_grid.end());
  rep.gaps.assign(n_grid.size(), std::vector<double>(static_cast<std::size_t>(reps), 0.0));
  const auto cells = static_cast<std::ptrdiff_t>(n_grid.size()) * reps;

  for_each_index(exec, cells, [&](std::ptrdiff_t cell) {
    const auto k = static_cast<std::size_t>(cell / reps);
    const auto r = static_cast<std::size_t>(cell % reps);
    const Index n = n_grid[k];
    auto eng = plan.stream("sim", {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r)});
    std::uniform_real_distribution<double> ux(truth.lo, truth.hi);
    std::normal_distribution<double> noise(0.0, truth.noise_sd);
    Matrix x(n, 1);
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
      x(i, 0) = ux(eng);
      y(i) = truth.mean(x(i, 0)) + noise(eng);
    }
    Vector x_new(1);
    x_new(0) = ux(eng);
    const Dataset data(std::move(x), std::move(y));
    const Action a = stacked_action(mixture, data.x(), data.y(), x_new, w, loss, predictor);
    const double post = posterior_risk(mixture, data.x(), data.y(), x_new, a, loss);
    const double cv = cv_risk(mixture, data, w, loss, predictor);
    rep.gaps[k][r] = std::abs(post - cv);
  });

  for (auto gaps : rep.gaps) {
    double sq = 0.0;
    for (double g : gaps) sq += g * g;
    rep.rms.push_back(std::sqrt(sq / static_cast<double>(gaps.size())));
    std::sort(gaps.begin(), gaps.end());
    const auto at = [&](double q) {
      const double pos = q * static_cast<double>(gaps.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const auto hi = std::min(lo + 1, gaps.size() - 1);
      return gaps[lo] + (pos - static_cast<double>(lo)) * (gaps[hi] - gaps[lo]);
    };
    rep.median.push_back(at(0.5));
    rep.p90.push_back(at(0.9));
  }
  return rep;
}

}  // namespace stackopt
