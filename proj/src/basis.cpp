#include "stackopt/basis.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

#include "stackopt/loocv.hpp"

namespace stackopt {

BatchFn as_batch(RegressionFn fn, Exec exec) {
  auto shared = std::make_shared<const RegressionFn>(std::move(fn));
  return [shared, exec](const Matrix& xq) { return shared->evaluate(xq, exec); };
}

Matrix empirical_gram(const Matrix& evals) {
  return (evals.transpose() * evals) / static_cast<double>(evals.rows());
}

Matrix BasisSet::evaluate(const Matrix& xq) const {
  Matrix cand(xq.rows(), static_cast<Index>(candidates.size()));
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    cand.col(static_cast<Index>(c)) = candidates[c](xq);
  }
  return cand * coef;
}

BasisSet BasisSet::leading(Index count) const {
  if (count < 1 || count > J()) throw InvalidArgument("leading: count outside [1, J]");
  BasisSet b;
  b.candidates = candidates;
  b.coef = coef.leftCols(count);
  b.evals = evals.leftCols(count);
  b.gram = gram.topLeftCorner(count, count);
  return b;
}

BasisSet BasisSet::permuted(std::span<const Index> order) const {
  if (static_cast<Index>(order.size()) != J()) throw DimensionError("permutation length");
  BasisSet b;
  b.candidates = candidates;
  b.coef.resize(coef.rows(), J());
  b.evals.resize(evals.rows(), J());
  b.gram.resize(J(), J());
  for (Index r = 0; r < J(); ++r) {
    b.coef.col(r) = coef.col(order[static_cast<std::size_t>(r)]);
    b.evals.col(r) = evals.col(order[static_cast<std::size_t>(r)]);
    for (Index s = 0; s < J(); ++s) {
      b.gram(r, s) = gram(order[static_cast<std::size_t>(r)], order[static_cast<std::size_t>(s)]);
    }
  }
  return b;
}

BasisSet BasisSet::from_functions(std::vector<BatchFn> fns, const Matrix& x) {
  if (fns.empty()) throw InvalidArgument("basis needs at least one function");
  BasisSet b;
  const Index J = static_cast<Index>(fns.size());
  b.candidates = std::move(fns);
  b.coef = Matrix::Identity(J, J);
  b.evals = b.evaluate(x);
  b.gram = empirical_gram(b.evals);
  return b;
}

RegressionFn fit_generator(const Matrix& x, const Vector& y, const GeneratorSpec& gen,
                           Exec exec) {
  if (gen.kind == GeneratorKind::GaussianProcess) return gp_fit(x, y, gen.kernel);
  const std::vector<double> grid = default_bandwidth_grid(x, gen.bandwidth_grid_size);
  const double lambda = select_bandwidth_cv(x, y, grid, exec);
  return nw_fit(x, y, lambda);
}

std::vector<RegressionFn> bootstrap_candidates(const Dataset& data, Index J,
                                               const GeneratorSpec& gen, const RngPlan& plan,
                                               Exec exec) {
  if (J < 1) throw InvalidArgument("need J >= 1 candidates");
  const Index n = data.n();
  const int max_retries = static_cast<int>(10 * J);
  std::vector<std::optional<RegressionFn>> out(static_cast<std::size_t>(J));
  std::vector<int> retries(static_cast<std::size_t>(J), 0);
  std::vector<std::string> last_error(static_cast<std::size_t>(J));

  for_each_index(exec, J, [&](std::ptrdiff_t j) {
    const auto js = static_cast<std::size_t>(j);
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
      auto eng = plan.stream("bootstrap", {static_cast<std::uint64_t>(j),
                                           static_cast<std::uint64_t>(attempt)});
      std::uniform_int_distribution<Index> pick(0, n - 1);
      Matrix xs(n, data.d());
      Vector ys(n);
      for (Index r = 0; r < n; ++r) {
        const Index i = pick(eng);
        xs.row(r) = data.x().row(i);
        ys(r) = data.y()(i);
      }
      try {
        out[js] = fit_generator(xs, ys, gen, Exec::Serial);
        retries[js] = attempt;
        return;
      } catch (const Error& e) {
        last_error[js] = e.what();
      }
    }
    retries[js] = max_retries + 1;
  });

  const int total = std::accumulate(retries.begin(), retries.end(), 0);
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (!out[j] || total > max_retries) {
      throw NumericalError("bootstrap candidate generation exceeded " +
                           std::to_string(max_retries) + " retries; last failure: " +
                           (last_error[j].empty() ? std::string("none") : last_error[j]));
    }
  }
  std::vector<RegressionFn> fns;
  fns.reserve(out.size());
  for (auto& f : out) fns.push_back(std::move(*f));
  return fns;
}

GramSchmidtOutcome gram_schmidt_empirical(const Matrix& candidates, double tol) {
  const Index n = candidates.rows();
  const Index J = candidates.cols();
  if (J < 1) throw InvalidArgument("Gram-Schmidt needs at least one column");
  if (n < J) {
    throw InvalidArgument("Gram-Schmidt needs n >= J (n=" + std::to_string(n) +
                          ", J=" + std::to_string(J) + ")");
  }
  if (!candidates.allFinite()) throw InvalidArgument("candidate evaluations are not finite");

  const auto norm_n = [n](const Vector& v) { return std::sqrt(v.squaredNorm() / static_cast<double>(n)); };
  GramSchmidtOutcome res;
  Matrix q = candidates;
  Matrix c = Matrix::Identity(J, J);
  for (Index j = 0; j < J; ++j) {
    const double original = norm_n(candidates.col(j));
    if (!(original > 0.0)) {
      throw InvalidArgument("candidate column " + std::to_string(j) + " has zero norm");
    }
    Vector v = q.col(j);
    Vector cj = c.col(j);
    for (int pass = 0; pass < 2; ++pass) {
      for (Index i = 0; i < j; ++i) {
        const double r = q.col(i).dot(v) / static_cast<double>(n);
        v -= r * q.col(i);
        cj -= r * c.col(i);
      }
    }
    const double residual = norm_n(v);
    const double ratio = residual / original;
    res.residual_ratio = std::min(res.residual_ratio, ratio);
    if (!(ratio >= tol)) {
      res.accepted = false;
      res.rejected_column = j;
      res.diagnostic = "candidate " + std::to_string(j) +
                       " is numerically in the span of earlier candidates (residual ratio " +
                       std::to_string(ratio) + ")";
      return res;
    }
    q.col(j) = v / residual;
    c.col(j) = cj / residual;
  }
  res.accepted = true;
  res.coef = std::move(c);
  res.evals = candidates * res.coef;
  return res;
}

BasisSet generate_orthonormal_basis(const Dataset& data, Index J, const GeneratorSpec& gen,
                                    const RngPlan& plan, int max_rounds, double tol, Exec exec) {
  if (max_rounds < 1) throw InvalidArgument("max_rounds must be >= 1");
  if (J < 1) throw InvalidArgument("need J >= 1");
  if (J > data.n()) {
    throw InvalidArgument("basis size J=" + std::to_string(J) + " exceeds n=" +
                          std::to_string(data.n()));
  }
  std::string last;
  for (int round = 0; round < max_rounds; ++round) {
    std::vector<RegressionFn> cands =
        bootstrap_candidates(data, J, gen, plan.child("round", {static_cast<std::uint64_t>(round)}), exec);
    Matrix evals(data.n(), J);
    for (Index j = 0; j < J; ++j) evals.col(j) = cands[static_cast<std::size_t>(j)].evaluate(data.x(), exec);
    GramSchmidtOutcome gs;
    try {
      gs = gram_schmidt_empirical(evals, tol);
    } catch (const InvalidArgument& e) {
      last = e.what();
      continue;
    }
    if (!gs.accepted) {
      last = gs.diagnostic;
      continue;
    }
    BasisSet b;
    for (auto& f : cands) b.candidates.push_back(as_batch(std::move(f), exec));
    b.coef = std::move(gs.coef);
    b.evals = std::move(gs.evals);
    b.gram = empirical_gram(b.evals);
    return b;
  }
  throw NumericalError("no orthonormal basis accepted in " + std::to_string(max_rounds) +
                       " rounds; last rejection: " + last);
}

Box Box::bounding(const Matrix& x) {
  if (x.rows() < 1) throw InvalidArgument("bounding box of empty data");
  return Box{x.colwise().minCoeff().transpose(), x.colwise().maxCoeff().transpose()};
}

Matrix grid_points(const Box& box, int resolution) {
  if (resolution < 2) throw InvalidArgument("resolution must be >= 2");
  const Index d = box.dim();
  const auto axis = [&](Index a, int g) {
    return box.lo(a) + (box.hi(a) - box.lo(a)) * static_cast<double>(g) / (resolution - 1);
  };
  if (d == 1) {
    Matrix pts(resolution, 1);
    for (int g = 0; g < resolution; ++g) pts(g, 0) = axis(0, g);
    return pts;
  }
  if (d == 2) {
    Matrix pts(static_cast<Index>(resolution) * resolution, 2);
    for (int a = 0; a < resolution; ++a) {
      for (int b = 0; b < resolution; ++b) {
        const Index r = static_cast<Index>(a) * resolution + b;
        pts(r, 0) = axis(0, a);
        pts(r, 1) = axis(1, b);
      }
    }
    return pts;
  }
  throw InvalidArgument("surface area is only defined for dim(x) in {1, 2}, got " +
                        std::to_string(d));
}

double surface_area_from_grid(const Vector& values, const Box& box, int resolution) {
  const Index d = box.dim();
  if (d == 1) {
    if (values.size() != resolution) throw DimensionError("grid value count");
    const double dx = (box.hi(0) - box.lo(0)) / (resolution - 1);
    double total = 0.0;
    for (int g = 1; g < resolution; ++g) total += std::hypot(dx, values(g) - values(g - 1));
    return total;
  }
  if (d == 2) {
    if (values.size() != static_cast<Index>(resolution) * resolution) {
      throw DimensionError("grid value count");
    }
    const double dx = (box.hi(0) - box.lo(0)) / (resolution - 1);
    const double dy = (box.hi(1) - box.lo(1)) / (resolution - 1);
    const auto f = [&](int a, int b) { return values(static_cast<Index>(a) * resolution + b); };
    const auto tri = [](const Eigen::Vector3d& p, const Eigen::Vector3d& q, const Eigen::Vector3d& r) {
      return 0.5 * (q - p).cross(r - p).norm();
    };
    double total = 0.0;
    for (int a = 0; a + 1 < resolution; ++a) {
      for (int b = 0; b + 1 < resolution; ++b) {
        const Eigen::Vector3d p00(0.0, 0.0, f(a, b));
        const Eigen::Vector3d p10(dx, 0.0, f(a + 1, b));
        const Eigen::Vector3d p01(0.0, dy, f(a, b + 1));
        const Eigen::Vector3d p11(dx, dy, f(a + 1, b + 1));
        total += tri(p00, p10, p11) + tri(p00, p11, p01);
      }
    }
    return total;
  }
  throw InvalidArgument("surface area is only defined for dim(x) in {1, 2}, got " +
                        std::to_string(d));
}

double surface_area(const BatchFn& fn, const Box& box, int resolution) {
  const Matrix pts = grid_points(box, resolution);
  return surface_area_from_grid(fn(pts), box, resolution);
}

std::vector<double> surface_areas(const BasisSet& basis, const Box& box, int resolution) {
  const Matrix pts = grid_points(box, resolution);
  const Matrix vals = basis.evaluate(pts);
  std::vector<double> sa(static_cast<std::size_t>(basis.J()));
  for (Index j = 0; j < basis.J(); ++j) {
    sa[static_cast<std::size_t>(j)] = surface_area_from_grid(vals.col(j), box, resolution);
  }
  return sa;
}

BasisSet order_basis(const BasisSet& basis, const BatchFn& reference, const Box& box,
                     int resolution) {
  if (box.dim() >= 3) {
    std::cerr << "warning: surface-area ordering needs dim(x) <= 2; keeping the generated order\n";
    return basis;
  }
  const double ref = surface_area(reference, box, resolution);
  const std::vector<double> sa = surface_areas(basis, box, resolution);
  std::vector<Index> order(sa.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return std::abs(ref - sa[static_cast<std::size_t>(a)]) <
           std::abs(ref - sa[static_cast<std::size_t>(b)]);
  });
  return basis.permuted(order);
}

PermutationPlan PermutationPlan::draw(Index n, int K, const RngPlan& plan, Index burn_in) {
  if (K < 1) throw InvalidArgument("need K >= 1 permutations");
  if (burn_in < 2) throw InvalidArgument("burn_in must be >= 2");
  PermutationPlan p;
  p.burn_in = burn_in;
  for (int k = 0; k < K; ++k) {
    std::vector<Index> s(static_cast<std::size_t>(n));
    std::iota(s.begin(), s.end(), Index{0});
    auto eng = plan.stream("perm", {static_cast<std::uint64_t>(k)});
    std::shuffle(s.begin(), s.end(), eng);
    p.sigmas.push_back(std::move(s));
  }
  return p;
}

namespace {

void check_plan(const PermutationPlan& plan, Index n) {
  if (plan.sigmas.empty()) throw InvalidArgument("permutation plan is empty");
  if (plan.burn_in < 2) throw InvalidArgument("burn_in must be >= 2");
  for (const auto& s : plan.sigmas) {
    if (static_cast<Index>(s.size()) != n) throw DimensionError("permutation length differs from n");
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (Index i : s) {
      if (i < 0 || i >= n || seen[static_cast<std::size_t>(i)]) {
        throw InvalidArgument("permutation is not a bijection");
      }
      seen[static_cast<std::size_t>(i)] = 1;
    }
  }
}

// Accumulates squared errors of the projected prediction for every J' given
// the estimate's values f at all design points and the point to predict.
void accumulate(const BasisSet& basis, const Vector& f, Index target, double y_target,
                Vector& totals) {
  const Vector coords = basis.evals.transpose() * f / static_cast<double>(f.size());
  double pred = 0.0;
  for (Index j = 0; j < basis.J(); ++j) {
    pred += coords(j) * basis.evals(target, j);
    const double r = pred - y_target;
    totals(j) += r * r;
  }
}

}  // namespace

Vector sequential_scores(const Dataset& data, const BasisSet& basis, const PermutationPlan& plan,
                         double lambda, Exec exec) {
  const Index n = data.n();
  if (basis.n() != n) throw DimensionError("rows: basis evaluations and data differ");
  if (!(lambda > 0.0)) throw InvalidArgument("bandwidth must be positive");
  check_plan(plan, n);
  const Matrix z = Standardizer::fit(data.x()).apply(data.x());
  const double c = -0.5 / (lambda * lambda);
  const auto K = static_cast<std::ptrdiff_t>(plan.sigmas.size());

  std::vector<Vector> per_perm(static_cast<std::size_t>(K));
  for_each_index(exec, K, [&](std::ptrdiff_t k) {
    const auto& sigma = plan.sigmas[static_cast<std::size_t>(k)];
    Vector totals = Vector::Zero(basis.J());
    Eigen::ArrayXd num = Eigen::ArrayXd::Zero(n);
    Eigen::ArrayXd den = Eigen::ArrayXd::Zero(n);
    Eigen::ArrayXd best_d = Eigen::ArrayXd::Constant(n, std::numeric_limits<double>::infinity());
    Eigen::ArrayXd best_y = Eigen::ArrayXd::Zero(n);
    Vector f(n);
    for (Index pos = 0; pos < n; ++pos) {
      const Index target = sigma[static_cast<std::size_t>(pos)];
      // pos is 0-based; the 1-based position is pos + 1 with a pos-point prefix.
      if (pos + 1 >= plan.burn_in) {
        for (Index l = 0; l < n; ++l) f(l) = den(l) > 0.0 ? num(l) / den(l) : best_y(l);
        accumulate(basis, f, target, data.y()(target), totals);
      }
      const Eigen::ArrayXd d2 = (z.rowwise() - z.row(target)).rowwise().squaredNorm().array();
      const Eigen::ArrayXd w = gaussian_weights(c, d2);
      num += w * data.y()(target);
      den += w;
      for (Index l = 0; l < n; ++l) {
        if (d2(l) < best_d(l)) {
          best_d(l) = d2(l);
          best_y(l) = data.y()(target);
        }
      }
    }
    per_perm[static_cast<std::size_t>(k)] = std::move(totals);
  });
  Vector total = Vector::Zero(basis.J());
  for (const auto& t : per_perm) total += t;
  return total;
}

Vector sequential_scores_reference(const Dataset& data, const BasisSet& basis,
                                   const PermutationPlan& plan, double lambda) {
  const Index n = data.n();
  if (basis.n() != n) throw DimensionError("rows: basis evaluations and data differ");
  check_plan(plan, n);
  const Standardizer s = Standardizer::fit(data.x());
  Vector total = Vector::Zero(basis.J());
  for (const auto& sigma : plan.sigmas) {
    for (Index pos = plan.burn_in - 1; pos < n; ++pos) {
      Matrix xp(pos, data.d());
      Vector yp(pos);
      for (Index r = 0; r < pos; ++r) {
        xp.row(r) = data.x().row(sigma[static_cast<std::size_t>(r)]);
        yp(r) = data.y()(sigma[static_cast<std::size_t>(r)]);
      }
      const RegressionFn fhat = nw_fit(xp, yp, lambda, s);
      const Vector f = fhat.evaluate(data.x(), Exec::Serial);
      const Index target = sigma[static_cast<std::size_t>(pos)];
      accumulate(basis, f, target, data.y()(target), total);
    }
  }
  return total;
}

double sequential_score(const Dataset& data, const BasisSet& basis, Index j_prime,
                        const PermutationPlan& plan, double lambda, Exec exec) {
  if (j_prime < 1 || j_prime > basis.J()) throw InvalidArgument("J' outside [1, J]");
  return sequential_scores(data, basis, plan, lambda, exec)(j_prime - 1);
}

Vector cv_scores(const Dataset& data, const BasisSet& basis) {
  if (basis.n() != data.n()) throw DimensionError("rows: basis evaluations and data differ");
  Vector out(basis.J());
  for (Index jp = 1; jp <= basis.J(); ++jp) {
    const LinearModelFit fit = fit_linear(basis.evals.leftCols(jp), data.y());
    out(jp - 1) = (data.y() - loo_linear(fit, data.y())).squaredNorm();
  }
  return out;
}

BasisSearchResult select_j_opt(const Dataset& data, const BasisSet& ordered,
                               const PermutationPlan& plan, double lambda, SelectMode mode,
                               Exec exec) {
  BasisSearchResult r;
  r.score = mode == SelectMode::Sequential ? sequential_scores(data, ordered, plan, lambda, exec)
                                           : cv_scores(data, ordered);
  Index best = 0;
  for (Index j = 1; j < r.score.size(); ++j) {
    if (r.score(j) < r.score(best)) best = j;
  }
  r.j_opt = best + 1;
  r.basis_opt = ordered;
  return r;
}

BasisSearchResult search_basis(const Dataset& data, const BasisSearchConfig& cfg,
                               const RngPlan& plan, Exec exec) {
  if (cfg.restarts < 1) throw InvalidArgument("need at least one restart");
  const Box box = Box::bounding(data.x());
  const RegressionFn reference = fit_generator(data.x(), data.y(), cfg.generator, exec);
  const BatchFn reference_fn = as_batch(reference, exec);

  double lambda = 1.0;
  PermutationPlan perms;
  if (cfg.mode == SelectMode::Sequential) {
    lambda = reference.kind() == RegressionKind::NadarayaWatson
                 ? reference.bandwidth()
                 : select_bandwidth_cv(data.x(), data.y(), default_bandwidth_grid(data.x()), exec);
    perms = PermutationPlan::draw(data.n(), cfg.permutations, plan);
  }

  std::vector<BasisSearchResult> runs(static_cast<std::size_t>(cfg.restarts));
  for_each_index(exec, cfg.restarts, [&](std::ptrdiff_t r) {
    const RngPlan sub = plan.child("restart", {static_cast<std::uint64_t>(r)});
    BasisSet b = generate_orthonormal_basis(data, cfg.J, cfg.generator, sub, cfg.max_rounds,
                                            cfg.gs_tol, exec);
    BasisSet ordered = order_basis(b, reference_fn, box, cfg.resolution);
    runs[static_cast<std::size_t>(r)] = select_j_opt(data, ordered, perms, lambda, cfg.mode, exec);
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    const auto& a = runs[r];
    const auto& b = runs[best];
    if (a.score(a.j_opt - 1) < b.score(b.j_opt - 1)) best = r;
  }
  return runs[best];
}

}  // namespace stackopt
