#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stackopt/core.hpp"
#include "stackopt/kernels.hpp"
#include "stackopt/parallel.hpp"
#include "stackopt/rng.hpp"

namespace stackopt {

/// Evaluates a function at every row of a query matrix.
using BatchFn = std::function<Vector(const Matrix& xq)>;

/// Wraps a fitted regressor as a BatchFn sharing its state.
BatchFn as_batch(RegressionFn fn, Exec exec = Exec::Parallel);

/// J basis functions, each a fixed linear combination of candidate
/// functions: element j = sum_c coef(c, j) * candidates[c].
struct BasisSet {
  std::vector<BatchFn> candidates;
  Matrix coef;   // candidates.size() x J
  Matrix evals;  // n x J, element values at the design points
  Matrix gram;   // J x J empirical Gram matrix of evals

  Index J() const noexcept { return coef.cols(); }
  Index n() const noexcept { return evals.rows(); }

  Matrix evaluate(const Matrix& xq) const;
  /// The first count elements.
  BasisSet leading(Index count) const;
  /// Elements reordered so that new element r is old element order[r].
  BasisSet permuted(std::span<const Index> order) const;

  /// Basis whose elements are the given functions themselves (coef = I).
  static BasisSet from_functions(std::vector<BatchFn> fns, const Matrix& x);
};

Matrix empirical_gram(const Matrix& evals);

enum class GeneratorKind { NadarayaWatson, GaussianProcess };

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::NadarayaWatson;
  KernelSpec kernel{Rbf{1.0}, 0.1};  // GP only
  int bandwidth_grid_size = 25;      // NW only
};

/// Fits the generator's estimator on all of (x, y); NW picks its bandwidth by
/// leave-one-out over the default grid.
RegressionFn fit_generator(const Matrix& x, const Vector& y, const GeneratorSpec& gen,
                           Exec exec = Exec::Parallel);

/// J regressors, each fit on an independent size-n resample with
/// replacement. Candidate j draws from stream ("bootstrap", j, attempt); a
/// failed fit moves to the next attempt, with at most 10 J retries overall.
std::vector<RegressionFn> bootstrap_candidates(const Dataset& data, Index J,
                                               const GeneratorSpec& gen, const RngPlan& plan,
                                               Exec exec = Exec::Parallel);

/// Result of orthonormalizing a batch of candidate columns.
struct GramSchmidtOutcome {
  bool accepted = false;
  Matrix coef;   // J x J upper triangular, orthonormal = candidates * coef
  Matrix evals;  // orthonormal columns (valid when accepted)
  Index rejected_column = -1;
  double residual_ratio = 1.0;  // smallest residual/original norm seen
  std::string diagnostic;
};

/// Modified Gram-Schmidt (two passes) under the empirical inner product.
/// A column whose residual norm falls below tol times its original norm
/// rejects the batch; a zero-norm column throws.
GramSchmidtOutcome gram_schmidt_empirical(const Matrix& candidates, double tol = 1e-6);

/// Redraws bootstrap candidates (stream "round", r) until Gram-Schmidt
/// accepts, giving up after max_rounds.
BasisSet generate_orthonormal_basis(const Dataset& data, Index J, const GeneratorSpec& gen,
                                    const RngPlan& plan, int max_rounds = 50,
                                    double tol = 1e-6, Exec exec = Exec::Parallel);

/// Axis-aligned box.
struct Box {
  Vector lo;
  Vector hi;
  static Box bounding(const Matrix& x);
  Index dim() const noexcept { return lo.size(); }
};

/// Uniform grid with `resolution` points per axis, one point per row.
Matrix grid_points(const Box& box, int resolution);

/// Arc length (d = 1) or triangulated surface area (d = 2) of the graph of
/// fn over the box, sampled on a uniform grid.
double surface_area(const BatchFn& fn, const Box& box, int resolution);
double surface_area_from_grid(const Vector& values, const Box& box, int resolution);

/// Surface area of every basis element on one shared grid.
std::vector<double> surface_areas(const BasisSet& basis, const Box& box, int resolution);

/// Stable sort of the elements by |SA(reference) - SA(element)|. For d >= 3
/// the basis is returned unchanged and a warning is written to stderr.
BasisSet order_basis(const BasisSet& basis, const BatchFn& reference, const Box& box,
                     int resolution = 512);

/// K permutations of 0..n-1 and the first predicted (1-based) position.
struct PermutationPlan {
  std::vector<std::vector<Index>> sigmas;
  Index burn_in = 2;

  static PermutationPlan draw(Index n, int K, const RngPlan& plan, Index burn_in = 2);
};

/// Sequential prediction scores for every J' = 1..J in one pass.
///
/// For each permutation and each position i >= burn_in, the Nadaraya-Watson
/// estimate with bandwidth lambda on the first i-1 permuted points is
/// projected onto the leading basis elements (empirical inner product over
/// all n design points) and the squared error at the i-th permuted point is
/// accumulated. Prefix sums are updated incrementally. The standardizer of
/// the full data is used for every prefix.
Vector sequential_scores(const Dataset& data, const BasisSet& basis, const PermutationPlan& plan,
                         double lambda, Exec exec = Exec::Parallel);

/// Reference path: refits nw_fit on each prefix from scratch. O(K n^3).
Vector sequential_scores_reference(const Dataset& data, const BasisSet& basis,
                                   const PermutationPlan& plan, double lambda);

double sequential_score(const Dataset& data, const BasisSet& basis, Index j_prime,
                        const PermutationPlan& plan, double lambda, Exec exec = Exec::Parallel);

/// Leave-one-out squared error of fit_linear on the first J' columns, for
/// every J' = 1..J.
Vector cv_scores(const Dataset& data, const BasisSet& basis);

enum class SelectMode { Sequential, Cv };

struct BasisSearchResult {
  Index j_opt = 1;
  BasisSet basis_opt;  // full ordered basis; the model uses its first j_opt elements
  Vector score;        // score(J'-1) for J' = 1..J

  BasisSet selected() const { return basis_opt.leading(j_opt); }
};

/// Picks the J' minimizing the chosen score; ties go to the smaller J'.
/// lambda is only used in sequential mode.
BasisSearchResult select_j_opt(const Dataset& data, const BasisSet& ordered,
                               const PermutationPlan& plan, double lambda, SelectMode mode,
                               Exec exec = Exec::Parallel);

struct BasisSearchConfig {
  Index J = 10;
  GeneratorSpec generator;
  int restarts = 5;
  int permutations = 5;
  SelectMode mode = SelectMode::Cv;
  int max_rounds = 50;
  int resolution = 512;
  double gs_tol = 1e-6;
};

/// Stochastic search over bases: `restarts` independent generate / order /
/// select runs (child plan "restart", r); the lowest score wins, ties to the
/// earlier restart.
BasisSearchResult search_basis(const Dataset& data, const BasisSearchConfig& cfg,
                               const RngPlan& plan, Exec exec = Exec::Parallel);

}  // namespace stackopt
