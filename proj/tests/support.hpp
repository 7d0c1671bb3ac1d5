#pragma once

#include <random>

#include "stackopt/core.hpp"

namespace testing_support {

using stackopt::Index;
using stackopt::Matrix;
using stackopt::Vector;

inline Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& eng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = z(eng);
  return m;
}

inline Vector gaussian_vector(Index n, std::mt19937_64& eng) {
  return gaussian_matrix(n, 1, eng).col(0);
}

/// Correlated predictions around a response, as stacking sees them.
struct Instance {
  Matrix preds;
  Vector y;
};

inline Instance random_instance(Index n, Index J, std::mt19937_64& eng) {
  Instance in;
  in.y = gaussian_vector(n, eng);
  in.preds = gaussian_matrix(n, J, eng);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  for (Index j = 0; j < J; ++j) in.preds.col(j) += u(eng) * in.y;
  return in;
}

}  // namespace testing_support
