#include "stackopt/linalg.hpp"

#include <string>

namespace stackopt {

double reciprocal_condition(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& s = svd.singularValues();
  const double smax = s(0);
  if (!(smax > 0.0)) return 0.0;
  return s(s.size() - 1) / smax;
}

Vector solve_checked(const Matrix& a, const Vector& b, std::string_view what) {
  if (a.rows() != a.cols()) throw DimensionError(std::string(what) + ": matrix is not square");
  if (a.rows() != b.size()) throw DimensionError(std::string(what) + ": right-hand side length");
  if (!a.allFinite() || !b.allFinite()) {
    throw NumericalError(std::string(what) + ": non-finite system");
  }
  const double rcond = reciprocal_condition(a);
  if (!(rcond >= kSingularRcond)) {
    throw SingularSystem(std::string(what) + " is singular or nearly so", rcond);
  }
  return a.colPivHouseholderQr().solve(b);
}

}  // namespace stackopt
