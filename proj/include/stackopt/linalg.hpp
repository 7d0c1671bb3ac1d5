#pragma once

#include <string_view>

#include "stackopt/core.hpp"

namespace stackopt {

/// Below this reciprocal condition number a system is treated as singular.
inline constexpr double kSingularRcond = 1e-12;

/// sigma_min / sigma_max from a full SVD; 0 for an empty or zero matrix.
double reciprocal_condition(const Matrix& a);

/// Solves a x = b with column-pivoted QR after checking the condition
/// estimate. Throws SingularSystem naming `what` when rcond < kSingularRcond.
Vector solve_checked(const Matrix& a, const Vector& b, std::string_view what);

}  // namespace stackopt
