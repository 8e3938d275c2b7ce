#pragma once

#include <cstddef>
#include <vector>

#include "mvae/matrix.hpp"

namespace mvae {

/// Pivots with magnitude below this are treated as exactly zero.
inline constexpr double kSingularPivot = 1e-300;

/// Partial-pivoting LU factors packed in one matrix: strict lower triangle
/// holds L (unit diagonal implied), upper triangle holds U. Row i of P*A is
/// row perm[i] of A.
struct LuFactors {
  Matrix lu;
  std::vector<std::size_t> perm;
  int sign = 1;

  std::size_t order() const noexcept { return lu.rows(); }
  Matrix lower() const;
  Matrix upper() const;
  Matrix permutation() const;
};

/// Throws SingularityError when a column has no usable pivot.
LuFactors lu_factor(const Matrix& a);

/// Sum of log|U_ii|. Sign of the determinant is f.sign times the signs of U_ii.
double log_abs_det(const LuFactors& f);
/// Sign (+1/-1) of det A.
int det_sign(const LuFactors& f);

/// Solves A x = rhs for every column of rhs.
Matrix lu_solve(const LuFactors& f, const Matrix& rhs);

/// A^{-T}, the gradient of log|det A| with respect to A.
Matrix inverse_transpose(const LuFactors& f);

}  // namespace mvae
