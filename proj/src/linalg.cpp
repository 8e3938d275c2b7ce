#include "mvae/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "mvae/error.hpp"

namespace mvae {

Matrix LuFactors::lower() const {
  const std::size_t n = order();
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) l(i, j) = lu(i, j);
    l(i, i) = 1.0;
  }
  return l;
}

Matrix LuFactors::upper() const {
  const std::size_t n = order();
  Matrix u(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) u(i, j) = lu(i, j);
  return u;
}

Matrix LuFactors::permutation() const {
  const std::size_t n = order();
  Matrix p(n, n);
  for (std::size_t i = 0; i < n; ++i) p(i, perm[i]) = 1.0;
  return p;
}

LuFactors lu_factor(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw ContractError("lu_factor: matrix is " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + ", not square");
  }
  const std::size_t n = a.rows();
  LuFactors f{a, std::vector<std::size_t>(n), 1};
  for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;
  Matrix& m = f.lu;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    double best = std::abs(m(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(m(i, k)) > best) {
        best = std::abs(m(i, k));
        pivot = i;
      }
    }
    if (best < kSingularPivot) {
      throw SingularityError("lu_factor: zero pivot in column " + std::to_string(k),
                             -std::numeric_limits<double>::infinity());
    }
    if (pivot != k) {
      auto rk = m.row(k), rp = m.row(pivot);
      std::swap_ranges(rk.begin(), rk.end(), rp.begin());
      std::swap(f.perm[k], f.perm[pivot]);
      f.sign = -f.sign;
    }
    const double diag = m(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double factor = m(i, k) / diag;
      m(i, k) = factor;
      if (factor == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) m(i, j) -= factor * m(k, j);
    }
  }
  return f;
}

double log_abs_det(const LuFactors& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.order(); ++i) {
    const double u = std::abs(f.lu(i, i));
    if (u < kSingularPivot) {
      throw SingularityError("log_abs_det: |U(" + std::to_string(i) + "," + std::to_string(i) +
                                 ")| below singularity threshold",
                             -std::numeric_limits<double>::infinity());
    }
    s += std::log(u);
  }
  return s;
}

int det_sign(const LuFactors& f) {
  int s = f.sign;
  for (std::size_t i = 0; i < f.order(); ++i)
    if (f.lu(i, i) < 0.0) s = -s;
  return s;
}

Matrix lu_solve(const LuFactors& f, const Matrix& rhs) {
  const std::size_t n = f.order();
  if (rhs.rows() != n) {
    throw ContractError("lu_solve: rhs has " + std::to_string(rhs.rows()) + " rows, expected " +
                        std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(f.lu(i, i)) < kSingularPivot) {
      throw SingularityError("lu_solve: singular factorization", -std::numeric_limits<double>::infinity());
    }
  }
  const std::size_t m = rhs.cols();
  Matrix x(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    auto src = rhs.row(f.perm[i]);
    std::copy(src.begin(), src.end(), x.row(i).begin());
  }
  // forward: L y = P b
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = x.row(i);
    for (std::size_t k = 0; k < i; ++k) {
      const double l = f.lu(i, k);
      if (l == 0.0) continue;
      auto xk = x.row(k);
      for (std::size_t j = 0; j < m; ++j) xi[j] -= l * xk[j];
    }
  }
  // backward: U x = y
  for (std::size_t ii = n; ii-- > 0;) {
    auto xi = x.row(ii);
    for (std::size_t k = ii + 1; k < n; ++k) {
      const double u = f.lu(ii, k);
      if (u == 0.0) continue;
      auto xk = x.row(k);
      for (std::size_t j = 0; j < m; ++j) xi[j] -= u * xk[j];
    }
    const double d = f.lu(ii, ii);
    for (std::size_t j = 0; j < m; ++j) xi[j] /= d;
  }
  return x;
}

Matrix inverse_transpose(const LuFactors& f) {
  return transpose(lu_solve(f, Matrix::identity(f.order())));
}

}  // namespace mvae
