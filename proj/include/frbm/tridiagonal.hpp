#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "frbm/error.hpp"

namespace frbm {

/// Symmetric tridiagonal matrix: diag (n) and first off-diagonal (n-1).
struct SymTridiagonal {
  std::vector<double> diag;
  std::vector<double> off;

  SymTridiagonal() = default;
  explicit SymTridiagonal(std::size_t n) : diag(n, 0.0), off(n > 0 ? n - 1 : 0, 0.0) {}

  std::size_t size() const { return diag.size(); }

  /// this += alpha * other
  void axpy(double alpha, const SymTridiagonal& other) {
    for (std::size_t i = 0; i < diag.size(); ++i) diag[i] += alpha * other.diag[i];
    for (std::size_t i = 0; i < off.size(); ++i) off[i] += alpha * other.off[i];
  }

  /// Leading principal submatrix of order n.
  SymTridiagonal leading(std::size_t n) const {
    SymTridiagonal t(n);
    std::copy_n(diag.begin(), n, t.diag.begin());
    if (n > 0) std::copy_n(off.begin(), n - 1, t.off.begin());
    return t;
  }

  double quadratic_form(std::span<const double> x) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < diag.size(); ++i) acc += diag[i] * x[i] * x[i];
    for (std::size_t i = 0; i < off.size(); ++i) acc += 2.0 * off[i] * x[i] * x[i + 1];
    return acc;
  }
};

inline SymTridiagonal linear_combination(double a, const SymTridiagonal& A, double b, const SymTridiagonal& B) {
  SymTridiagonal out(A.size());
  for (std::size_t i = 0; i < A.diag.size(); ++i) out.diag[i] = a * A.diag[i] + b * B.diag[i];
  for (std::size_t i = 0; i < A.off.size(); ++i) out.off[i] = a * A.off[i] + b * B.off[i];
  return out;
}

/// LDLᵀ factorization of a symmetric tridiagonal matrix (no pivoting).
/// Only succeeds for positive definite input; a nonpositive pivot is reported
/// through `positive`.
struct TridiagonalLDL {
  std::vector<double> d;  // pivots
  std::vector<double> l;  // unit lower bidiagonal multipliers
  bool positive = true;

  explicit TridiagonalLDL(const SymTridiagonal& A) : d(A.size()), l(A.size() > 0 ? A.size() - 1 : 0) {
    const std::size_t n = A.size();
    for (std::size_t i = 0; i < n; ++i) {
      double piv = A.diag[i];
      if (i > 0) piv -= l[i - 1] * A.off[i - 1];
      d[i] = piv;
      if (!(piv > 0.0)) positive = false;
      if (i + 1 < n) l[i] = A.off[i] / piv;
    }
  }

  /// Solves in place; valid whenever all pivots are nonzero.
  void solve_in_place(std::span<double> x) const {
    const std::size_t n = d.size();
    for (std::size_t i = 1; i < n; ++i) x[i] -= l[i - 1] * x[i - 1];
    for (std::size_t i = 0; i < n; ++i) x[i] /= d[i];
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= l[i] * x[i + 1];
  }
};

/// Number of eigenvalues of the pencil (A, B) strictly below sigma, for
/// symmetric tridiagonal A and positive definite tridiagonal B (Sylvester's
/// law of inertia applied to A - sigma B).
inline std::size_t pencil_count_below(const SymTridiagonal& A, const SymTridiagonal& B, double sigma) {
  const std::size_t n = A.size();
  std::size_t count = 0;
  double prev = 1.0;
  double prev_off = 0.0;
  const double tiny = std::numeric_limits<double>::min();
  for (std::size_t i = 0; i < n; ++i) {
    double piv = A.diag[i] - sigma * B.diag[i];
    if (i > 0) piv -= prev_off * prev_off / prev;
    if (piv == 0.0) piv = -tiny;
    if (piv < 0.0) ++count;
    prev = piv;
    if (i + 1 < n) prev_off = A.off[i] - sigma * B.off[i];
  }
  return count;
}

/// Rayleigh quotient xᵀAx / xᵀBx.
inline double pencil_rayleigh(const SymTridiagonal& A, const SymTridiagonal& B, std::span<const double> x) {
  return A.quadratic_form(x) / B.quadratic_form(x);
}

/// Eigenvector of the pencil (A, B) for an eigenvalue close to `shift` by
/// inverse iteration with B-normalization.
inline std::vector<double> pencil_eigenvector(const SymTridiagonal& A, const SymTridiagonal& B, double shift,
                                              int iterations = 6) {
  const std::size_t n = A.size();
  SymTridiagonal shifted = linear_combination(1.0, A, -shift, B);
  // Perturb the shift slightly so the factorization stays regular.
  const double scale = std::max(std::abs(shift), std::numeric_limits<double>::min());
  for (std::size_t i = 0; i < n; ++i) shifted.diag[i] -= 1e-13 * scale * B.diag[i];
  TridiagonalLDL ldl(shifted);
  std::vector<double> x(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 1e-3 * static_cast<double>(i % 7);
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = B.diag[i] * x[i];
      if (i > 0) y[i] += B.off[i - 1] * x[i - 1];
      if (i + 1 < n) y[i] += B.off[i] * x[i + 1];
    }
    ldl.solve_in_place(y);
    const double norm = std::sqrt(B.quadratic_form(y));
    if (!(norm > 0.0) || !std::isfinite(norm)) break;
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / norm;
  }
  return x;
}

}  // namespace frbm
