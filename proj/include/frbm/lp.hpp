#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "frbm/error.hpp"

namespace frbm {

struct LPResult {
  double value = 0.0;          // dual bound at lambda: never above the true minimum
  double primal_value = 0.0;   // cᵀx
  Eigen::VectorXd x;           // primal solution (feasible up to rounding)
  Eigen::VectorXd lambda;      // multipliers of A x ≥ b, all ≥ 0
};

/// Weak-duality bound bᵀλ + Σ_j min(lo_j r_j, hi_j r_j), r = c - Aᵀλ, valid
/// for any λ ≥ 0.
inline double lp_dual_bound(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                            const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, const Eigen::VectorXd& lambda) {
  const Eigen::VectorXd r = c - A.transpose() * lambda;
  double acc = b.dot(lambda);
  for (Eigen::Index j = 0; j < r.size(); ++j) acc += std::min(lo[j] * r[j], hi[j] * r[j]);
  return acc;
}

namespace detail {

// Dense tableau simplex with Bland's rule. Rows 0..m-1 are constraints in
// equality form with nonnegative right-hand side; row m is the objective
// (reduced costs, last entry = -objective value).
class Tableau {
 public:
  Tableau(Eigen::MatrixXd T, std::vector<int> basis, double tol) : T_(std::move(T)), basis_(std::move(basis)), tol_(tol) {}

  // Minimizes the objective row over columns [0, ncols_allowed).
  void optimize(Eigen::Index ncols_allowed) {
    const Eigen::Index m = T_.rows() - 1;
    const Eigen::Index rhs = T_.cols() - 1;
    for (int guard = 0; guard < 100000; ++guard) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < ncols_allowed; ++j) {
        if (T_(m, j) < -tol_) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return;
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < m; ++i) {
        if (T_(i, enter) > 1e-9) {
          // Rounding can leave a basic value slightly negative; it counts as 0.
          const double ratio = std::max(T_(i, rhs), 0.0) / T_(i, enter);
          if (ratio < best - tol_ || (std::abs(ratio - best) <= tol_ && leave >= 0 && basis_[i] < basis_[leave])) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) throw NumericalError("LP: objective unbounded below");
      pivot(leave, enter);
    }
    throw NumericalError("LP: simplex iteration limit reached");
  }

  void pivot(Eigen::Index r, Eigen::Index c) {
    T_.row(r) /= T_(r, c);
    for (Eigen::Index i = 0; i < T_.rows(); ++i) {
      if (i != r && T_(i, c) != 0.0) T_.row(i) -= T_(i, c) * T_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = static_cast<int>(c);
  }

  Eigen::MatrixXd& table() { return T_; }
  std::vector<int>& basis() { return basis_; }

 private:
  Eigen::MatrixXd T_;
  std::vector<int> basis_;
  double tol_;
};

}  // namespace detail

/// minimize cᵀx  subject to  A x ≥ b,  lo ≤ x ≤ hi  (two-phase simplex on
/// the shifted and scaled variables τ = (x - lo)/(hi - lo) ∈ [0, 1]).
/// Variables whose box is narrower than 1e-12 relative are fixed at the end
/// minimizing their cost. The reported value is the dual bound at the
/// simplex multipliers, so rounding in the pivots can only lower it.
inline LPResult lp_minimize(const Eigen::VectorXd& c_in, const Eigen::MatrixXd& A_in, const Eigen::VectorXd& b_in,
                            const Eigen::VectorXd& lo_in, const Eigen::VectorXd& hi_in) {
  if ((hi_in - lo_in).minCoeff() < 0.0) throw NumericalError("LP: empty box");
  std::vector<Eigen::Index> free_vars;
  Eigen::VectorXd fixed = lo_in;
  for (Eigen::Index j = 0; j < c_in.size(); ++j) {
    const double width = hi_in[j] - lo_in[j];
    if (width > 1e-12 * std::max({1.0, std::abs(lo_in[j]), std::abs(hi_in[j])})) {
      free_vars.push_back(j);
    } else {
      fixed[j] = c_in[j] >= 0.0 ? lo_in[j] : hi_in[j];
    }
  }
  const auto n = static_cast<Eigen::Index>(free_vars.size());
  const Eigen::Index k = A_in.rows();
  Eigen::VectorXd width(n);
  Eigen::VectorXd c(n);
  Eigen::MatrixXd A(k, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index src = free_vars[static_cast<std::size_t>(j)];
    width[j] = hi_in[src] - lo_in[src];
    c[j] = c_in[src] * width[j];
    A.col(j) = A_in.col(src) * width[j];
  }
  // Right-hand side after fixing every variable at its lower end.
  Eigen::VectorXd base = fixed;
  for (Eigen::Index j = 0; j < n; ++j) base[free_vars[static_cast<std::size_t>(j)]] = lo_in[free_vars[static_cast<std::size_t>(j)]];
  Eigen::VectorXd bt = b_in - A_in * base;
  Eigen::VectorXd row_scale(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double rs = n > 0 ? std::max(A.row(i).cwiseAbs().maxCoeff(), std::numeric_limits<double>::min()) : 1.0;
    row_scale[i] = rs;
    A.row(i) /= rs;
    bt[i] /= rs;
  }
  const Eigen::VectorXd u = Eigen::VectorXd::Ones(n);

  // Columns: t (n) | surplus e (k) | bound slack w (n) | artificials (k) | rhs.
  const Eigen::Index m = k + n;
  const Eigen::Index ncol = n + k + n + k + 1;
  const Eigen::Index rhs = ncol - 1;
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m + 1, ncol);
  std::vector<int> basis(static_cast<std::size_t>(m));
  std::vector<bool> artificial_used(static_cast<std::size_t>(k), false);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (bt[i] <= 0.0) {
      // -A t + e = -bt with e basic.
      T.row(i).head(n) = -A.row(i);
      T(i, n + i) = 1.0;
      T(i, rhs) = -bt[i];
      basis[static_cast<std::size_t>(i)] = static_cast<int>(n + i);
    } else {
      T.row(i).head(n) = A.row(i);
      T(i, n + i) = -1.0;
      T(i, n + k + n + i) = 1.0;
      T(i, rhs) = bt[i];
      basis[static_cast<std::size_t>(i)] = static_cast<int>(n + k + n + i);
      artificial_used[static_cast<std::size_t>(i)] = true;
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    T(k + j, j) = 1.0;
    T(k + j, n + k + j) = 1.0;
    T(k + j, rhs) = u[j];
    basis[static_cast<std::size_t>(k + j)] = static_cast<int>(n + k + j);
  }

  const double scale = k > 0 ? std::max(1.0, bt.cwiseAbs().maxCoeff()) : 1.0;
  const double tol = 1e-11 * scale;

  // Phase 1: minimize the sum of artificials.
  for (Eigen::Index i = 0; i < k; ++i) {
    if (artificial_used[static_cast<std::size_t>(i)]) T.row(m) -= T.row(i);
    if (artificial_used[static_cast<std::size_t>(i)]) T(m, n + k + n + i) += 1.0;
  }
  detail::Tableau tab(std::move(T), std::move(basis), tol);
  tab.optimize(ncol - 1);
  if (-tab.table()(m, rhs) > 1e-9 * scale) throw NumericalError("LP: infeasible constraints");
  // Drive remaining (zero-level) artificials out of the basis.
  for (Eigen::Index i = 0; i < m; ++i) {
    if (tab.basis()[static_cast<std::size_t>(i)] >= n + k + n) {
      Eigen::Index j_best = 0;
      tab.table().row(i).head(n + k + n).cwiseAbs().maxCoeff(&j_best);
      if (std::abs(tab.table()(i, j_best)) > 1e-9) tab.pivot(i, j_best);
    }
  }

  // Phase 2 objective row from the reduced costs of c.
  Eigen::MatrixXd& Tb = tab.table();
  Tb.row(m).setZero();
  Tb.row(m).head(n) = c.transpose();
  for (Eigen::Index i = 0; i < m; ++i) {
    const int bj = tab.basis()[static_cast<std::size_t>(i)];
    if (bj < n && Tb(m, bj) != 0.0) Tb.row(m) -= Tb(m, bj) * Tb.row(i);
  }
  // Artificial columns are excluded from entering.
  tab.optimize(n + k + n);

  // The tableau drifts when the optimal basis is ill-conditioned (nearly
  // parallel constraint rows), so the basic solution and the multipliers are
  // recomputed from the original data in extended precision.
  Eigen::VectorXd t_basic = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const int bj = tab.basis()[static_cast<std::size_t>(i)];
    if (bj < n) t_basic[bj] = Tb(i, rhs);
  }
  Eigen::VectorXd lambda_scaled = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < k; ++i) lambda_scaled[i] = std::max(0.0, Tb(m, n + i));
  const bool artificial_basic = std::any_of(tab.basis().begin(), tab.basis().end(), [&](int bj) { return bj >= n + k + n; });
  Eigen::VectorXd lambda_refined;
  if (!artificial_basic && m > 0) {
    using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using LVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    LMatrix B = LMatrix::Zero(m, m);
    LVector rhs_l(m);
    LVector cb = LVector::Zero(m);
    for (Eigen::Index i = 0; i < k; ++i) rhs_l[i] = static_cast<long double>(bt[i]);
    for (Eigen::Index j = 0; j < n; ++j) rhs_l[k + j] = 1.0L;
    for (Eigen::Index col = 0; col < m; ++col) {
      const int bj = tab.basis()[static_cast<std::size_t>(col)];
      if (bj < n) {
        for (Eigen::Index i = 0; i < k; ++i) B(i, col) = static_cast<long double>(A(i, bj));
        B(k + bj, col) = 1.0L;
        cb[col] = static_cast<long double>(c[bj]);
      } else if (bj < n + k) {
        B(bj - n, col) = -1.0L;
      } else {
        B(k + (bj - n - k), col) = 1.0L;
      }
    }
    const Eigen::FullPivLU<LMatrix> lu(B);
    if (lu.isInvertible()) {
      const LVector xb = lu.solve(rhs_l);
      const LVector y = lu.transpose().solve(cb);
      t_basic.setZero();
      for (Eigen::Index col = 0; col < m; ++col) {
        const int bj = tab.basis()[static_cast<std::size_t>(col)];
        if (bj < n) t_basic[bj] = static_cast<double>(xb[col]);
      }
      lambda_refined = Eigen::VectorXd::Zero(k);
      for (Eigen::Index i = 0; i < k; ++i) lambda_refined[i] = std::max(0.0, static_cast<double>(y[i])) / row_scale[i];
    }
  }

  LPResult res;
  res.x = base;
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index src = free_vars[static_cast<std::size_t>(j)];
    res.x[src] += std::clamp(t_basic[j], 0.0, 1.0) * width[j];
  }
  res.primal_value = c_in.dot(res.x);
  // Reduced cost of surplus column i is the multiplier of scaled row i.
  res.lambda = lambda_scaled.cwiseQuotient(row_scale);
  res.value = lp_dual_bound(c_in, A_in, b_in, lo_in, hi_in, res.lambda);
  if (lambda_refined.size() == k) {
    const double refined = lp_dual_bound(c_in, A_in, b_in, lo_in, hi_in, lambda_refined);
    if (refined > res.value) {
      res.value = refined;
      res.lambda = lambda_refined;
    }
  }
  return res;
}

}  // namespace frbm
