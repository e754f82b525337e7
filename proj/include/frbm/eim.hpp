#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "frbm/error.hpp"
#include "frbm/mesh.hpp"
#include "frbm/parameter.hpp"

namespace frbm {

// Empirical interpolation of the extension weight on the two s-pieces:
//   D1: h(y;s)   = y^(1-2s)  on [0, y_plus]
//   D2: y h(y;s) = y^(2-2s)  on [y_-, y_plus], y_- > 0
// Either way the operator weight of snapshot q is the pure power
// y^(1-2 s_q), which keeps the affine components in closed form.

/// Function being interpolated on a subdomain.
inline double eim_target(Subdomain d, double y, double s) {
  if (d == Subdomain::D1) {
    const double a = 1.0 - 2.0 * s;
    if (y == 0.0) return a > 0.0 ? 0.0 : 1.0;
    return std::pow(y, a);
  }
  return y == 0.0 ? 0.0 : std::pow(y, 2.0 - 2.0 * s);
}

namespace detail {

#if defined(__SIZEOF_FLOAT128__)
using wide_real = __float128;
#else
using wide_real = long double;
#endif

// LU with partial pivoting of a small dense matrix in wide precision. The
// raw-snapshot interpolation matrix is close to singular (condition numbers
// up to 1e17), so cardinal coefficients need more than double precision.
class WideLU {
 public:
  WideLU() = default;
  explicit WideLU(const Eigen::MatrixXd& A) : n_(static_cast<std::size_t>(A.rows())), lu_(n_ * n_), perm_(n_) {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) at(i, j) = A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    for (std::size_t i = 0; i < n_; ++i) perm_[i] = i;
    for (std::size_t k = 0; k < n_; ++k) {
      std::size_t p = k;
      for (std::size_t i = k + 1; i < n_; ++i)
        if (abs_wide(at(i, k)) > abs_wide(at(p, k))) p = i;
      if (at(p, k) == 0) throw NumericalError("EIM: singular interpolation matrix");
      if (p != k) {
        for (std::size_t j = 0; j < n_; ++j) std::swap(at(k, j), at(p, j));
        std::swap(perm_[k], perm_[p]);
      }
      for (std::size_t i = k + 1; i < n_; ++i) {
        at(i, k) /= at(k, k);
        for (std::size_t j = k + 1; j < n_; ++j) at(i, j) -= at(i, k) * at(k, j);
      }
    }
  }

  std::vector<double> solve(const std::vector<double>& b) const {
    std::vector<wide_real> x(n_);
    for (std::size_t i = 0; i < n_; ++i) x[i] = b[perm_[i]];
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < i; ++j) x[i] -= at(i, j) * x[j];
    for (std::size_t i = n_; i-- > 0;) {
      for (std::size_t j = i + 1; j < n_; ++j) x[i] -= at(i, j) * x[j];
      x[i] /= at(i, i);
    }
    std::vector<double> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = static_cast<double>(x[i]);
    return out;
  }

 private:
  static wide_real abs_wide(wide_real v) { return v < 0 ? -v : v; }
  wide_real& at(std::size_t i, std::size_t j) { return lu_[i * n_ + j]; }
  const wide_real& at(std::size_t i, std::size_t j) const { return lu_[i * n_ + j]; }

  std::size_t n_ = 0;
  std::vector<wide_real> lu_;
  std::vector<std::size_t> perm_;
};

}  // namespace detail

/// Greedy empirical interpolation model of one subdomain.
struct EIMModel {
  Subdomain subdomain = Subdomain::D1;
  std::vector<double> s_snapshots;
  std::vector<double> magic_points;
  std::vector<std::size_t> magic_indices;  // into y_grid
  // Q×Q unit lower-triangular matrix of the pivot-scaled residual basis,
  // interp_matrix(i, j) = q_j(y_i).
  Eigen::MatrixXd interp_matrix;
  // Q×Q matrix of raw snapshots, raw_matrix(i, j) = h_j(y_i).
  Eigen::MatrixXd raw_matrix;
  std::vector<double> y_grid;
  std::vector<double> s_grid;
  // error_history[q] = sup over s_grid × y_grid of |h - h_EIM| with q terms.
  std::vector<double> error_history;

  std::size_t size() const { return s_snapshots.size(); }

  /// Power of the operator weight attached to snapshot q.
  double weight_exponent(std::size_t q) const { return 1.0 - 2.0 * s_snapshots[q]; }

  /// Rebuilds the cached factorization after the data fields change.
  void prepare() { lu_ = std::make_shared<detail::WideLU>(raw_matrix); }

  const detail::WideLU& lu() const {
    if (!lu_) throw NumericalError("EIM model used before prepare()");
    return *lu_;
  }

  /// Leading q-term model (same snapshots, magic points and matrix minors).
  EIMModel truncated(std::size_t q) const {
    if (q == 0 || q > size()) throw ConfigError("EIM truncation out of range");
    EIMModel t = *this;
    t.s_snapshots.resize(q);
    t.magic_points.resize(q);
    t.magic_indices.resize(q);
    t.interp_matrix = interp_matrix.topLeftCorner(q, q);
    t.raw_matrix = raw_matrix.topLeftCorner(q, q);
    t.error_history.resize(q + 1);
    t.prepare();
    return t;
  }

 private:
  std::shared_ptr<const detail::WideLU> lu_;
};

inline EIMModel eim_build(Subdomain subdomain, std::vector<double> y_grid, std::vector<double> s_grid,
                          std::size_t q_max, double tol) {
  if (y_grid.empty() || s_grid.empty()) throw ConfigError("EIM: empty grid");
  if (q_max == 0) throw ConfigError("EIM: Q_max must be >= 1");
  for (double y : y_grid) {
    if (!(y >= 0.0) || !std::isfinite(y)) throw ConfigError("EIM: y grid must be finite and nonnegative");
    if (y == 0.0 && subdomain == Subdomain::D2) throw ConfigError("EIM: the D2 y grid must exclude y = 0");
  }
  for (double s : s_grid) {
    if (!in_subdomain(subdomain, s)) throw ConfigError("EIM: s grid leaves the subdomain");
  }

  const auto ns = static_cast<Eigen::Index>(s_grid.size());
  const auto ny = static_cast<Eigen::Index>(y_grid.size());
  Eigen::MatrixXd residual(ns, ny);
  for (Eigen::Index i = 0; i < ns; ++i)
    for (Eigen::Index j = 0; j < ny; ++j)
      residual(i, j) = eim_target(subdomain, y_grid[static_cast<std::size_t>(j)], s_grid[static_cast<std::size_t>(i)]);

  EIMModel model;
  model.subdomain = subdomain;
  const double scale = residual.cwiseAbs().maxCoeff();
  model.error_history.push_back(scale);
  std::vector<Eigen::RowVectorXd> basis_rows;

  while (model.size() < q_max && model.error_history.back() >= tol) {
    Eigen::Index is = 0;
    Eigen::Index jy = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < ns; ++i)
      for (Eigen::Index j = 0; j < ny; ++j)
        if (std::abs(residual(i, j)) > best) {
          best = std::abs(residual(i, j));
          is = i;
          jy = j;
        }
    // Residual at round-off: further terms would interpolate noise.
    if (best <= 1e-14 * scale) break;
    const Eigen::RowVectorXd q_row = residual.row(is) / residual(is, jy);
    const Eigen::VectorXd col = residual.col(jy);
    residual.noalias() -= col * q_row;
    basis_rows.push_back(q_row);
    model.s_snapshots.push_back(s_grid[static_cast<std::size_t>(is)]);
    model.magic_indices.push_back(static_cast<std::size_t>(jy));
    model.magic_points.push_back(y_grid[static_cast<std::size_t>(jy)]);
    model.error_history.push_back(residual.cwiseAbs().maxCoeff());
  }

  const auto Q = static_cast<Eigen::Index>(model.size());
  model.interp_matrix.resize(Q, Q);
  model.raw_matrix.resize(Q, Q);
  for (Eigen::Index i = 0; i < Q; ++i) {
    for (Eigen::Index j = 0; j < Q; ++j) {
      model.interp_matrix(i, j) = basis_rows[static_cast<std::size_t>(j)](
          static_cast<Eigen::Index>(model.magic_indices[static_cast<std::size_t>(i)]));
      model.raw_matrix(i, j) = eim_target(subdomain, model.magic_points[static_cast<std::size_t>(i)],
                                          model.s_snapshots[static_cast<std::size_t>(j)]);
    }
  }
  model.y_grid = std::move(y_grid);
  model.s_grid = std::move(s_grid);
  model.prepare();
  return model;
}

/// Cardinal (raw-snapshot) coefficients θ(s): h_EIM(y;s) = Σ_j θ_j(s) h_j(y),
/// interpolating the subdomain target at every magic point.
inline std::vector<double> eim_eval_theta(const EIMModel& model, double s) {
  if (!in_subdomain(model.subdomain, s)) {
    throw ConfigError("EIM: s = " + std::to_string(s) + " outside subdomain " + to_string(model.subdomain));
  }
  std::vector<double> rhs(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) rhs[i] = eim_target(model.subdomain, model.magic_points[i], s);
  return model.lu().solve(rhs);
}

/// Value of the interpolant of the subdomain target (h on D1, y·h on D2).
inline double eim_interpolant(const EIMModel& model, const std::vector<double>& theta, double y) {
  double acc = 0.0;
  for (std::size_t j = 0; j < model.size(); ++j) acc += theta[j] * eim_target(model.subdomain, y, model.s_snapshots[j]);
  return acc;
}

/// Interpolated extension weight h_EIM(y;s) = Σ θ_j y^(1-2 s_j) (both subdomains).
inline double eim_weight(const EIMModel& model, const std::vector<double>& theta, double y) {
  double acc = 0.0;
  for (std::size_t j = 0; j < model.size(); ++j) acc += theta[j] * std::pow(y, model.weight_exponent(j));
  return acc;
}

/// max |target - interpolant| over a product grid.
inline double eim_sup_error(const EIMModel& model, const std::vector<double>& s_values,
                            const std::vector<double>& y_values) {
  double worst = 0.0;
  for (double s : s_values) {
    const auto theta = eim_eval_theta(model, s);
    for (double y : y_values) {
      worst = std::max(worst, std::abs(eim_target(model.subdomain, y, s) - eim_interpolant(model, theta, y)));
    }
  }
  return worst;
}

/// Sign check of the interpolated weight on the model's y grid.
struct EIMPositivity {
  double min_weight = std::numeric_limits<double>::infinity();
  double argmin_s = 0.0;
  double argmin_y = 0.0;
  std::size_t negative_count = 0;
};

inline EIMPositivity eim_positivity(const EIMModel& model, const std::vector<double>& s_values) {
  EIMPositivity report;
  for (double s : s_values) {
    const auto theta = eim_eval_theta(model, s);
    for (double y : model.y_grid) {
      if (y == 0.0) continue;
      const double w = eim_weight(model, theta, y);
      if (w <= 0.0) ++report.negative_count;
      if (w < report.min_weight) {
        report.min_weight = w;
        report.argmin_s = s;
        report.argmin_y = y;
      }
    }
  }
  return report;
}

/// Graded EIM y-grid for a subdomain: refine×M_fe intervals with the given
/// grading; D2 drops y = 0 so its lower end is the first nonzero node.
inline std::vector<double> eim_y_grid(Subdomain d, int m_fe, int refine, double gamma, double y_plus) {
  const GradedInterval g = build_graded_partition(m_fe * refine, gamma, y_plus);
  std::vector<double> grid = g.nodes;
  if (d == Subdomain::D2) grid.erase(grid.begin());
  return grid;
}

/// n equispaced points on [lo, hi].
inline std::vector<double> equispaced(double lo, double hi, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {0.5 * (lo + hi)};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  out.back() = hi;
  return out;
}

}  // namespace frbm
