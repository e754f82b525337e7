#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "frbm/eim.hpp"
#include "frbm/error.hpp"
#include "frbm/parallel.hpp"
#include "frbm/rhs.hpp"
#include "frbm/truth.hpp"

namespace frbm {

/// Offline residual data: the Riesz representers (w.r.t. the reference Gram
/// G) of the loads F_p and of Â_q ξ_n, G-orthonormalized as Z = V R. The
/// residual functional of an online solution has coefficient vector
/// w = (ρ_p, -Θ_q c_n) in that family, so its dual norm is ‖R w‖₂.
struct RieszData {
  Matrix R;  // rank × (P + Q·N), columns ordered [loads | (n, q) pairs n-major]
  std::size_t num_loads = 0;
  std::size_t num_components = 0;
  std::size_t num_basis = 0;
  std::size_t column(std::size_t n, std::size_t q) const { return num_loads + n * num_components + q; }
};

/// Reduced model of one subdomain. Online evaluation needs the EIM model (for
/// Θ), the reduced operators/loads, the triangular change of basis and the
/// stored traces, none of which has truth size.
struct ReducedModel {
  Subdomain subdomain = Subdomain::D1;
  RhsSpec rhs;
  EIMModel eim;
  std::vector<Parameter> mu_snapshots;
  // raw snapshot n = Σ_m basis(:, m) R(m, n); basis is G-orthonormal.
  Matrix basis;
  Matrix R;
  std::vector<Matrix> reduced_ops;    // per q: (ξ_m, Â_q ξ_n)
  std::vector<Vector> reduced_loads;  // per p: (F_p, ξ_n)
  Matrix trace_snapshots;             // #2D vertices × N, raw snapshot traces
  Matrix trace_gram;                  // N × N L²(Ω) Gram of the raw traces
  RieszData riesz;

  std::size_t size() const { return mu_snapshots.size(); }

  /// Leading n-snapshot model (all offline quantities are nested).
  ReducedModel truncated(std::size_t n) const {
    if (n > size()) throw ConfigError("reduced model truncation beyond N");
    ReducedModel t = *this;
    t.mu_snapshots.resize(n);
    if (basis.cols() > 0) t.basis = basis.leftCols(static_cast<Eigen::Index>(n));
    const auto ni = static_cast<Eigen::Index>(n);
    t.R = R.topLeftCorner(ni, ni);
    for (auto& A : t.reduced_ops) A = A.topLeftCorner(ni, ni).eval();
    for (auto& f : t.reduced_loads) f = f.head(ni).eval();
    t.trace_snapshots = trace_snapshots.leftCols(ni);
    t.trace_gram = trace_gram.topLeftCorner(ni, ni);
    if (riesz.R.cols() > 0) {
      const auto cols = static_cast<Eigen::Index>(riesz.num_loads + n * riesz.num_components);
      // R is upper trapezoidal in column order, so leading columns are self-contained.
      t.riesz.R = riesz.R.leftCols(cols);
      t.riesz.num_basis = n;
    }
    return t;
  }
};

/// Θ_q(μ) = θ_q(s)/d_s for a reduced model.
inline std::vector<double> model_theta(const ReducedModel& model, const Parameter& mu) {
  std::vector<double> t = eim_eval_theta(model.eim, mu.s);
  const double d = extension_constant(mu.s);
  for (double& v : t) v /= d;
  return t;
}

struct OnlineSolution {
  Parameter mu;
  Vector c_orth;  // coefficients in the orthonormal basis
  Vector c;       // Lagrange coefficients in the raw-snapshot basis
};

inline Matrix reduced_operator(const ReducedModel& model, const std::vector<double>& theta) {
  const auto n = static_cast<Eigen::Index>(model.size());
  Matrix A = Matrix::Zero(n, n);
  for (std::size_t q = 0; q < theta.size(); ++q) A += theta[q] * model.reduced_ops[q];
  return A;
}

inline Vector reduced_load(const ReducedModel& model, const std::vector<double>& rho) {
  Vector f = Vector::Zero(static_cast<Eigen::Index>(model.size()));
  for (std::size_t p = 0; p < rho.size(); ++p) f += rho[p] * model.reduced_loads[p];
  return f;
}

inline OnlineSolution online_solve(const ReducedModel& model, const Parameter& mu) {
  if (!in_subdomain(model.subdomain, mu.s)) {
    throw ConfigError("online_solve: s = " + std::to_string(mu.s) + " outside subdomain " + to_string(model.subdomain));
  }
  OnlineSolution out;
  out.mu = mu;
  const auto n = static_cast<Eigen::Index>(model.size());
  if (n == 0) {
    out.c_orth = out.c = Vector();
    return out;
  }
  const Matrix A = reduced_operator(model, model_theta(model, mu));
  const Vector f = reduced_load(model, rhs_coefficients(model.rhs, mu.nu));
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
    throw NumericalError("online_solve: reduced system not positive definite (smallest eigenvalue " +
                         std::to_string(es.eigenvalues()[0]) + ")");
  }
  out.c_orth = llt.solve(f);
  out.c = model.R.triangularView<Eigen::Upper>().solve(out.c_orth);
  return out;
}

inline Field2D online_trace(const ReducedModel& model, const Vector& c) {
  if (c.size() == 0) return Field2D::Zero(model.trace_snapshots.rows());
  return model.trace_snapshots * c;
}

inline Field2D online_trace(const ReducedModel& model, const Parameter& mu) {
  return online_trace(model, online_solve(model, mu).c);
}

/// Appends a truth solution to the model: CGS2 in the reference inner
/// product, reduced operator/load update and trace storage. Returns false
/// (model untouched) when the snapshot is numerically dependent.
inline bool extend_reduced_model(ReducedModel& model, const AffineTruthOperator& op,
                                 const std::vector<Vector>& loads, const TruthSolution& snap) {
  const TruthDiscretization& truth = op.truth();
  const TensorBasis& basis = truth.basis();
  const Vector& u = snap.coeffs;
  const auto N = static_cast<Eigen::Index>(model.size());
  const double unorm = truth.reference_norm(u);
  if (!(unorm > 0.0)) return false;

  Vector v = u;
  Vector r = Vector::Zero(N);
  for (int pass = 0; pass < 2; ++pass) {
    if (N == 0) break;
    const Vector Gv = kronecker_apply(basis, truth.reference(), v);
    const Vector proj = model.basis.transpose() * Gv;
    v -= model.basis * proj;
    r += proj;
  }
  const double rem = truth.reference_norm(v);
  if (rem < 1e-12 * unorm) return false;
  v /= rem;

  model.basis.conservativeResize(u.size(), N + 1);
  model.basis.col(N) = v;
  model.R.conservativeResize(N + 1, N + 1);
  model.R.row(N).setZero();
  model.R.col(N).head(N) = r;
  model.R(N, N) = rem;

  const WideMatrix Vb = model.basis.cast<long double>();
  const WideVector vw = v.cast<long double>();
  if (model.reduced_ops.empty()) model.reduced_ops.assign(op.size(), Matrix());
  for (std::size_t q = 0; q < op.size(); ++q) {
    const WideVector Av = kronecker_apply_wide(basis, op.component(q), vw);
    const Vector col = (Vb.transpose() * Av).cast<double>();
    Matrix& A = model.reduced_ops[q];
    A.conservativeResize(N + 1, N + 1);
    A.col(N) = col;
    A.row(N) = col.transpose();
  }
  if (model.reduced_loads.empty()) model.reduced_loads.assign(loads.size(), Vector());
  for (std::size_t p = 0; p < loads.size(); ++p) {
    Vector& f = model.reduced_loads[p];
    f.conservativeResize(N + 1);
    f[N] = loads[p].dot(v);
  }

  const Field2D tr = truth.trace_bottom(u);
  const SparseMatrix& mass = truth.p1().mass;
  if (model.trace_snapshots.rows() == 0) model.trace_snapshots.resize(tr.size(), 0);
  model.trace_snapshots.conservativeResize(Eigen::NoChange, N + 1);
  model.trace_snapshots.col(N) = tr;
  const Vector Mtr = mass * tr;
  const Vector g = model.trace_snapshots.transpose() * Mtr;
  model.trace_gram.conservativeResize(N + 1, N + 1);
  model.trace_gram.col(N) = g;
  model.trace_gram.row(N) = g.transpose();

  model.mu_snapshots.push_back(snap.mu);
  return true;
}

/// L²(Ω) norm of Σ c_n tr(snapshot n) from the trace Gram matrix.
inline double trace_l2_norm(const ReducedModel& model, const Vector& c) {
  return std::sqrt(std::max(0.0, c.dot(model.trace_gram * c)));
}

/// Per-point trace errors of the reduced model against the EIM truth (ℰ) and
/// against the exact-weight truth (ℱ).
struct ErrorEnsemble {
  std::vector<Parameter> points;
  std::vector<double> eim_errors;    // ℰ_N
  std::vector<double> exact_errors;  // ℱ_N
  std::vector<double> truth_gap;     // ‖tr(𝒰^𝒩 - 𝒱^𝒩)‖
};

struct EnsembleStats {
  double median = 0.0;
  double max = 0.0;
  double min = 0.0;
};

inline EnsembleStats ensemble_stats(std::vector<double> v) {
  EnsembleStats s;
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  s.max = v.back();
  s.min = v.front();
  return s;
}

/// Truth traces at a set of parameters, cached for repeated error sweeps.
struct TruthTraces {
  std::vector<Parameter> points;
  std::vector<Field2D> eim;
  std::vector<Field2D> exact;
};

inline TruthTraces compute_truth_traces(const AffineTruthOperator& op, const std::vector<Vector>& loads,
                                        const RhsSpec& rhs, const std::vector<Parameter>& points,
                                        bool with_exact, int threads = 0) {
  TruthTraces out;
  out.points = points;
  out.eim.resize(points.size());
  if (with_exact) out.exact.resize(points.size());
  parallel_for(points.size(), threads, [&](std::size_t i) {
    const Vector F = combine_loads(loads, rhs_coefficients(rhs, points[i].nu));
    out.eim[i] = op.truth().trace_bottom(solve_truth(op, points[i], F).coeffs);
    if (with_exact) out.exact[i] = op.truth().trace_bottom(solve_truth_exact_weight(op.truth(), points[i], F).coeffs);
  });
  return out;
}

inline ErrorEnsemble error_ensembles(const ReducedModel& model, const TruthDiscretization& truth,
                                     const TruthTraces& traces, int threads = 0) {
  ErrorEnsemble e;
  e.points = traces.points;
  const std::size_t P = traces.points.size();
  e.eim_errors.resize(P);
  if (!traces.exact.empty()) {
    e.exact_errors.resize(P);
    e.truth_gap.resize(P);
  }
  parallel_for(P, threads, [&](std::size_t i) {
    const Field2D uN = online_trace(model, traces.points[i]);
    e.eim_errors[i] = truth.l2_norm_omega(traces.eim[i] - uN);
    if (!traces.exact.empty()) {
      e.exact_errors[i] = truth.l2_norm_omega(traces.exact[i] - uN);
      e.truth_gap[i] = truth.l2_norm_omega(traces.exact[i] - traces.eim[i]);
    }
  });
  return e;
}

}  // namespace frbm
