#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "frbm/error.hpp"
#include "frbm/lp.hpp"
#include "frbm/oracle.hpp"
#include "frbm/rbm.hpp"
#include "frbm/truth.hpp"

// Certification in the reference inner product G = Â at s = 1/2 (the
// unweighted cylinder Dirichlet form restricted to free dofs).
//
// With e = 𝒰^𝒩 - 𝒰_N and a(e, v) = r(v):
//   β ‖e‖²_G ≤ a(e, e) = r(e) ≤ ‖r‖_{G'} ‖e‖_G      (β = coercivity w.r.t. G)
//   a(e, e) ≤ Λ ‖e‖²_G                              (Λ = continuity w.r.t. G)
// so a(e, e)^½ ≤ √Λ ‖r‖_{G'} / β. The X_h norm satisfies ‖e‖²_{X_h} = d_s a(e, e)
// for the exact-weight form, and the trace estimate ‖tr e‖_{ℍ^s} ≤ d_s^-½ ‖e‖_{X_h}
// turns this into Δ_N = √Λ ‖r‖_{G'} / β_LB with no explicit d_s.
//
// All spectral quantities use the tensor structure: in the 2D eigenbasis of
// (S_x, M_x) every Kronecker-sum pencil splits into one tridiagonal pencil
// (λ_k M_y^A + S_y^A, λ_k M_y^B + S_y^B) per mode, so Sylvester inertia counts
// give exact eigenvalues by bisection.

namespace frbm {

// ---------------------------------------------------------------- residual

/// Incremental construction of RieszData. Keeps the G-orthonormal vectors
/// V (and G V) while the model grows; only the triangular factor is kept.
class RieszBuilder {
 public:
  explicit RieszBuilder(const AffineTruthOperator& op)
      : op_(&op), ginv_(op.truth().basis(), op.truth().reference()) {}

  void add_loads(const std::vector<Vector>& loads) {
    for (const auto& f : loads) add(f);
    data_.num_loads = loads.size();
    data_.num_components = op_->size();
  }

  /// Adds the representers of Â_q ξ for every component q.
  void add_basis_vector(const Vector& xi) {
    for (std::size_t q = 0; q < op_->size(); ++q) add(op_->apply_component(q, xi));
    ++data_.num_basis;
  }

  const RieszData& data() const { return data_; }

  /// Builds the Riesz data of an existing model from scratch.
  static RieszData build(const AffineTruthOperator& op, const std::vector<Vector>& loads, const Matrix& basis) {
    RieszBuilder b(op);
    b.add_loads(loads);
    for (Eigen::Index n = 0; n < basis.cols(); ++n) b.add_basis_vector(basis.col(n));
    return b.data();
  }

 private:
  Vector solve_reference(const Vector& b) const {
    const TruthDiscretization& truth = op_->truth();
    Vector z = ginv_.apply(b);
    z += ginv_.apply(b - kronecker_apply(truth.basis(), truth.reference(), z));
    return z;
  }

  void add(const Vector& b) {
    Vector z = solve_reference(b);
    Vector gz = b;
    const double norm = std::sqrt(std::max(0.0, z.dot(gz)));
    const auto rank = static_cast<Eigen::Index>(vz_.size());
    Vector h = Vector::Zero(rank);
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < rank; ++i) {
        const double c = vb_[static_cast<std::size_t>(i)].dot(z);
        z -= c * vz_[static_cast<std::size_t>(i)];
        h[i] += c;
      }
    }
    // G z is recomputed rather than updated: after heavy cancellation the
    // updated copy no longer matches z and orthogonality is lost.
    gz = kronecker_apply(op_->truth().basis(), op_->truth().reference(), z);
    const double rem = std::sqrt(std::max(0.0, z.dot(gz)));
    const auto col = data_.R.cols();
    const bool grow = norm > 0.0 && rem > 1e-13 * norm;
    const Eigen::Index new_rank = grow ? rank + 1 : rank;
    data_.R.conservativeResize(new_rank, col + 1);
    if (grow) data_.R.row(rank).setZero();
    data_.R.col(col).setZero();
    data_.R.col(col).head(rank) = h;
    if (grow) {
      data_.R(rank, col) = rem;
      vz_.push_back(z / rem);
      vb_.push_back(gz / rem);
    }
  }

  const AffineTruthOperator* op_;
  KroneckerInverse ginv_;
  std::vector<Vector> vz_;
  std::vector<Vector> vb_;
  RieszData data_;
};

/// Coefficients of the residual functional in the Riesz family.
inline Vector residual_weights(const ReducedModel& model, const std::vector<double>& theta,
                               const std::vector<double>& rho, const Vector& c_orth) {
  const RieszData& rd = model.riesz;
  Vector w = Vector::Zero(static_cast<Eigen::Index>(rd.num_loads + rd.num_components * rd.num_basis));
  for (std::size_t p = 0; p < rd.num_loads; ++p) w[static_cast<Eigen::Index>(p)] = rho[p];
  for (std::size_t n = 0; n < rd.num_basis; ++n)
    for (std::size_t q = 0; q < rd.num_components; ++q)
      w[static_cast<Eigen::Index>(rd.column(n, q))] = -theta[q] * c_orth[static_cast<Eigen::Index>(n)];
  return w;
}

/// ‖r(·; μ)‖ in the G-dual norm, from offline data only.
inline double residual_dual_norm(const ReducedModel& model, const Parameter& mu, const Vector& c_orth) {
  if (model.riesz.R.cols() == 0) throw ConfigError("residual_dual_norm: model has no Riesz data");
  const Vector w = residual_weights(model, model_theta(model, mu), rhs_coefficients(model.rhs, mu.nu), c_orth);
  return (model.riesz.R * w).norm();
}

/// Same quantity by a truth-sized computation: z = G⁻¹ r, √(zᵀ r).
inline double residual_dual_norm_direct(const AffineTruthOperator& op, const std::vector<Vector>& loads,
                                        const ReducedModel& model, const Parameter& mu, const Vector& c_orth) {
  const TruthDiscretization& truth = op.truth();
  Vector r = combine_loads(loads, rhs_coefficients(model.rhs, mu.nu));
  if (c_orth.size() > 0) {
    const Vector u = model.basis * c_orth;
    r -= kronecker_apply(truth.basis(), op.factors(mu), u);
  }
  const KroneckerInverse ginv(truth.basis(), truth.reference());
  Vector z = ginv.apply(r);
  z += ginv.apply(r - kronecker_apply(truth.basis(), truth.reference(), z));
  return std::sqrt(std::max(0.0, z.dot(r)));
}

// ---------------------------------------------------------- tensor pencils

namespace detail {

inline SymTridiagonal mode_matrix(double lambda, const YFactors& f) {
  return linear_combination(lambda, f.mass, 1.0, f.stiffness);
}

}  // namespace detail

/// Number of eigenvalues of the Kronecker pencil (A, B) below sigma.
inline std::size_t kronecker_count_below(const Vector& lambdas, const YFactors& A, const YFactors& B, double sigma) {
  std::size_t count = 0;
  for (Eigen::Index k = 0; k < lambdas.size(); ++k) {
    count += pencil_count_below(detail::mode_matrix(lambdas[k], A), detail::mode_matrix(lambdas[k], B), sigma);
  }
  return count;
}

/// Bracket [lo, hi] of an extreme eigenvalue.
struct EigenBracket {
  double lo = 0.0;
  double hi = 0.0;
  double mid() const { return 0.5 * (lo + hi); }
};

namespace detail {

template <class Pred>
EigenBracket bisect(double lo, double hi, Pred below_is_enough, double rel_tol) {
  // Invariant: predicate false at lo, true at hi.
  for (int it = 0; it < 400; ++it) {
    if (hi - lo <= rel_tol * std::max(std::abs(lo), std::abs(hi))) break;
    const double mid = (lo > 0.0 && hi > 0.0) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    if (below_is_enough(mid)) hi = mid;
    else lo = mid;
  }
  return {lo, hi};
}

inline double widen_down(double v) { return v - 1e-9 * std::abs(v) - 1e-300; }
inline double widen_up(double v) { return v + 1e-9 * std::abs(v) + 1e-300; }

}  // namespace detail

/// Smallest eigenvalue of the Kronecker pencil, starting from a lower guess
/// lo_guess and any Rayleigh quotient hi_guess.
inline EigenBracket kronecker_min_eigenvalue(const Vector& lambdas, const YFactors& A, const YFactors& B,
                                             double lo_guess, double hi_guess, double rel_tol = 1e-13) {
  double lo = detail::widen_down(std::min(lo_guess, hi_guess));
  double hi = detail::widen_up(hi_guess);
  for (int i = 0; kronecker_count_below(lambdas, A, B, lo) > 0; ++i) {
    if (i > 200) throw NumericalError("eigenvalue bracket: no lower end found");
    lo -= std::max(std::abs(lo), 1e-300) * 2.0;
  }
  for (int i = 0; kronecker_count_below(lambdas, A, B, hi) == 0; ++i) {
    if (i > 200) throw NumericalError("eigenvalue bracket: no upper end found");
    hi += std::max(std::abs(hi), 1e-300) * 2.0;
  }
  return detail::bisect(lo, hi, [&](double s) { return kronecker_count_below(lambdas, A, B, s) > 0; }, rel_tol);
}

inline EigenBracket kronecker_max_eigenvalue(const Vector& lambdas, const YFactors& A, const YFactors& B,
                                             double lo_guess, double hi_guess, double rel_tol = 1e-13) {
  const std::size_t total = static_cast<std::size_t>(lambdas.size()) * A.mass.size();
  double lo = detail::widen_down(lo_guess);
  double hi = detail::widen_up(std::max(lo_guess, hi_guess));
  for (int i = 0; kronecker_count_below(lambdas, A, B, lo) == total; ++i) {
    if (i > 200) throw NumericalError("eigenvalue bracket: no lower end found");
    lo -= std::max(std::abs(lo), 1e-300) * 2.0;
  }
  for (int i = 0; kronecker_count_below(lambdas, A, B, hi) < total; ++i) {
    if (i > 200) throw NumericalError("eigenvalue bracket: no upper end found");
    hi += std::max(std::abs(hi), 1e-300) * 2.0;
  }
  return detail::bisect(lo, hi, [&](double s) { return kronecker_count_below(lambdas, A, B, s) == total; }, rel_tol);
}

/// min/max over modes and levels of diagonal ratios: Rayleigh quotients of
/// unit vectors, hence an upper bound of the smallest and a lower bound of
/// the largest eigenvalue.
inline std::pair<double, double> diagonal_ratio_range(const Vector& lambdas, const YFactors& A, const YFactors& B) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k : {Eigen::Index{0}, lambdas.size() - 1}) {
    for (std::size_t m = 0; m < A.mass.size(); ++m) {
      const double r = (lambdas[k] * A.mass.diag[m] + A.stiffness.diag[m]) /
                       (lambdas[k] * B.mass.diag[m] + B.stiffness.diag[m]);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  }
  return {lo, hi};
}

// ------------------------------------------------------ element-wise bounds

/// Local weighted-interval data of one free y-element in the basis
/// (φ0+φ1, φ0-φ1):  mass = [P R; R Qm],  stiffness = diag(0, 4 s).
/// The top element keeps only its lower node, with mass m00 and stiffness s.
struct ElementTerms {
  double P = 0.0;
  double R = 0.0;
  double Qm = 0.0;
  double s = 0.0;
  double m00 = 0.0;
};

inline ElementTerms element_terms(double a_, double b_, double alpha) {
  const long double a = a_;
  const long double b = b_;
  const long double h = b - a;
  const long double c = 0.5L * (a + b);
  long double mom[3];
  for (int k = 0; k < 3; ++k) {
    const long double p = static_cast<long double>(alpha) + k + 1;
    mom[k] = (std::pow(b, p) - (a > 0 ? std::pow(a, p) : 0.0L)) / p;
  }
  // ∫ y^α (y - c)^j for j = 1, 2.
  const long double c1 = mom[1] - c * mom[0];
  const long double c2 = mom[2] - 2 * c * mom[1] + c * c * mom[0];
  ElementTerms t;
  t.P = static_cast<double>(mom[0]);
  t.R = static_cast<double>(-2.0L * c1 / h);
  t.Qm = static_cast<double>(4.0L * c2 / (h * h));
  t.s = static_cast<double>(mom[0] / (h * h));
  t.m00 = static_cast<double>((b * b * mom[0] - 2 * b * mom[1] + mom[2]) / (h * h));
  return t;
}

/// Per free element e and weight, the ElementTerms (index [e]).
inline std::vector<ElementTerms> interval_element_terms(const GradedInterval& interval, double alpha) {
  std::vector<ElementTerms> out(static_cast<std::size_t>(interval.M));
  for (int e = 0; e < interval.M; ++e) out[static_cast<std::size_t>(e)] = element_terms(interval.nodes[e], interval.nodes[e + 1], alpha);
  return out;
}

inline ElementTerms combine_terms(const std::vector<std::vector<ElementTerms>>& parts, const std::vector<double>& w,
                                  std::size_t e) {
  ElementTerms t;
  for (std::size_t q = 0; q < parts.size(); ++q) {
    const ElementTerms& x = parts[q][e];
    t.P += w[q] * x.P;
    t.R += w[q] * x.R;
    t.Qm += w[q] * x.Qm;
    t.s += w[q] * x.s;
    t.m00 += w[q] * x.m00;
  }
  return t;
}

namespace detail {

// Eigenvalues of the symmetric 2×2 pencil (A, B), B positive definite, after
// diagonal scaling of B to unit diagonal.
inline std::pair<double, double> pencil2_eigs(double a00, double a01, double a11, double b00, double b01, double b11) {
  const double d0 = 1.0 / std::sqrt(b00);
  const double d1 = 1.0 / std::sqrt(b11);
  const double c00 = a00 * d0 * d0;
  const double c01 = a01 * d0 * d1;
  const double c11 = a11 * d1 * d1;
  const double rho = b01 * d0 * d1;
  const double qa = 1.0 - rho * rho;
  const double qb = -(c00 + c11 - 2.0 * rho * c01);
  const double qc = c00 * c11 - c01 * c01;
  const double disc = std::max(0.0, qb * qb - 4.0 * qa * qc);
  const double root = -0.5 * (qb + (qb >= 0 ? 1.0 : -1.0) * std::sqrt(disc));
  double r1 = root / qa;
  double r2 = root != 0.0 ? qc / root : r1;
  if (r1 > r2) std::swap(r1, r2);
  return {r1, r2};
}

}  // namespace detail

/// Range [min, max] of the eigenvalues of all local pencils
/// (λ M_A + S_A, λ M_B + S_B) over free elements and λ ∈ {λ_min, λ_max},
/// widened by a rounding allowance. Every eigenvalue of the assembled
/// Kronecker pencil lies in this range.
inline std::pair<double, double> element_pencil_range(const std::vector<std::vector<ElementTerms>>& A_parts,
                                                      const std::vector<double>& A_coeffs,
                                                      const std::vector<ElementTerms>& B_terms, double lambda_min,
                                                      double lambda_max) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::vector<double> abs_coeffs(A_coeffs.size());
  for (std::size_t q = 0; q < A_coeffs.size(); ++q) abs_coeffs[q] = std::abs(A_coeffs[q]);
  const std::size_t ne = B_terms.size();
  for (std::size_t e = 0; e < ne; ++e) {
    const ElementTerms a = combine_terms(A_parts, A_coeffs, e);
    // Same pencil with |coefficients|: its spectrum bounds the size of the
    // terms that cancel in a, hence the rounding error of the result.
    const ElementTerms m = combine_terms(A_parts, abs_coeffs, e);
    const ElementTerms& b = B_terms[e];
    for (double lam : {lambda_min, lambda_max}) {
      if (e + 1 == ne) {
        const double r = (lam * a.m00 + a.s) / (lam * b.m00 + b.s);
        const double slack = 1e-10 * (lam * m.m00 + m.s) / (lam * b.m00 + b.s);
        lo = std::min(lo, r - slack);
        hi = std::max(hi, r + slack);
      } else {
        const auto [r1, r2] = detail::pencil2_eigs(lam * a.P, lam * a.R, lam * a.Qm + 4.0 * a.s, lam * b.P, lam * b.R,
                                                   lam * b.Qm + 4.0 * b.s);
        const double slack = 1e-10 * detail::pencil2_eigs(lam * m.P, lam * m.R, lam * m.Qm + 4.0 * m.s, lam * b.P,
                                                          lam * b.R, lam * b.Qm + 4.0 * b.s).second;
        lo = std::min(lo, r1 - slack);
        hi = std::max(hi, r2 + slack);
      }
    }
  }
  return {lo, hi};
}


// -------------------------------------------------------------------- SCM

/// Rayleigh data of a constraint point: the minimizing mode and y-vector,
/// and the component Rayleigh quotients at that vector.
struct RayleighData {
  int mode = 0;
  std::vector<double> y_vector;
  std::vector<double> component_quotients;
};

struct SCMModel {
  Subdomain subdomain = Subdomain::D1;
  std::vector<double> sigma_min;  // per component, w.r.t. G
  std::vector<double> sigma_max;
  std::vector<double> constraint_s;
  std::vector<std::vector<double>> constraint_theta;  // Θ(μ_k)
  std::vector<double> constraint_beta;                // lower end of the β̂(μ_k) bracket
  std::vector<RayleighData> rayleigh;
  double lambda_min = 0.0;  // ends of the 2D spectrum
  double lambda_max = 0.0;
  std::vector<std::vector<ElementTerms>> component_terms;  // [q][e]
  std::vector<ElementTerms> reference_terms;               // [e]

  std::size_t num_components() const { return sigma_min.size(); }
  std::size_t num_constraints() const { return constraint_s.size(); }

  /// Leading n-constraint model.
  SCMModel truncated(std::size_t n) const {
    SCMModel t = *this;
    n = std::min(n, constraint_s.size());
    t.constraint_s.resize(n);
    t.constraint_theta.resize(n);
    t.constraint_beta.resize(n);
    t.rayleigh.resize(n);
    return t;
  }
};

/// Element-level data of an operator (no spectra yet).
inline void scm_attach_elements(SCMModel& scm, const AffineTruthOperator& op) {
  const TruthDiscretization& truth = op.truth();
  const GradedInterval& interval = truth.mesh().interval();
  scm.subdomain = op.subdomain();
  scm.lambda_min = truth.basis().lambda_min();
  scm.lambda_max = truth.basis().lambda_max();
  scm.component_terms.clear();
  for (std::size_t q = 0; q < op.size(); ++q) {
    scm.component_terms.push_back(interval_element_terms(interval, op.eim().weight_exponent(q)));
  }
  scm.reference_terms = interval_element_terms(interval, 0.0);
}

/// Rigorous element-wise range of the spectrum of (Σ Θ_q Â_q, G).
inline std::pair<double, double> scm_element_range(const SCMModel& scm, const std::vector<double>& theta) {
  return element_pencil_range(scm.component_terms, theta, scm.reference_terms, scm.lambda_min, scm.lambda_max);
}

/// β̂(μ): smallest eigenvalue of (Σ Θ_q Â_q, G).
inline EigenBracket exact_coercivity(const AffineTruthOperator& op, const SCMModel& scm,
                                     const std::vector<double>& theta) {
  const TruthDiscretization& truth = op.truth();
  const YFactors A = combine_factors(op.components(), theta);
  const Vector& lambdas = truth.basis().eigenvalues();
  const double diag_hi = diagonal_ratio_range(lambdas, A, truth.reference()).first;
  const double elem_lo = scm_element_range(scm, theta).first;
  return kronecker_min_eigenvalue(lambdas, A, truth.reference(), elem_lo, diag_hi);
}

inline RayleighData coercivity_rayleigh(const AffineTruthOperator& op, const std::vector<double>& theta,
                                        const EigenBracket& beta) {
  const TruthDiscretization& truth = op.truth();
  const Vector& lambdas = truth.basis().eigenvalues();
  const YFactors A = combine_factors(op.components(), theta);
  RayleighData rd;
  for (Eigen::Index k = 0; k < lambdas.size(); ++k) {
    const auto Ak = detail::mode_matrix(lambdas[k], A);
    const auto Bk = detail::mode_matrix(lambdas[k], truth.reference());
    if (pencil_count_below(Ak, Bk, beta.hi) > 0) {
      rd.mode = static_cast<int>(k);
      rd.y_vector = pencil_eigenvector(Ak, Bk, beta.mid());
      break;
    }
  }
  if (rd.y_vector.empty()) throw NumericalError("SCM: no mode attains the coercivity bracket");
  const double lam = lambdas[rd.mode];
  const double denom = detail::mode_matrix(lam, truth.reference()).quadratic_form(rd.y_vector);
  for (std::size_t q = 0; q < op.size(); ++q) {
    rd.component_quotients.push_back(detail::mode_matrix(lam, op.component(q)).quadratic_form(rd.y_vector) / denom);
  }
  return rd;
}

/// LP part of the lower bound: min Σ Θ_q x_q over the box σ⁻ ≤ x ≤ σ⁺ and
/// the constraints Σ Θ_q(μ_k) x_q ≥ β̂(μ_k).
inline double scm_lp_bound(const SCMModel& scm, const std::vector<double>& theta) {
  const auto Q = static_cast<Eigen::Index>(scm.num_components());
  const auto K = static_cast<Eigen::Index>(scm.num_constraints());
  Eigen::VectorXd c(Q);
  Eigen::VectorXd lo(Q);
  Eigen::VectorXd hi(Q);
  for (Eigen::Index q = 0; q < Q; ++q) {
    c[q] = theta[static_cast<std::size_t>(q)];
    lo[q] = scm.sigma_min[static_cast<std::size_t>(q)];
    hi[q] = scm.sigma_max[static_cast<std::size_t>(q)];
  }
  Eigen::MatrixXd A(K, Q);
  Eigen::VectorXd b(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index q = 0; q < Q; ++q) A(k, q) = scm.constraint_theta[static_cast<std::size_t>(k)][static_cast<std::size_t>(q)];
    b[k] = scm.constraint_beta[static_cast<std::size_t>(k)];
  }
  return lp_minimize(c, A, b, lo, hi).value;
}

/// β_LB(μ) = max(LP bound, element-wise bound).
inline double scm_lower_bound(const SCMModel& scm, const std::vector<double>& theta) {
  return std::max(scm_lp_bound(scm, theta), scm_element_range(scm, theta).first);
}

/// Cheap upper bound of β̂(μ): Rayleigh quotients at the constraint vectors.
inline double scm_upper_bound(const SCMModel& scm, const std::vector<double>& theta) {
  double ub = std::numeric_limits<double>::infinity();
  for (const auto& rd : scm.rayleigh) {
    double v = 0.0;
    for (std::size_t q = 0; q < theta.size(); ++q) v += theta[q] * rd.component_quotients[q];
    ub = std::min(ub, v);
  }
  return ub;
}

/// Λ(μ): min of the box formula Σ_q max(Θ_q σ_q⁺, Θ_q σ_q⁻) and the
/// element-wise largest pencil eigenvalue.
inline double scm_continuity(const SCMModel& scm, const std::vector<double>& theta) {
  double box = 0.0;
  for (std::size_t q = 0; q < theta.size(); ++q) {
    box += std::max(theta[q] * scm.sigma_max[q], theta[q] * scm.sigma_min[q]);
  }
  return std::min(box, scm_element_range(scm, theta).second);
}

struct SCMOptions {
  std::size_t n_constraints = 12;
};

/// Box bounds, then greedy constraint selection over the training values of s:
/// the next point maximizes the relative gap between the Rayleigh upper bound
/// and the LP lower bound.
inline SCMModel scm_build(const AffineTruthOperator& op, const std::vector<double>& training_s,
                          const SCMOptions& opt = {}, int threads = 0) {
  if (training_s.empty()) throw ConfigError("SCM: empty training set");
  const TruthDiscretization& truth = op.truth();
  const Vector& lambdas = truth.basis().eigenvalues();
  SCMModel scm;
  scm_attach_elements(scm, op);

  const std::size_t Q = op.size();
  scm.sigma_min.assign(Q, 0.0);
  scm.sigma_max.assign(Q, 0.0);
  parallel_for(Q, threads, [&](std::size_t q) {
    std::vector<double> unit(Q, 0.0);
    unit[q] = 1.0;
    const auto [elo, ehi] = scm_element_range(scm, unit);
    const auto [dlo, dhi] = diagonal_ratio_range(lambdas, op.component(q), truth.reference());
    const EigenBracket mn = kronecker_min_eigenvalue(lambdas, op.component(q), truth.reference(), elo, dlo);
    const EigenBracket mx = kronecker_max_eigenvalue(lambdas, op.component(q), truth.reference(), dhi, ehi);
    scm.sigma_min[q] = std::max(0.0, mn.lo);
    scm.sigma_max[q] = mx.hi;
  });

  std::vector<double> s_values = training_s;
  std::sort(s_values.begin(), s_values.end());
  s_values.erase(std::unique(s_values.begin(), s_values.end()), s_values.end());
  std::vector<std::vector<double>> thetas(s_values.size());
  parallel_for(s_values.size(), threads, [&](std::size_t i) { thetas[i] = op.theta({s_values[i], 0.0}); });
  std::vector<bool> used(s_values.size(), false);

  // First constraint at the training value nearest the middle of the range.
  const double middle = 0.5 * (s_values.front() + s_values.back());
  std::size_t next = 0;
  for (std::size_t i = 1; i < s_values.size(); ++i)
    if (std::abs(s_values[i] - middle) < std::abs(s_values[next] - middle)) next = i;

  while (scm.num_constraints() < opt.n_constraints) {
    used[next] = true;
    const EigenBracket beta = exact_coercivity(op, scm, thetas[next]);
    scm.constraint_s.push_back(s_values[next]);
    scm.constraint_theta.push_back(thetas[next]);
    scm.constraint_beta.push_back(beta.lo);
    scm.rayleigh.push_back(coercivity_rayleigh(op, thetas[next], beta));
    if (scm.num_constraints() >= opt.n_constraints) break;

    std::vector<double> gap(s_values.size(), -1.0);
    parallel_for(s_values.size(), threads, [&](std::size_t i) {
      if (used[i]) return;
      const double lb = scm_lp_bound(scm, thetas[i]);
      const double ub = scm_upper_bound(scm, thetas[i]);
      gap[i] = (ub - lb) / std::max(std::abs(ub), std::numeric_limits<double>::min());
    });
    const auto it = std::max_element(gap.begin(), gap.end());
    if (*it < 0.0) break;
    next = static_cast<std::size_t>(it - gap.begin());
  }
  return scm;
}

// ------------------------------------------------------------ certificates

struct ErrorCertificate {
  Parameter mu;
  double residual_dual_norm = 0.0;
  double beta_lb = 0.0;
  double continuity_ub = 0.0;
  double delta_N = 0.0;
};

inline ErrorCertificate error_bound(const ReducedModel& model, const SCMModel& scm, const Parameter& mu) {
  const OnlineSolution sol = online_solve(model, mu);
  const std::vector<double> theta = model_theta(model, mu);
  ErrorCertificate cert;
  cert.mu = mu;
  cert.residual_dual_norm = residual_dual_norm(model, mu, sol.c_orth);
  cert.beta_lb = scm_lower_bound(scm, theta);
  cert.continuity_ub = scm_continuity(scm, theta);
  if (!(cert.beta_lb > 0.0)) {
    throw NumericalError("error_bound: nonpositive inf-sup lower bound " + std::to_string(cert.beta_lb) +
                         " at s = " + std::to_string(mu.s));
  }
  cert.delta_N = std::sqrt(cert.continuity_ub) * cert.residual_dual_norm / cert.beta_lb;
  return cert;
}

// ------------------------------------------------------------ diagnostics

/// Spectrum range of (d_s Σ Θ_q Â_q, K_s) with K_s the exact-weight form
/// ∫ y^(1-2s) ∇·∇ (measured by bisection), and the element-wise range that
/// provably contains it. Both sit near 1 because the EIM weight is close to
/// y^(1-2s).
struct NearConstancy {
  double min = 0.0;
  double max = 0.0;
  double element_min = 0.0;
  double element_max = 0.0;
  double eps() const { return std::max(1.0 - element_min, element_max - 1.0); }
};

inline NearConstancy near_constancy(const AffineTruthOperator& op, const SCMModel& scm, double s) {
  const TruthDiscretization& truth = op.truth();
  const Vector& lambdas = truth.basis().eigenvalues();
  std::vector<double> theta = eim_eval_theta(op.eim(), s);  // d_s Θ = θ
  const YFactors A = combine_factors(op.components(), theta);
  const double alpha = weight_exponent(s);
  const YFactors K = truth.weight_factors(alpha);
  const auto exact_terms = interval_element_terms(truth.mesh().interval(), alpha);
  const auto [elo, ehi] = element_pencil_range(scm.component_terms, theta, exact_terms, scm.lambda_min, scm.lambda_max);
  const auto [dlo, dhi] = diagonal_ratio_range(lambdas, A, K);
  NearConstancy nc;
  nc.element_min = elo;
  nc.element_max = ehi;
  nc.min = kronecker_min_eigenvalue(lambdas, A, K, elo, dlo).lo;
  nc.max = kronecker_max_eigenvalue(lambdas, A, K, dhi, ehi).hi;
  return nc;
}

/// Both sides of ‖tr w‖_{ℍ^s} ≤ d_s^-½ ‖w‖_{X_h}. The left side uses the
/// upper tail estimate of the modal ℍ^s norm.
inline std::pair<double, double> trace_inequality_check(const TruthDiscretization& truth, const Vector& w, double s,
                                                        int J = 20) {
  const Field2D tr = truth.trace_bottom(w);
  const ModalField modes = project_to_modes(truth.mesh().triangulation(), tr, J, &truth.p1());
  const double lhs = hs_norm_bounds(modes, s).upper;
  const double rhs = truth.xh_norm(w, s) / std::sqrt(extension_constant(s));
  return {lhs, rhs};
}

// ------------------------------------------------------------ β_{h*} check

/// η(μ)² = ‖θ(s)‖₂ with θ the cardinal EIM coefficients.
inline double eta_squared(const std::vector<double>& theta) {
  double acc = 0.0;
  for (double t : theta) acc += t * t;
  return std::sqrt(acc);
}

struct BetaStarResult {
  double beta_star = 0.0;  // upper estimate of β_{h*}: min over candidate w
  double beta_h = 0.0;     // dense λ_min(a_EIM, K_s)
  double eta2 = 0.0;
};

namespace detail {

// ‖v‖⁴_* = Σ_q (vᵀ A_q v)².
inline double star_norm4(const std::vector<Matrix>& comps, const Vector& v) {
  double acc = 0.0;
  for (const auto& A : comps) {
    const double a = v.dot(A * v);
    acc += a * a;
  }
  return acc;
}

// sup_v gᵀv / ‖v‖_* = (min {‖v‖⁴_* : gᵀv = 1})^(-1/4). The quartic is convex,
// so Newton's method on the constraint plane with backtracking converges.
inline double star_dual_norm(const std::vector<Matrix>& comps, const Vector& g) {
  const Eigen::Index n = g.size();
  const double gn2 = g.squaredNorm();
  if (gn2 == 0.0) return 0.0;
  Eigen::HouseholderQR<Matrix> qr(Matrix(g / std::sqrt(gn2)));
  const Matrix Qfull = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix Z = Qfull.rightCols(n - 1);
  Vector v = g / gn2;
  double phi = star_norm4(comps, v);
  for (int it = 0; it < 100; ++it) {
    Vector grad = Vector::Zero(n);
    Matrix H = Matrix::Zero(n, n);
    for (const auto& A : comps) {
      const Vector Av = A * v;
      const double a = v.dot(Av);
      grad += 4.0 * a * Av;
      H += 8.0 * Av * Av.transpose() + 4.0 * a * A;
    }
    const Vector gz = Z.transpose() * grad;
    const Matrix Hz = Z.transpose() * H * Z;
    const Vector step = -Hz.ldlt().solve(gz);
    const double decrement = -gz.dot(step);
    if (!(decrement > 1e-15 * phi)) break;
    double t = 1.0;
    for (int ls = 0; ls < 60; ++ls) {
      const Vector trial = v + t * (Z * step);
      const double pt = star_norm4(comps, trial);
      if (pt <= phi - 0.25 * t * decrement) {
        v = trial;
        phi = pt;
        break;
      }
      t *= 0.5;
    }
  }
  return std::pow(phi, -0.25);
}

}  // namespace detail

/// Dense evaluation on a small truth space of β_h(μ) (exact-weight X_h norm)
/// and of an upper estimate of the dominating-norm inf-sup constant
/// β_{h*}(μ) = inf_w sup_v a_EIM(w, v) / (η² ‖w‖_* ‖v‖_*),
/// ‖w‖²_* = (Σ_q Â_q(w, w)²)^½. The inf runs over eigenvectors of
/// (a_EIM, K_s), of (a_EIM, G) and seeded random vectors, so the returned
/// value is ≥ the true β_{h*}.
inline BetaStarResult beta_star(const AffineTruthOperator& op, const Parameter& mu, int random_candidates = 32,
                                unsigned seed = 7) {
  const TruthDiscretization& truth = op.truth();
  if (truth.free_dofs() > 2000) throw ConfigError("beta_star: truth space above 2000 dofs");
  std::vector<Matrix> comps;
  for (std::size_t q = 0; q < op.size(); ++q) comps.emplace_back(Matrix(kronecker_assemble(truth.basis(), op.component(q))));
  const std::vector<double> Theta = op.theta(mu);
  const std::vector<double> theta = eim_eval_theta(op.eim(), mu.s);
  Matrix A = Matrix::Zero(truth.free_dofs(), truth.free_dofs());
  for (std::size_t q = 0; q < comps.size(); ++q) A += Theta[q] * comps[q];
  const Matrix Ks(kronecker_assemble(truth.basis(), truth.weight_factors(weight_exponent(mu.s))));
  const Matrix G(kronecker_assemble(truth.basis(), truth.reference()));

  BetaStarResult res;
  res.eta2 = eta_squared(theta);
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> esK(A, Ks);
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> esG(A, G);
  if (esK.info() != Eigen::Success || esG.info() != Eigen::Success) throw NumericalError("beta_star: eigensolver failed");
  res.beta_h = esK.eigenvalues()[0];

  std::vector<Vector> candidates;
  for (Eigen::Index j = 0; j < esK.eigenvectors().cols(); ++j) candidates.push_back(esK.eigenvectors().col(j));
  for (Eigen::Index j = 0; j < esG.eigenvectors().cols(); ++j) candidates.push_back(esG.eigenvectors().col(j));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (int i = 0; i < random_candidates; ++i) {
    Vector v(truth.free_dofs());
    for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = normal(rng);
    candidates.push_back(v);
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& w : candidates) {
    const double wn = std::pow(detail::star_norm4(comps, w), 0.25);
    if (!(wn > 0.0)) continue;
    const double val = detail::star_dual_norm(comps, A * w) / (res.eta2 * wn);
    best = std::min(best, val);
  }
  res.beta_star = best;
  return res;
}

}  // namespace frbm
