#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "frbm/eim.hpp"
#include "frbm/error.hpp"
#include "frbm/fem2d.hpp"
#include "frbm/mesh.hpp"
#include "frbm/parameter.hpp"
#include "frbm/tensor.hpp"
#include "frbm/weighted_interval.hpp"

namespace frbm {

/// Weighted 1D factors for y^alpha restricted to the free levels 0..M-1.
inline YFactors free_level_factors(const GradedInterval& interval, double alpha) {
  const WeightedIntervalMatrices w = weighted_interval_matrices(interval, alpha);
  const auto m = static_cast<std::size_t>(interval.M);
  return {w.mass.leading(m), w.stiffness.leading(m)};
}

inline YFactors combine_factors(const std::vector<YFactors>& parts, const std::vector<double>& coeffs) {
  YFactors out{SymTridiagonal(parts.front().mass.size()), SymTridiagonal(parts.front().mass.size())};
  for (std::size_t q = 0; q < parts.size(); ++q) {
    out.mass.axpy(coeffs[q], parts[q].mass);
    out.stiffness.axpy(coeffs[q], parts[q].stiffness);
  }
  return out;
}

/// Everything about one cylinder discretization that does not depend on s.
class TruthDiscretization {
 public:
  explicit TruthDiscretization(CylinderMesh mesh) : mesh_(std::move(mesh)) {
    p1_ = assemble_p1_matrices(mesh_.triangulation());
    basis_ = std::make_shared<TensorBasis>(restrict_to(p1_.stiffness, mesh_.interior_vertices()),
                                           restrict_to(p1_.mass, mesh_.interior_vertices()));
    reference_ = free_level_factors(mesh_.interval(), 0.0);
  }

  const CylinderMesh& mesh() const { return mesh_; }
  const P1Matrices& p1() const { return p1_; }
  const TensorBasis& basis() const { return *basis_; }
  /// y-factors of the unweighted Dirichlet form (h ≡ 1).
  const YFactors& reference() const { return reference_; }
  Eigen::Index free_dofs() const { return static_cast<Eigen::Index>(mesh_.free_dofs()); }
  Eigen::Index num_interior() const { return basis_->size(); }
  Eigen::Index num_free_levels() const { return mesh_.num_free_levels(); }

  YFactors weight_factors(double alpha) const { return free_level_factors(mesh_.interval(), alpha); }

  /// Free-dof vector carrying a 2D (all-vertex) vector on the bottom level.
  Vector bottom_lift(const Field2D& full) const {
    Vector out = Vector::Zero(free_dofs());
    const auto& interior = mesh_.interior_vertices();
    for (std::size_t i = 0; i < interior.size(); ++i) out[static_cast<Eigen::Index>(i)] = full[interior[i]];
    return out;
  }

  /// Bottom (y = 0) slice of a free-dof vector as an all-vertex field.
  Field2D trace_bottom(const Vector& u) const {
    Field2D out = Field2D::Zero(static_cast<Eigen::Index>(mesh_.num_vertices()));
    const auto& interior = mesh_.interior_vertices();
    for (std::size_t i = 0; i < interior.size(); ++i) out[interior[i]] = u[static_cast<Eigen::Index>(i)];
    return out;
  }

  double l2_norm_omega(const Field2D& field) const { return std::sqrt(std::max(0.0, field.dot(p1_.mass * field))); }

  /// √(∫ y^(1-2s) |∇u|²) with closed-form weighted 1D integrals.
  double xh_norm(const Vector& u, double s) const {
    const Vector Au = kronecker_apply(*basis_, weight_factors(weight_exponent(s)), u);
    return std::sqrt(std::max(0.0, u.dot(Au)));
  }

  double reference_norm(const Vector& u) const {
    return std::sqrt(std::max(0.0, u.dot(kronecker_apply(*basis_, reference_, u))));
  }

 private:
  CylinderMesh mesh_;
  P1Matrices p1_;
  std::shared_ptr<TensorBasis> basis_;
  YFactors reference_;
};

struct TruthSpec {
  int n = 16;
  int M = 40;
  double gamma = 6.0;
  double y_plus = 2.233;
};

inline std::shared_ptr<const TruthDiscretization> make_truth(const TruthSpec& spec) {
  return std::make_shared<const TruthDiscretization>(build_cylinder_mesh(
      build_unit_square_triangulation(spec.n), build_graded_partition(spec.M, spec.gamma, spec.y_plus)));
}

/// Σ_q Θ_q(μ) Â_q with Â_q = ∫ y^(1-2 s_q) ∇·∇ on free dofs and
/// Θ_q(μ) = θ_q(s)/d_s.
class AffineTruthOperator {
 public:
  AffineTruthOperator(std::shared_ptr<const TruthDiscretization> truth, EIMModel eim)
      : truth_(std::move(truth)), eim_(std::move(eim)) {
    components_.reserve(eim_.size());
    for (std::size_t q = 0; q < eim_.size(); ++q) {
      const double alpha = eim_.weight_exponent(q);
      if (!(alpha > -1.0)) throw ConfigError("affine operator: weight exponent <= -1 for snapshot " + std::to_string(q));
      components_.push_back(truth_->weight_factors(alpha));
    }
  }

  const TruthDiscretization& truth() const { return *truth_; }
  std::shared_ptr<const TruthDiscretization> truth_ptr() const { return truth_; }
  const EIMModel& eim() const { return eim_; }
  Subdomain subdomain() const { return eim_.subdomain; }
  std::size_t size() const { return components_.size(); }
  const YFactors& component(std::size_t q) const { return components_[q]; }
  const std::vector<YFactors>& components() const { return components_; }

  std::vector<double> theta(const Parameter& mu) const {
    std::vector<double> t = eim_eval_theta(eim_, mu.s);
    const double d = extension_constant(mu.s);
    for (double& v : t) v /= d;
    return t;
  }

  YFactors factors(const Parameter& mu) const { return combine_factors(components_, theta(mu)); }

  Vector apply_component(std::size_t q, const Vector& x) const {
    return kronecker_apply(truth_->basis(), components_[q], x);
  }

 private:
  std::shared_ptr<const TruthDiscretization> truth_;
  EIMModel eim_;
  std::vector<YFactors> components_;
};

enum class Preconditioner { FastDiagonalization, Jacobi };

struct SolverOptions {
  double rel_tol = 1e-10;
  double max_iter_factor = 20.0;  // cap = factor·√(free dofs)
  Preconditioner preconditioner = Preconditioner::FastDiagonalization;
};

struct SolveStats {
  int iterations = 0;
  double rel_residual = 0.0;
};

enum class TruthKind { EIM, ExactWeight };

struct TruthSolution {
  Vector coeffs;
  Parameter mu;
  TruthKind kind = TruthKind::EIM;
  SolveStats stats;
};

/// PCG on the Kronecker-sum operator with y-factors `y`. Every search
/// direction must have positive curvature; that keeps the Lanczos matrix
/// implied by CG positive definite, so all Ritz values are positive.
inline Vector solve_kronecker(const TensorBasis& basis, const YFactors& y, const Vector& b,
                              const SolverOptions& opt = {}, SolveStats* stats = nullptr) {
  const Eigen::Index n = b.size();
  Vector x = Vector::Zero(n);
  SolveStats local;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    if (stats) *stats = local;
    return x;
  }

  std::unique_ptr<KroneckerInverse> fd;
  Vector inv_diag;
  if (opt.preconditioner == Preconditioner::FastDiagonalization) {
    fd = std::make_unique<KroneckerInverse>(basis, y);
    if (!fd->positive_definite()) throw NumericalError("truth solve: operator is not positive definite");
  } else {
    inv_diag = kronecker_diagonal(basis, y);
    if ((inv_diag.array() <= 0.0).any()) throw NumericalError("truth solve: nonpositive diagonal entry");
    inv_diag = inv_diag.cwiseInverse();
  }
  auto precondition = [&](const Vector& r) -> Vector {
    return fd ? fd->apply(r) : Vector(inv_diag.cwiseProduct(r));
  };

  const int cap = std::max(1, static_cast<int>(std::ceil(opt.max_iter_factor * std::sqrt(static_cast<double>(n)))));
  Vector r = b;
  Vector z = precondition(r);
  Vector p = z;
  double rz = r.dot(z);
  for (int it = 1; it <= cap; ++it) {
    const Vector Ap = kronecker_apply(basis, y, p);
    const double curvature = p.dot(Ap);
    if (!(curvature > 0.0)) throw NumericalError("truth solve: nonpositive curvature, operator is indefinite");
    const double alpha = rz / curvature;
    x += alpha * p;
    r -= alpha * Ap;
    local.iterations = it;
    local.rel_residual = r.norm() / bnorm;
    if (local.rel_residual <= opt.rel_tol) {
      if (stats) *stats = local;
      return x;
    }
    z = precondition(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  throw NumericalError("truth solve: PCG did not converge in " + std::to_string(cap) +
                       " iterations (relative residual " + std::to_string(local.rel_residual) + ")");
}

/// EIM truth solution 𝒰^𝒩(μ).
inline TruthSolution solve_truth(const AffineTruthOperator& op, const Parameter& mu, const Vector& load,
                                 const SolverOptions& opt = {}) {
  TruthSolution sol;
  sol.mu = mu;
  sol.kind = TruthKind::EIM;
  sol.coeffs = solve_kronecker(op.truth().basis(), op.factors(mu), load, opt, &sol.stats);
  return sol;
}

/// y-factors of the exact-weight form (1/d_s) ∫ y^(1-2s) ∇·∇.
inline YFactors exact_weight_factors(const TruthDiscretization& truth, double s) {
  YFactors y = truth.weight_factors(weight_exponent(s));
  const double inv_d = 1.0 / extension_constant(s);
  for (double& v : y.mass.diag) v *= inv_d;
  for (double& v : y.mass.off) v *= inv_d;
  for (double& v : y.stiffness.diag) v *= inv_d;
  for (double& v : y.stiffness.off) v *= inv_d;
  return y;
}

/// Exact-weight truth solution 𝒱^𝒩(s).
inline TruthSolution solve_truth_exact_weight(const TruthDiscretization& truth, const Parameter& mu,
                                              const Vector& load, const SolverOptions& opt = {}) {
  TruthSolution sol;
  sol.mu = mu;
  sol.kind = TruthKind::ExactWeight;
  sol.coeffs = solve_kronecker(truth.basis(), exact_weight_factors(truth, mu.s), load, opt, &sol.stats);
  return sol;
}

}  // namespace frbm
