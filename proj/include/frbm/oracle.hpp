#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "frbm/error.hpp"
#include "frbm/fem2d.hpp"
#include "frbm/quadrature.hpp"

namespace frbm {

// Spectral ground truth on the unit square: φ_jk = 2 sin(jπx1) sin(kπx2) is
// L²-orthonormal with -Δφ_jk = π²(j²+k²) φ_jk.

inline double mode_eigenvalue(int j, int k) { return std::numbers::pi * std::numbers::pi * (j * j + k * k); }

inline double mode_value(int j, int k, double x1, double x2) {
  return 2.0 * std::sin(j * std::numbers::pi * x1) * std::sin(k * std::numbers::pi * x2);
}

/// Coefficients u_jk, 1 ≤ j,k ≤ J, stored at (j-1, k-1).
struct ModalField {
  int J = 0;
  Eigen::MatrixXd coeffs;
  // ‖u‖²_{L²} - Σ u_jk² for projected fields (energy outside the J×J box).
  double parseval_defect = 0.0;
  // ‖∇u‖² - Σ λ_jk u_jk² for projected fields, when known.
  double gradient_defect = 0.0;

  explicit ModalField(int J_ = 0) : J(J_), coeffs(Eigen::MatrixXd::Zero(J_, J_)) {}

  double& at(int j, int k) { return coeffs(j - 1, k - 1); }
  double at(int j, int k) const { return coeffs(j - 1, k - 1); }

  double operator()(double x1, double x2) const {
    double acc = 0.0;
    for (int j = 1; j <= J; ++j)
      for (int k = 1; k <= J; ++k)
        if (at(j, k) != 0.0) acc += at(j, k) * mode_value(j, k, x1, x2);
    return acc;
  }
};

/// u_jk = f_jk λ_jk^(-s).
inline ModalField spectral_solve(const ModalField& f, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("spectral_solve: s must lie in [0,1]");
  ModalField u(f.J);
  for (int j = 1; j <= f.J; ++j)
    for (int k = 1; k <= f.J; ++k) u.at(j, k) = f.at(j, k) * std::pow(mode_eigenvalue(j, k), -s);
  return u;
}

/// (-Δ)^s u in modal form.
inline ModalField apply_fractional_laplacian(const ModalField& u, double s) {
  ModalField f(u.J);
  for (int j = 1; j <= u.J; ++j)
    for (int k = 1; k <= u.J; ++k) f.at(j, k) = u.at(j, k) * std::pow(mode_eigenvalue(j, k), s);
  return f;
}

/// Modal coefficients of a P1 field by composite degree-6 quadrature. Each
/// triangle is split into r² similar pieces, r = ceil(J·h), so every piece
/// is no wider than one mode half-wavelength.
inline ModalField project_to_modes(const Triangulation2D& tri, const Field2D& u, int J,
                                   const P1Matrices* matrices = nullptr) {
  if (J < 1) throw ConfigError("project_to_modes: J must be >= 1");
  ModalField out(J);
  double h = 0.0;
  for (std::size_t t = 0; t < tri.num_triangles(); ++t) {
    const auto& idx = tri.triangles[t];
    for (int a = 0; a < 3; ++a) {
      const Point2& p = tri.vertices[idx[a]];
      const Point2& q = tri.vertices[idx[(a + 1) % 3]];
      h = std::max(h, std::hypot(p[0] - q[0], p[1] - q[1]));
    }
  }
  const int r = std::max(1, static_cast<int>(std::ceil(J * h - 1e-12)));
  const auto& rule = triangle_rule_degree6();
  const double pi = std::numbers::pi;
  std::vector<double> sx(static_cast<std::size_t>(J));
  std::vector<double> sy(static_cast<std::size_t>(J));
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(J, J);

  for (std::size_t t = 0; t < tri.num_triangles(); ++t) {
    const auto& idx = tri.triangles[t];
    const double area = tri.signed_area(t) / (r * r);
    // Sub-triangles in barycentric lattice coordinates (a, b) with step 1/r.
    for (int a = 0; a < r; ++a) {
      for (int b = 0; a + b < r; ++b) {
        for (int flip = 0; flip < 2; ++flip) {
          if (flip == 1 && a + b + 1 >= r) continue;
          std::array<std::array<double, 2>, 3> corners;
          if (flip == 0) {
            corners = {{{double(a), double(b)}, {double(a + 1), double(b)}, {double(a), double(b + 1)}}};
          } else {
            corners = {{{double(a + 1), double(b)}, {double(a + 1), double(b + 1)}, {double(a), double(b + 1)}}};
          }
          for (const auto& qp : rule) {
            double l1 = 0.0;
            double l2 = 0.0;
            for (int c = 0; c < 3; ++c) {
              l1 += qp.bary[c] * corners[c][0] / r;
              l2 += qp.bary[c] * corners[c][1] / r;
            }
            const std::array<double, 3> bary{1.0 - l1 - l2, l1, l2};
            const Point2 x = barycentric_point(tri, t, bary);
            double uh = 0.0;
            for (int c = 0; c < 3; ++c) uh += bary[c] * u[idx[c]];
            const double w = qp.weight * area * uh * 2.0;
            for (int j = 0; j < J; ++j) {
              sx[static_cast<std::size_t>(j)] = std::sin((j + 1) * pi * x[0]);
              sy[static_cast<std::size_t>(j)] = std::sin((j + 1) * pi * x[1]);
            }
            for (int k = 0; k < J; ++k) {
              const double wk = w * sy[static_cast<std::size_t>(k)];
              for (int j = 0; j < J; ++j) acc(j, k) += wk * sx[static_cast<std::size_t>(j)];
            }
          }
        }
      }
    }
  }
  out.coeffs = acc;

  const P1Matrices local = matrices ? P1Matrices{} : assemble_p1_matrices(tri);
  const P1Matrices& mats = matrices ? *matrices : local;
  double box_l2 = 0.0;
  double box_grad = 0.0;
  for (int j = 1; j <= J; ++j)
    for (int k = 1; k <= J; ++k) {
      box_l2 += out.at(j, k) * out.at(j, k);
      box_grad += mode_eigenvalue(j, k) * out.at(j, k) * out.at(j, k);
    }
  out.parseval_defect = u.dot(mats.mass * u) - box_l2;
  out.gradient_defect = u.dot(mats.stiffness * u) - box_grad;
  return out;
}

/// ℍ^s norm with bracketing estimates of the truncation tail.
struct HsNorm {
  double truncated = 0.0;  // (Σ_box λ^s u²)^½
  double lower = 0.0;      // adds λ_cut^s · L² tail
  double upper = 0.0;      // adds λ_cut^(s-1) · gradient tail (valid for s ≤ 1)
};

inline HsNorm hs_norm_bounds(const ModalField& u, double s) {
  double box = 0.0;
  for (int j = 1; j <= u.J; ++j)
    for (int k = 1; k <= u.J; ++k) box += std::pow(mode_eigenvalue(j, k), s) * u.at(j, k) * u.at(j, k);
  // Every mode outside the box has j > J or k > J.
  const double lambda_cut = mode_eigenvalue(u.J + 1, 1);
  HsNorm out;
  out.truncated = std::sqrt(box);
  out.lower = std::sqrt(box + std::pow(lambda_cut, s) * std::max(0.0, u.parseval_defect));
  out.upper = std::sqrt(box + std::pow(lambda_cut, s - 1.0) * std::max(0.0, u.gradient_defect));
  return out;
}

inline double hs_norm(const ModalField& u, double s) { return hs_norm_bounds(u, s).truncated; }

}  // namespace frbm
