#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "frbm/error.hpp"
#include "frbm/oracle.hpp"

using namespace frbm;
using std::numbers::pi;

TEST(Oracle, EigenfunctionSolve) {
  ModalField f(4);
  f.at(2, 2) = 0.5;  // sin(2πx1)sin(2πx2) = φ_22 / 2
  for (double s : {0.0, 0.2, 0.5, 0.8, 1.0}) {
    const ModalField u = spectral_solve(f, s);
    EXPECT_NEAR(u.at(2, 2), 0.5 * std::pow(8 * pi * pi, -s), 1e-16);
    EXPECT_EQ(u.coeffs.cwiseAbs().sum(), std::abs(u.at(2, 2)));
  }
  ModalField g(3);
  g.at(1, 1) = 1.0;
  EXPECT_NEAR(spectral_solve(g, 1.0).at(1, 1), 1.0 / (2 * pi * pi), 1e-16);
  EXPECT_EQ(spectral_solve(g, 0.0).coeffs, g.coeffs);
  EXPECT_THROW(spectral_solve(g, 1.5), ConfigError);
}

TEST(Oracle, FractionalLaplacianRoundTrip) {
  ModalField u(6);
  for (int j = 1; j <= 6; ++j)
    for (int k = 1; k <= 6; ++k) u.at(j, k) = std::cos(j + 3.0 * k);
  for (double s : {0.03, 0.4, 0.97}) {
    const ModalField back = spectral_solve(apply_fractional_laplacian(u, s), s);
    EXPECT_LT((back.coeffs - u.coeffs).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Oracle, ModeEvaluation) {
  ModalField u(3);
  u.at(1, 2) = 0.7;
  EXPECT_NEAR(u(0.3, 0.2), 0.7 * 2 * std::sin(0.3 * pi) * std::sin(0.4 * pi), 1e-15);
  EXPECT_DOUBLE_EQ(mode_eigenvalue(2, 3), 13 * pi * pi);
}

TEST(Oracle, ProjectionOfFirstModeConcentrates) {
  double prev_off = 1.0;
  double prev_err = 1.0;
  for (int n : {8, 16, 32}) {
    const Triangulation2D tri = build_unit_square_triangulation(n);
    const Field2D u = interpolate_2d(tri, [](double x, double y) { return mode_value(1, 1, x, y); });
    const ModalField m = project_to_modes(tri, u, 8);
    Eigen::MatrixXd off = m.coeffs;
    off(0, 0) = 0.0;
    const double off_norm = off.cwiseAbs().maxCoeff();
    const double err = std::abs(m.at(1, 1) - 1.0);
    EXPECT_LT(off_norm, prev_off);
    EXPECT_LT(err, prev_err);
    prev_off = off_norm;
    prev_err = err;
  }
  EXPECT_LT(prev_err, 5e-3);
}

TEST(Oracle, ProjectionIsExactForP1Field) {
  // A single hat function: its sine coefficients are available in closed
  // form only through quadrature, so compare two subdivision levels.
  const Triangulation2D tri = build_unit_square_triangulation(4);
  Field2D u = Field2D::Zero(tri.num_vertices());
  u[2 * 5 + 2] = 1.0;
  const ModalField a = project_to_modes(tri, u, 3);   // r = 1
  const ModalField b = project_to_modes(tri, u, 12);  // r = 5
  EXPECT_LT((a.coeffs - b.coeffs.topLeftCorner(3, 3)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Oracle, ZeroFieldProjectsToZero) {
  const Triangulation2D tri = build_unit_square_triangulation(6);
  const ModalField m = project_to_modes(tri, Field2D::Zero(tri.num_vertices()), 5);
  EXPECT_EQ(m.coeffs.norm(), 0.0);
  EXPECT_EQ(hs_norm(m, 0.5), 0.0);
}

TEST(Oracle, ParsevalDefectAtDeskResolution) {
  const Triangulation2D tri = build_unit_square_triangulation(50);
  const Field2D u = interpolate_2d(tri, [](double x, double y) { return std::sin(2 * pi * x) * std::sin(2 * pi * y); });
  const ModalField m = project_to_modes(tri, u, 20);
  EXPECT_LE(std::abs(m.parseval_defect), 1e-3);
  EXPECT_GE(m.parseval_defect, -1e-12);
}

TEST(Oracle, HsNormExamples) {
  ModalField u(5);
  u.at(1, 1) = 1.0;
  for (double s : {0.0, 0.3, 1.0}) EXPECT_NEAR(hs_norm(u, s), std::pow(2 * pi * pi, s / 2), 1e-13);
  ModalField v(5);
  v.at(1, 3) = 0.4;
  v.at(2, 2) = -0.3;
  EXPECT_NEAR(hs_norm(v, 0.0), 0.5, 1e-15);
  double prev = 0.0;
  for (double s = 0.0; s <= 1.0; s += 0.1) {
    const double h = hs_norm(v, s);
    EXPECT_GE(h, prev);
    prev = h;
  }
}

TEST(Oracle, TailBoundsBracketTheNorm) {
  const Triangulation2D tri = build_unit_square_triangulation(16);
  const Field2D u = interpolate_2d(tri, [](double x, double y) { return x * y * (1 - x) * (1 - y); });
  const ModalField coarse = project_to_modes(tri, u, 6);
  const ModalField fine = project_to_modes(tri, u, 40);
  for (double s : {0.1, 0.5, 0.9}) {
    const HsNorm c = hs_norm_bounds(coarse, s);
    const double ref = hs_norm(fine, s);
    EXPECT_LE(c.truncated, c.lower);
    EXPECT_LE(c.lower, ref * (1 + 1e-9));
    EXPECT_GE(c.upper, ref * (1 - 1e-9));
  }
}
