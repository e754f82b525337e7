#pragma once

// Independent reference computations shared by the unit tests. Nothing here
// calls the library's 1D weighted integrals, Kronecker kernels or solvers.

#include <Eigen/Dense>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <vector>

#include "frbm/fem2d.hpp"
#include "frbm/mesh.hpp"

namespace oracle {

/// ∫_a^b y^alpha f(y) dy by tanh-sinh, which tolerates the endpoint
/// singularity of y^alpha at 0.
template <class F>
double weighted_integral(double a, double b, double alpha, F f) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  return integrator.integrate([&](double y) { return y == 0.0 ? 0.0 : std::pow(y, alpha) * f(y); }, a, b);
}

/// Dense weighted 1D mass and stiffness on all nodes of a partition,
/// element by element with hats written out explicitly.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> weighted_1d(const std::vector<double>& nodes, double alpha) {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index e = 0; e + 1 < n; ++e) {
    const double a = nodes[e];
    const double b = nodes[e + 1];
    const double h = b - a;
    auto p0 = [=](double y) { return (b - y) / h; };
    auto p1 = [=](double y) { return (y - a) / h; };
    const double m00 = weighted_integral(a, b, alpha, [&](double y) { return p0(y) * p0(y); });
    const double m01 = weighted_integral(a, b, alpha, [&](double y) { return p0(y) * p1(y); });
    const double m11 = weighted_integral(a, b, alpha, [&](double y) { return p1(y) * p1(y); });
    const double k = weighted_integral(a, b, alpha, [](double) { return 1.0; }) / (h * h);
    M(e, e) += m00;
    M(e, e + 1) += m01;
    M(e + 1, e) += m01;
    M(e + 1, e + 1) += m11;
    S(e, e) += k;
    S(e + 1, e + 1) += k;
    S(e, e + 1) -= k;
    S(e + 1, e) -= k;
  }
  return {M, S};
}

/// Dense cylinder matrix ∫ y^alpha ∇u·∇v on free dofs (interior vertices,
/// levels 0..M-1, index m·n_int + i) as an explicit double loop.
inline Eigen::MatrixXd cylinder_matrix(const frbm::CylinderMesh& mesh, double alpha) {
  const frbm::P1Matrices p1 = frbm::assemble_p1_matrices(mesh.triangulation());
  const Eigen::MatrixXd Sx(p1.stiffness);
  const Eigen::MatrixXd Mx(p1.mass);
  const auto [My, Sy] = weighted_1d(mesh.interval().nodes, alpha);
  const auto& interior = mesh.interior_vertices();
  const auto ni = static_cast<Eigen::Index>(interior.size());
  const Eigen::Index L = mesh.num_free_levels();
  Eigen::MatrixXd A(ni * L, ni * L);
  for (Eigen::Index m = 0; m < L; ++m)
    for (Eigen::Index l = 0; l < L; ++l)
      for (Eigen::Index i = 0; i < ni; ++i)
        for (Eigen::Index j = 0; j < ni; ++j)
          A(m * ni + i, l * ni + j) = Sx(interior[i], interior[j]) * My(m, l) + Mx(interior[i], interior[j]) * Sy(m, l);
  return A;
}

/// ∫ y^alpha |∇w_h|² for a free-dof vector, by quadrature over every prism
/// (degree-6 rule on the triangle, tanh-sinh in y).
inline double prism_energy(const frbm::CylinderMesh& mesh, const Eigen::VectorXd& w, double alpha) {
  const auto& tri = mesh.triangulation();
  const auto& nodes = mesh.interval().nodes;
  const auto& rule = frbm::triangle_rule_degree6();
  auto value = [&](std::size_t v, int level) {
    const long f = mesh.free_index(v, level);
    return f < 0 ? 0.0 : w[f];
  };
  double total = 0.0;
  for (std::size_t t = 0; t < tri.num_triangles(); ++t) {
    const auto& idx = tri.triangles[t];
    const double area = tri.signed_area(t);
    std::array<std::array<double, 2>, 3> g;  // barycentric gradients
    for (int a = 0; a < 3; ++a) {
      const auto& p = tri.vertices[idx[(a + 1) % 3]];
      const auto& q = tri.vertices[idx[(a + 2) % 3]];
      g[a] = {(p[1] - q[1]) / (2 * area), (q[0] - p[0]) / (2 * area)};
    }
    for (int e = 0; e < mesh.interval().M; ++e) {
      const double ya = nodes[e];
      const double yb = nodes[e + 1];
      const double h = yb - ya;
      std::array<double, 3> lo{}, hi{};
      for (int a = 0; a < 3; ++a) {
        lo[a] = value(idx[a], e);
        hi[a] = value(idx[a], e + 1);
      }
      auto energy_at = [&](double y) {
        const double t1 = (y - ya) / h;
        double gx = 0, gy = 0;
        for (int a = 0; a < 3; ++a) {
          const double u = (1 - t1) * lo[a] + t1 * hi[a];
          gx += u * g[a][0];
          gy += u * g[a][1];
        }
        double dy2 = 0.0;
        for (const auto& qp : rule) {
          double d = 0.0;
          for (int a = 0; a < 3; ++a) d += qp.bary[a] * (hi[a] - lo[a]) / h;
          dy2 += qp.weight * d * d;
        }
        return (gx * gx + gy * gy) + dy2;
      };
      total += area * weighted_integral(ya, yb, alpha, energy_at);
    }
  }
  return total;
}

}  // namespace oracle
