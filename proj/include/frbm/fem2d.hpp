#pragma once

#include <Eigen/Sparse>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "frbm/mesh.hpp"
#include "frbm/quadrature.hpp"

namespace frbm {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Field2D = Eigen::VectorXd;  // nodal values on all 2D vertices
using ScalarFunction2D = std::function<double(double, double)>;

/// P1 stiffness and mass matrices over all vertices of a triangulation.
struct P1Matrices {
  SparseMatrix stiffness;
  SparseMatrix mass;
};

inline P1Matrices assemble_p1_matrices(const Triangulation2D& tri) {
  const auto nv = static_cast<Eigen::Index>(tri.num_vertices());
  std::vector<Eigen::Triplet<double>> ks;
  std::vector<Eigen::Triplet<double>> ms;
  ks.reserve(9 * tri.num_triangles());
  ms.reserve(9 * tri.num_triangles());
  for (std::size_t t = 0; t < tri.num_triangles(); ++t) {
    const auto& idx = tri.triangles[t];
    const double area = tri.signed_area(t);
    // Gradients of the barycentric coordinates times 2*area.
    std::array<std::array<double, 2>, 3> g;
    for (int a = 0; a < 3; ++a) {
      const Point2& p = tri.vertices[idx[(a + 1) % 3]];
      const Point2& q = tri.vertices[idx[(a + 2) % 3]];
      g[a] = {p[1] - q[1], q[0] - p[0]};
    }
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const double k = (g[a][0] * g[b][0] + g[a][1] * g[b][1]) / (4.0 * area);
        const double m = area / 12.0 * (a == b ? 2.0 : 1.0);
        ks.emplace_back(idx[a], idx[b], k);
        ms.emplace_back(idx[a], idx[b], m);
      }
    }
  }
  P1Matrices out{SparseMatrix(nv, nv), SparseMatrix(nv, nv)};
  out.stiffness.setFromTriplets(ks.begin(), ks.end());
  out.mass.setFromTriplets(ms.begin(), ms.end());
  return out;
}

/// Principal submatrix on the listed vertices.
inline SparseMatrix restrict_to(const SparseMatrix& full, const std::vector<int>& keep) {
  std::vector<int> map(static_cast<std::size_t>(full.rows()), -1);
  for (std::size_t i = 0; i < keep.size(); ++i) map[static_cast<std::size_t>(keep[i])] = static_cast<int>(i);
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    for (SparseMatrix::InnerIterator it(full, keep[i]); it; ++it) {
      const int j = map[static_cast<std::size_t>(it.col())];
      if (j >= 0) trip.emplace_back(static_cast<int>(i), j, it.value());
    }
  }
  const auto n = static_cast<Eigen::Index>(keep.size());
  SparseMatrix out(n, n);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

inline Point2 barycentric_point(const Triangulation2D& tri, std::size_t t, const std::array<double, 3>& bary) {
  const auto& idx = tri.triangles[t];
  Point2 x{0.0, 0.0};
  for (int a = 0; a < 3; ++a) {
    x[0] += bary[a] * tri.vertices[idx[a]][0];
    x[1] += bary[a] * tri.vertices[idx[a]][1];
  }
  return x;
}

/// Load vector b_v = ∫_Ω f φ_v over all vertices.
inline Field2D assemble_load_2d(const Triangulation2D& tri, const ScalarFunction2D& f,
                                const TriangleRule& rule = triangle_rule_degree4()) {
  Field2D b = Field2D::Zero(static_cast<Eigen::Index>(tri.num_vertices()));
  for (std::size_t t = 0; t < tri.num_triangles(); ++t) {
    const auto& idx = tri.triangles[t];
    const double area = tri.signed_area(t);
    for (const auto& qp : rule) {
      const Point2 x = barycentric_point(tri, t, qp.bary);
      const double fw = f(x[0], x[1]) * qp.weight * area;
      for (int a = 0; a < 3; ++a) b[idx[a]] += fw * qp.bary[a];
    }
  }
  return b;
}

/// Nodal interpolant of f; boundary vertices are set to zero.
inline Field2D interpolate_2d(const Triangulation2D& tri, const ScalarFunction2D& f) {
  Field2D u(static_cast<Eigen::Index>(tri.num_vertices()));
  for (std::size_t v = 0; v < tri.num_vertices(); ++v) {
    u[static_cast<Eigen::Index>(v)] = tri.boundary_mask[v] ? 0.0 : f(tri.vertices[v][0], tri.vertices[v][1]);
  }
  return u;
}

/// ‖u_h - f‖_{L²(Ω)} for a P1 field u_h, by the degree-6 rule on every triangle.
inline double l2_error_vs_function(const Triangulation2D& tri, const Field2D& u, const ScalarFunction2D& f) {
  double acc = 0.0;
  const auto& rule = triangle_rule_degree6();
  for (std::size_t t = 0; t < tri.num_triangles(); ++t) {
    const auto& idx = tri.triangles[t];
    const double area = tri.signed_area(t);
    for (const auto& qp : rule) {
      const Point2 x = barycentric_point(tri, t, qp.bary);
      double uh = 0.0;
      for (int a = 0; a < 3; ++a) uh += qp.bary[a] * u[idx[a]];
      const double d = uh - f(x[0], x[1]);
      acc += qp.weight * area * d * d;
    }
  }
  return std::sqrt(acc);
}

}  // namespace frbm
