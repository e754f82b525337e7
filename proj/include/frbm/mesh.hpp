#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "frbm/error.hpp"

namespace frbm {

/// Graded partition 0 = y_0 < ... < y_M = y_plus with y_m = y_plus (m/M)^gamma.
struct GradedInterval {
  int M = 0;
  double gamma = 1.0;
  double y_plus = 1.0;
  std::vector<double> nodes;

  int num_elements() const { return M; }
  double element_length(int m) const { return nodes[m + 1] - nodes[m]; }
};

inline GradedInterval build_graded_partition(int M, double gamma, double y_plus) {
  if (M < 1) throw ConfigError("graded partition: M must be >= 1");
  if (!std::isfinite(gamma) || gamma <= 0.0) throw ConfigError("graded partition: gamma must be finite and > 0");
  if (!std::isfinite(y_plus) || y_plus <= 0.0) throw ConfigError("graded partition: y_plus must be finite and > 0");

  GradedInterval interval{M, gamma, y_plus, std::vector<double>(static_cast<std::size_t>(M) + 1)};
  for (int m = 0; m <= M; ++m) {
    interval.nodes[m] = y_plus * std::pow(static_cast<double>(m) / M, gamma);
  }
  interval.nodes[M] = y_plus;
  for (int m = 0; m < M; ++m) {
    if (!(interval.nodes[m + 1] > interval.nodes[m])) {
      throw ConfigError("graded partition: nodes underflow to a non-increasing sequence");
    }
  }
  return interval;
}

using Point2 = std::array<double, 2>;

/// Conforming P1 triangulation of the unit square.
struct Triangulation2D {
  std::vector<Point2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<bool> boundary_mask;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_triangles() const { return triangles.size(); }

  double signed_area(std::size_t t) const {
    const auto& [a, b, c] = triangles[t];
    const Point2& p = vertices[a];
    const Point2& q = vertices[b];
    const Point2& r = vertices[c];
    return 0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]));
  }
};

/// Structured n×n grid on [0,1]^2, each cell cut along its (i,j)-(i+1,j+1)
/// diagonal. Vertex (i,j) has index j*(n+1)+i.
inline Triangulation2D build_unit_square_triangulation(int n) {
  if (n < 2) throw ConfigError("unit square triangulation: n must be >= 2");
  Triangulation2D tri;
  const int stride = n + 1;
  tri.vertices.reserve(static_cast<std::size_t>(stride) * stride);
  tri.boundary_mask.reserve(static_cast<std::size_t>(stride) * stride);
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      tri.vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
      tri.boundary_mask.push_back(i == 0 || j == 0 || i == n || j == n);
    }
  }
  tri.triangles.reserve(2 * static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v00 = j * stride + i;
      const int v10 = v00 + 1;
      const int v01 = v00 + stride;
      const int v11 = v01 + 1;
      tri.triangles.push_back({v00, v10, v11});
      tri.triangles.push_back({v00, v11, v01});
    }
  }
  return tri;
}

/// Tensor mesh of the truncated cylinder Ω × [0, y_plus].
///
/// Global dofs are level-blocked: dof (v, m) of 2D vertex v on y-level m has
/// index m * num_vertices + v. Free dofs are interior vertices on levels
/// 0..M-1 (the lateral boundary and the top level carry homogeneous Dirichlet
/// data), numbered m * num_interior + interior_index(v).
class CylinderMesh {
 public:
  CylinderMesh(Triangulation2D tri, GradedInterval interval)
      : tri_(std::move(tri)), interval_(std::move(interval)) {
    if (tri_.num_vertices() == 0 || interval_.M < 1) throw ConfigError("cylinder mesh: empty input");
    interior_of_vertex_.assign(tri_.num_vertices(), -1);
    for (std::size_t v = 0; v < tri_.num_vertices(); ++v) {
      if (!tri_.boundary_mask[v]) {
        interior_of_vertex_[v] = static_cast<int>(interior_.size());
        interior_.push_back(static_cast<int>(v));
      }
    }
    if (interior_.empty()) throw ConfigError("cylinder mesh: triangulation has no interior vertex");
  }

  const Triangulation2D& triangulation() const { return tri_; }
  const GradedInterval& interval() const { return interval_; }

  std::size_t num_vertices() const { return tri_.num_vertices(); }
  std::size_t num_interior() const { return interior_.size(); }
  int num_levels() const { return interval_.M + 1; }
  int num_free_levels() const { return interval_.M; }

  std::size_t total_dofs() const { return num_vertices() * static_cast<std::size_t>(num_levels()); }
  std::size_t free_dofs() const { return num_interior() * static_cast<std::size_t>(num_free_levels()); }

  std::size_t global_index(std::size_t vertex, int level) const {
    return static_cast<std::size_t>(level) * num_vertices() + vertex;
  }

  bool is_free(std::size_t vertex, int level) const {
    return level < interval_.M && interior_of_vertex_[vertex] >= 0;
  }

  /// Free index of (vertex, level); -1 when the dof is constrained.
  long free_index(std::size_t vertex, int level) const {
    if (!is_free(vertex, level)) return -1;
    return static_cast<long>(level) * static_cast<long>(num_interior()) + interior_of_vertex_[vertex];
  }

  const std::vector<int>& interior_vertices() const { return interior_; }
  int interior_index(std::size_t vertex) const { return interior_of_vertex_[vertex]; }

  std::vector<bool> free_mask() const {
    std::vector<bool> mask(total_dofs(), false);
    for (int m = 0; m < interval_.M; ++m) {
      for (int v : interior_) mask[global_index(static_cast<std::size_t>(v), m)] = true;
    }
    return mask;
  }

 private:
  Triangulation2D tri_;
  GradedInterval interval_;
  std::vector<int> interior_;
  std::vector<int> interior_of_vertex_;
};

inline CylinderMesh build_cylinder_mesh(Triangulation2D tri, GradedInterval interval) {
  return CylinderMesh(std::move(tri), std::move(interval));
}

}  // namespace frbm
