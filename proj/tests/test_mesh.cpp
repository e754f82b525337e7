#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "frbm/error.hpp"
#include "frbm/mesh.hpp"

using namespace frbm;

TEST(GradedPartition, NodesFollowPowerLaw) {
  const GradedInterval g = build_graded_partition(40, 6.0, 2.233);
  ASSERT_EQ(g.nodes.size(), 41u);
  EXPECT_EQ(g.nodes.front(), 0.0);
  EXPECT_EQ(g.nodes.back(), 2.233);
  for (int m = 0; m <= 40; ++m) EXPECT_NEAR(g.nodes[m], 2.233 * std::pow(m / 40.0, 6.0), 1e-15);
  for (int m = 0; m < 40; ++m) EXPECT_GT(g.element_length(m), 0.0);
}

TEST(GradedPartition, UniformWhenGammaIsOne) {
  const GradedInterval g = build_graded_partition(4, 1.0, 1.0);
  for (int m = 0; m <= 4; ++m) EXPECT_DOUBLE_EQ(g.nodes[m], m / 4.0);
}

TEST(GradedPartition, ElementsGrowMonotonically) {
  const GradedInterval g = build_graded_partition(158, 6.0, 2.233);
  for (int m = 1; m < 158; ++m) EXPECT_GT(g.element_length(m), g.element_length(m - 1));
}

TEST(GradedPartition, RejectsBadInput) {
  EXPECT_THROW(build_graded_partition(0, 2.0, 1.0), ConfigError);
  EXPECT_THROW(build_graded_partition(4, 0.0, 1.0), ConfigError);
  EXPECT_THROW(build_graded_partition(4, 2.0, -1.0), ConfigError);
  EXPECT_THROW(build_graded_partition(4, NAN, 1.0), ConfigError);
}

TEST(UnitSquare, CountsAndArea) {
  const int n = 7;
  const Triangulation2D tri = build_unit_square_triangulation(n);
  EXPECT_EQ(tri.num_vertices(), 64u);
  EXPECT_EQ(tri.num_triangles(), 98u);
  double area = 0.0;
  for (std::size_t t = 0; t < tri.num_triangles(); ++t) {
    EXPECT_NEAR(tri.signed_area(t), 0.5 / (n * n), 1e-15);
    area += tri.signed_area(t);
  }
  EXPECT_NEAR(area, 1.0, 1e-13);
  std::size_t boundary = 0;
  for (bool b : tri.boundary_mask) boundary += b;
  EXPECT_EQ(boundary, 4u * n);
}

TEST(UnitSquare, EveryInteriorEdgeIsShared) {
  const Triangulation2D tri = build_unit_square_triangulation(5);
  std::map<std::pair<int, int>, int> edges;
  for (const auto& t : tri.triangles)
    for (int a = 0; a < 3; ++a) {
      const int u = t[a], v = t[(a + 1) % 3];
      ++edges[{std::min(u, v), std::max(u, v)}];
    }
  for (const auto& [e, count] : edges) {
    const bool on_boundary = tri.boundary_mask[e.first] && tri.boundary_mask[e.second] &&
                             (tri.vertices[e.first][0] == tri.vertices[e.second][0] ||
                              tri.vertices[e.first][1] == tri.vertices[e.second][1]) &&
                             (tri.vertices[e.first][0] == 0 || tri.vertices[e.first][0] == 1 ||
                              tri.vertices[e.first][1] == 0 || tri.vertices[e.first][1] == 1);
    EXPECT_EQ(count, on_boundary ? 1 : 2);
  }
}

TEST(CylinderMesh, FreeDofLayout) {
  const CylinderMesh mesh = build_cylinder_mesh(build_unit_square_triangulation(4), build_graded_partition(3, 2.0, 1.0));
  EXPECT_EQ(mesh.num_interior(), 9u);
  EXPECT_EQ(mesh.free_dofs(), 27u);
  EXPECT_EQ(mesh.total_dofs(), 25u * 4u);
  // Vertex (1,1) has index 6 and is the first interior vertex.
  EXPECT_EQ(mesh.interior_index(6), 0);
  EXPECT_EQ(mesh.free_index(6, 0), 0);
  EXPECT_EQ(mesh.free_index(6, 2), 18);
  EXPECT_EQ(mesh.free_index(6, 3), -1);  // top level
  EXPECT_EQ(mesh.free_index(0, 0), -1);  // lateral boundary
  std::size_t free = 0;
  for (bool b : mesh.free_mask()) free += b;
  EXPECT_EQ(free, mesh.free_dofs());
}
