#pragma once

#include <array>
#include <vector>

namespace frbm {

/// Quadrature point on the reference triangle in barycentric coordinates;
/// weights sum to one and are scaled by the element area at use.
struct TriangleQuadPoint {
  std::array<double, 3> bary;
  double weight;
};

using TriangleRule = std::vector<TriangleQuadPoint>;

namespace detail {

inline void push_orbit3(TriangleRule& rule, double a, double w) {
  const double b = 1.0 - 2.0 * a;
  rule.push_back({{a, a, b}, w});
  rule.push_back({{a, b, a}, w});
  rule.push_back({{b, a, a}, w});
}

inline void push_orbit6(TriangleRule& rule, double a, double b, double w) {
  const double c = 1.0 - a - b;
  rule.push_back({{a, b, c}, w});
  rule.push_back({{a, c, b}, w});
  rule.push_back({{b, a, c}, w});
  rule.push_back({{b, c, a}, w});
  rule.push_back({{c, a, b}, w});
  rule.push_back({{c, b, a}, w});
}

}  // namespace detail

// Symmetric Dunavant rules.

/// 6 points, exact for degree 4.
inline const TriangleRule& triangle_rule_degree4() {
  static const TriangleRule rule = [] {
    TriangleRule r;
    detail::push_orbit3(r, 0.445948490915964886, 0.223381589678011466);
    detail::push_orbit3(r, 0.091576213509770743, 0.109951743655321868);
    return r;
  }();
  return rule;
}

/// 7 points, exact for degree 5.
inline const TriangleRule& triangle_rule_degree5() {
  static const TriangleRule rule = [] {
    TriangleRule r;
    r.push_back({{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, 0.225});
    detail::push_orbit3(r, 0.470142064105115090, 0.132394152788506181);
    detail::push_orbit3(r, 0.101286507323456339, 0.125939180544827153);
    return r;
  }();
  return rule;
}

/// 12 points, exact for degree 6.
inline const TriangleRule& triangle_rule_degree6() {
  static const TriangleRule rule = [] {
    TriangleRule r;
    detail::push_orbit3(r, 0.249286745170910421, 0.116786275726379366);
    detail::push_orbit3(r, 0.063089014491502228, 0.050844906370206817);
    detail::push_orbit6(r, 0.053145049844816947, 0.310352451033784405, 0.082851075618373575);
    return r;
  }();
  return rule;
}

}  // namespace frbm
