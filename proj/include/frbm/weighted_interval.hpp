#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "frbm/error.hpp"
#include "frbm/mesh.hpp"
#include "frbm/tridiagonal.hpp"

namespace frbm {

/// Local matrices of one element [a, b] for the weight y^alpha:
/// mass {M00, M01, M11} of the two hat functions and the stiffness scale
/// s = ∫ y^alpha / h², so the local stiffness is s·[1 -1; -1 1].
struct WeightedElement {
  long double m00 = 0;
  long double m01 = 0;
  long double m11 = 0;
  long double stiff = 0;
};

/// Closed-form power-rule integrals; evaluated in extended precision because
/// the moment combinations cancel like (b/h)².
inline WeightedElement weighted_element(double a_, double b_, double alpha) {
  const long double a = a_;
  const long double b = b_;
  const long double h = b - a;
  std::array<long double, 3> mom{};
  for (int k = 0; k < 3; ++k) {
    const long double p = static_cast<long double>(alpha) + k + 1;
    const long double bp = std::pow(b, p);
    const long double ap = a > 0 ? std::pow(a, p) : 0.0L;
    mom[k] = (bp - ap) / p;
  }
  const long double h2 = h * h;
  WeightedElement e;
  e.m00 = (b * b * mom[0] - 2 * b * mom[1] + mom[2]) / h2;
  e.m11 = (a * a * mom[0] - 2 * a * mom[1] + mom[2]) / h2;
  e.m01 = (-a * b * mom[0] + (a + b) * mom[1] - mom[2]) / h2;
  e.stiff = mom[0] / h2;
  return e;
}

/// Weighted 1D mass and stiffness matrices on all M+1 nodes of the partition.
struct WeightedIntervalMatrices {
  SymTridiagonal mass;
  SymTridiagonal stiffness;
};

inline WeightedIntervalMatrices weighted_interval_matrices(const GradedInterval& interval, double alpha) {
  if (!(alpha > -1.0) || !std::isfinite(alpha)) throw ConfigError("weighted interval matrices: need alpha > -1");
  const std::size_t n = interval.nodes.size();
  WeightedIntervalMatrices out{SymTridiagonal(n), SymTridiagonal(n)};
  for (int m = 0; m < interval.M; ++m) {
    const WeightedElement e = weighted_element(interval.nodes[m], interval.nodes[m + 1], alpha);
    out.mass.diag[m] += static_cast<double>(e.m00);
    out.mass.diag[m + 1] += static_cast<double>(e.m11);
    out.mass.off[m] += static_cast<double>(e.m01);
    out.stiffness.diag[m] += static_cast<double>(e.stiff);
    out.stiffness.diag[m + 1] += static_cast<double>(e.stiff);
    out.stiffness.off[m] -= static_cast<double>(e.stiff);
  }
  return out;
}

}  // namespace frbm
