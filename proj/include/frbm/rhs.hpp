#pragma once

#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "frbm/error.hpp"
#include "frbm/fem2d.hpp"
#include "frbm/truth.hpp"

namespace frbm {

/// One sine mode c·φ_jk with φ_jk = 2 sin(jπx1) sin(kπx2).
struct ModalTerm {
  int j = 1;
  int k = 1;
  double coeff = 1.0;
};

enum class RhsKind { Example1, Example2, Modal };

/// Right-hand side f(x; ν) = Σ_p ρ_p(ν) f_p(x).
///   example1: f = sin(2πx1) sin(2πx2), one component
///   example2: f = ν² sin(2πx1)sin(2πx2) + (1-ν²) sin(3πx1)sin(3πx2)e^(x1 x2)
///   modal:    f = Σ c φ_jk, one component
struct RhsSpec {
  RhsKind kind = RhsKind::Example1;
  std::vector<ModalTerm> modes;
};

inline const char* to_string(RhsKind k) {
  switch (k) {
    case RhsKind::Example1: return "example1";
    case RhsKind::Example2: return "example2";
    case RhsKind::Modal: return "modal";
  }
  return "?";
}

inline RhsKind rhs_kind_from_string(const std::string& name) {
  if (name == "example1") return RhsKind::Example1;
  if (name == "example2") return RhsKind::Example2;
  if (name == "modal") return RhsKind::Modal;
  throw ConfigError("unknown rhs '" + name + "' (expected example1, example2 or modal)");
}

/// Parses "j:k:c,j:k:c,...".
inline std::vector<ModalTerm> parse_modal_terms(const std::string& text) {
  std::vector<ModalTerm> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(pos, end - pos);
    ModalTerm t;
    char c1 = 0;
    char c2 = 0;
    int consumed = 0;
    if (std::sscanf(item.c_str(), "%d%c%d%c%lf%n", &t.j, &c1, &t.k, &c2, &t.coeff, &consumed) != 5 || c1 != ':' ||
        c2 != ':' || consumed != static_cast<int>(item.size()) || t.j < 1 || t.k < 1) {
      throw ConfigError("bad modal term '" + item + "' (expected j:k:coeff with j,k >= 1)");
    }
    out.push_back(t);
    pos = end + 1;
  }
  if (out.empty()) throw ConfigError("modal rhs needs at least one term");
  return out;
}

inline std::size_t rhs_num_components(const RhsSpec& spec) { return spec.kind == RhsKind::Example2 ? 2 : 1; }

inline bool rhs_depends_on_nu(const RhsSpec& spec) { return spec.kind == RhsKind::Example2; }

inline std::vector<ScalarFunction2D> rhs_components(const RhsSpec& spec) {
  using std::numbers::pi;
  const ScalarFunction2D f1 = [](double x1, double x2) { return std::sin(2 * pi * x1) * std::sin(2 * pi * x2); };
  switch (spec.kind) {
    case RhsKind::Example1: return {f1};
    case RhsKind::Example2:
      return {f1, [](double x1, double x2) {
                return std::sin(3 * pi * x1) * std::sin(3 * pi * x2) * std::exp(x1 * x2);
              }};
    case RhsKind::Modal: {
      const auto modes = spec.modes;
      return {[modes](double x1, double x2) {
        double acc = 0.0;
        for (const auto& t : modes) acc += t.coeff * 2.0 * std::sin(t.j * pi * x1) * std::sin(t.k * pi * x2);
        return acc;
      }};
    }
  }
  return {};
}

/// ρ_p(ν): (ν², 1-ν²) for example2, (1) otherwise.
inline std::vector<double> rhs_coefficients(const RhsSpec& spec, double nu) {
  if (spec.kind == RhsKind::Example2) return {nu * nu, 1.0 - nu * nu};
  return {1.0};
}

/// Free-dof load ∫_Ω f tr φ: the 2D load of f on the bottom level.
inline Vector assemble_load(const TruthDiscretization& truth, const ScalarFunction2D& f,
                            const TriangleRule& rule = triangle_rule_degree4()) {
  return truth.bottom_lift(assemble_load_2d(truth.mesh().triangulation(), f, rule));
}

inline std::vector<Vector> assemble_loads(const TruthDiscretization& truth, const RhsSpec& spec) {
  std::vector<Vector> out;
  for (const auto& f : rhs_components(spec)) out.push_back(assemble_load(truth, f));
  return out;
}

inline Vector combine_loads(const std::vector<Vector>& loads, const std::vector<double>& rho) {
  Vector out = Vector::Zero(loads.front().size());
  for (std::size_t p = 0; p < loads.size(); ++p) out += rho[p] * loads[p];
  return out;
}

}  // namespace frbm
