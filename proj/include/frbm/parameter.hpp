#pragma once

#include <cmath>
#include <string>

#include "frbm/error.hpp"

namespace frbm {

/// Point of the parameter domain: fractional order s and the load parameter
/// nu (ignored by single-load problems).
struct Parameter {
  double s = 0.5;
  double nu = 0.0;

  friend bool operator==(const Parameter&, const Parameter&) = default;
};

/// Exponent of the extension weight y^(1-2s).
inline double weight_exponent(double s) { return 1.0 - 2.0 * s; }

/// Constant d_s = 2^(1-2s) Γ(1-s)/Γ(s) of the extension's Neumann condition.
inline double extension_constant(double s) {
  if (!(s > 0.0 && s < 1.0)) throw ConfigError("extension_constant: s must lie in (0,1)");
  return std::exp2(weight_exponent(s)) * std::tgamma(1.0 - s) / std::tgamma(s);
}

/// The two pieces of the s-range that get separate interpolants, meshes and
/// reduced models: D1 = (0, 1/2], D2 = (1/2, 1).
enum class Subdomain { D1 = 1, D2 = 2 };

inline const char* to_string(Subdomain d) { return d == Subdomain::D1 ? "D1" : "D2"; }

inline Subdomain subdomain_from_string(const std::string& name) {
  if (name == "D1" || name == "1") return Subdomain::D1;
  if (name == "D2" || name == "2") return Subdomain::D2;
  throw ConfigError("unknown subdomain '" + name + "'");
}

inline Subdomain subdomain_of(double s) { return s <= 0.5 ? Subdomain::D1 : Subdomain::D2; }

// The shared endpoint s = 1/2 is accepted by both pieces so that closed
// training grids such as [0.5, 0.97] stay valid on D2.
inline bool in_subdomain(Subdomain d, double s) {
  return d == Subdomain::D1 ? (s > 0.0 && s <= 0.5) : (s >= 0.5 && s < 1.0);
}

}  // namespace frbm
