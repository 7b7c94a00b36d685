#pragma once

#include <array>
#include <string>

#include "error.hpp"

namespace nlfilm {

// in-plane and out-of-plane interaction radii; scaling diag(inplane, inplane, outofplane)
struct Horizon {
  double inplane = 0.0;
  double outofplane = 0.0;

  Horizon() = default;
  Horizon(double in, double out) : inplane(in), outofplane(out) {
    if (!(in >= 0.0 && in <= 1.0) || !(out >= 0.0 && out <= 1.0))
      throw DomainError("horizon components must lie in [0, 1]");
  }

  std::array<double, 3> scaling() const { return {inplane, inplane, outofplane}; }
  bool local() const { return inplane == 0.0 && outofplane == 0.0; }
  bool operator==(const Horizon& o) const { return inplane == o.inplane && outofplane == o.outofplane; }

  // physical horizon seen in the thickness-rescaled slab: (inplane, outofplane / eps)
  Horizon rescaled(double eps) const {
    if (!(eps > 0.0)) throw DomainError("thickness must be positive");
    if (outofplane > eps * (1.0 + 1e-12))
      throw RegimeError("out-of-plane horizon " + std::to_string(outofplane) + " exceeds thickness " +
                        std::to_string(eps) + " (requires outofplane <= eps)");
    return Horizon(inplane, std::min(1.0, outofplane / eps));
  }
};

enum class Regime { aniso, iso };

inline std::string to_string(Regime r) { return r == Regime::aniso ? "aniso" : "iso"; }

inline Regime regime_from_string(const std::string& s) {
  if (s == "aniso") return Regime::aniso;
  if (s == "iso") return Regime::iso;
  throw DomainError("unknown regime '" + s + "' (expected aniso|iso)");
}

// physical horizon at thickness eps: (1, eps) or (eps, eps)
inline Horizon physical_horizon(Regime r, double eps) {
  return r == Regime::aniso ? Horizon(1.0, eps) : Horizon(eps, eps);
}

inline Horizon rescaled_horizon(Regime r, double eps) { return physical_horizon(r, eps).rescaled(eps); }

inline Horizon limit_horizon(Regime r) { return r == Regime::aniso ? Horizon(1.0, 1.0) : Horizon(0.0, 1.0); }

}  // namespace nlfilm
