#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "field.hpp"
#include "horizon.hpp"
#include "nlgrad.hpp"

namespace nlfilm {

using Point2 = std::array<double, 2>;

struct CrossSection {
  enum class Kind { rectangle, disk };
  Kind kind = Kind::rectangle;
  std::array<double, 2> size{1.0, 1.0};  // rectangle: side lengths; disk: {radius, radius}
  Point2 center{0.0, 0.0};

  static CrossSection rectangle(double a, double b, Point2 c) {
    if (!(a > 0 && b > 0)) throw DomainError("rectangle sides must be positive");
    return {Kind::rectangle, {a, b}, c};
  }
  static CrossSection disk(double r, Point2 c) {
    if (!(r > 0)) throw DomainError("disk radius must be positive");
    return {Kind::disk, {r, r}, c};
  }

  std::string name() const { return kind == Kind::rectangle ? "rectangle" : "disk"; }

  // negative inside, positive outside
  double signed_distance(const Point2& x) const {
    const double dx = x[0] - center[0], dy = x[1] - center[1];
    if (kind == Kind::disk) return std::hypot(dx, dy) - size[0];
    const double qx = std::abs(dx) - 0.5 * size[0], qy = std::abs(dy) - 0.5 * size[1];
    const double out = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
    return out > 0.0 ? out : std::max(qx, qy);
  }
  double distance(const Point2& x) const { return std::max(0.0, signed_distance(x)); }
  bool contains(const Point2& x) const { return signed_distance(x) < 0.0; }
  std::array<double, 2> half_extent() const {
    return kind == Kind::disk ? std::array<double, 2>{size[0], size[0]}
                              : std::array<double, 2>{0.5 * size[0], 0.5 * size[1]};
  }
  double area() const {
    return kind == Kind::disk ? std::numbers::pi * size[0] * size[0] : size[0] * size[1];
  }
};

struct SlabDomain {
  CrossSection cross_section;
  double z0 = 0.0, z1 = 1.0;
  Horizon horizon;
  Grid<3> grid;

  double thickness() const { return z1 - z0; }
  double out_of_plane_distance(double x3) const { return std::max({z0 - x3, x3 - z1, 0.0}); }
  Point2 inplane(const std::array<double, 3>& x) const { return {x[0], x[1]}; }
  Grid<2> inplane_grid() const { return Grid<2>({grid.dims[0], grid.dims[1]}, {grid.lengths[0], grid.lengths[1]}); }
  SlabDomain with_horizon(const Horizon& h) const {
    SlabDomain d = *this;
    d.horizon = h;
    return d;
  }
};

inline double inplane_distance(const SlabDomain& d, const Point2& x) { return d.cross_section.distance(x); }

// fattened set membership: (dbar / hbar)^2 + (d3 / h3)^2 < 1, zero radius forcing zero distance
inline bool in_fattened(const SlabDomain& d, const Horizon& h, const std::array<double, 3>& x) {
  const double sd = d.cross_section.signed_distance({x[0], x[1]});
  double t = 0.0;
  if (h.inplane > 0.0) {
    const double db = std::max(0.0, sd) / h.inplane;
    t += db * db;
  } else if (!(sd < 0.0)) {
    return false;
  }
  if (h.outofplane > 0.0) {
    const double d3 = d.out_of_plane_distance(x[2]) / h.outofplane;
    t += d3 * d3;
  } else if (!(x[2] > d.z0 && x[2] < d.z1)) {
    return false;
  }
  return t < 1.0;
}

inline bool in_fattened_section(const SlabDomain& d, double inplane, const Point2& x) {
  const double sd = d.cross_section.signed_distance(x);
  if (inplane > 0.0) return sd < inplane;
  return sd < 0.0;
}

// Ω_δ plus one cell per side must sit inside the torus cell without wrapping
inline void check_clearance(const SlabDomain& d, const Horizon& h) {
  const auto he = d.cross_section.half_extent();
  for (int a = 0; a < 2; ++a) {
    const double lo = d.cross_section.center[a] - he[a] - h.inplane;
    const double hi = d.cross_section.center[a] + he[a] + h.inplane;
    const double cell = d.grid.spacing(a) * (1.0 - 1e-9);
    if (lo < cell || hi > d.grid.lengths[a] - cell) throw GeometryError("fattened domain does not fit the torus", a);
  }
  const double cell = d.grid.spacing(2) * (1.0 - 1e-9);
  if (d.z0 - h.outofplane < cell || d.z1 + h.outofplane > d.grid.lengths[2] - cell)
    throw GeometryError("fattened domain does not fit the torus", 2);
}

struct DomainMasks {
  Mask omega;           // Ω, 3-D
  Mask fattened;        // Ω_δ, 3-D
  Mask section_fattened;  // ω_δ̄, 2-D
};

inline DomainMasks masks(const SlabDomain& d) {
  if (!(d.z1 > d.z0)) throw DomainError("interval must have positive length");
  check_clearance(d, d.horizon);
  const auto& g = d.grid;
  DomainMasks m;
  m.omega.assign(g.size(), 0);
  m.fattened.assign(g.size(), 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto x = g.node(i);
    m.omega[i] = d.cross_section.contains({x[0], x[1]}) && x[2] > d.z0 && x[2] < d.z1;
    m.fattened[i] = in_fattened(d, d.horizon, x);
  }
  const Grid<2> g2 = d.inplane_grid();
  m.section_fattened.assign(g2.size(), 0);
  for (std::size_t i = 0; i < g2.size(); ++i) m.section_fattened[i] = in_fattened_section(d, d.horizon.inplane, g2.node(i));
  return m;
}

// fiber length of Ω_{δ⁰} over x̄, relative to |I|
inline double limit_weight(const SlabDomain& d, const Horizon& limit, const Point2& x) {
  const double db = d.cross_section.distance(x);
  const double len = d.thickness();
  if (limit.inplane > 0.0) {
    if (db > limit.inplane * (1.0 + 1e-12)) throw DomainError("point lies outside the fattened cross-section");
    const double t = std::min(1.0, db / limit.inplane);
    return (len + 2.0 * limit.outofplane * std::sqrt(1.0 - t * t)) / len;
  }
  if (db > 0.0) throw DomainError("point lies outside the cross-section");
  return (len + 2.0 * limit.outofplane) / len;
}

// ---------------------------------------------------------------------------
// discrete masks of the compact realization

// Ω and its discrete interaction reach under the operator (used as the support Ω_δ)
inline DomainMasks reach_masks(const SlabDomain& d, const NonlocalOperator<3>& op) {
  check_clearance(d, op.horizon());
  DomainMasks m = masks(d.with_horizon(op.horizon()));
  const auto& g = d.grid;
  // detect periodic self-overlap of the reach
  std::array<int, 3> lo{1 << 30, 1 << 30, 1 << 30}, hi{-(1 << 30), -(1 << 30), -(1 << 30)};
  std::array<int, 3> slo{0, 0, 0}, shi{0, 0, 0};
  for (const auto& e : op.stencil())
    for (int a = 0; a < 3; ++a) {
      slo[a] = std::min(slo[a], e.offset[a]);
      shi[a] = std::max(shi[a], e.offset[a] + 1);
    }
  for (std::size_t i = 0; i < g.size(); ++i)
    if (m.omega[i]) {
      const auto x = g.unravel(i);
      for (int a = 0; a < 3; ++a) lo[a] = std::min(lo[a], x[a]), hi[a] = std::max(hi[a], x[a]);
    }
  for (int a = 0; a < 3; ++a)
    if (hi[a] >= lo[a] && (hi[a] + shi[a]) - (lo[a] + slo[a]) + 1 > g.dims[a])
      throw GeometryError("interaction reach wraps around the torus", a);
  m.fattened = op.interaction_reach(m.omega);
  const Grid<2> g2 = d.inplane_grid();
  m.section_fattened.assign(g2.size(), 0);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (m.fattened[i]) {
      const auto x = g.unravel(i);
      m.section_fattened[g2.ravel({x[0], x[1]})] = 1;
    }
  return m;
}

// ---------------------------------------------------------------------------
// column utilities between the slab grid and its cross-section grid

// x3-count of mask nodes per column, times h3 / |I|
inline Field<2> column_weights(const SlabDomain& d, const Mask& mask3) {
  const auto& g = d.grid;
  Field<2> w(d.inplane_grid(), 1);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (mask3[i]) {
      const auto x = g.unravel(i);
      w.data[w.grid.ravel({x[0], x[1]})] += g.spacing(2) / d.thickness();
    }
  return w;
}

// x3-independent extension of a cross-section field, restricted to `mask3`
inline Field<3> lift(const Field<2>& u, const Grid<3>& g, const Mask* mask3 = nullptr) {
  Field<3> out(g, u.components);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (mask3 && !(*mask3)[i]) continue;
    const auto x = g.unravel(i);
    const std::size_t j = u.grid.ravel({x[0], x[1]});
    for (int c = 0; c < u.components; ++c) out(c, i) = u(c, j);
  }
  if (mask3) out.support = *mask3;
  return out;
}

// mean over the mask nodes of each column (0 for empty columns)
inline Field<2> column_average(const Field<3>& u, const Mask& mask3) {
  const auto& g = u.grid;
  const Grid<2> g2({g.dims[0], g.dims[1]}, {g.lengths[0], g.lengths[1]});
  Field<2> out(g2, u.components);
  std::vector<int> count(g2.size(), 0);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (mask3[i]) {
      const auto x = g.unravel(i);
      const std::size_t j = g2.ravel({x[0], x[1]});
      ++count[j];
      for (int c = 0; c < u.components; ++c) out(c, j) += u(c, i);
    }
  for (std::size_t j = 0; j < g2.size(); ++j)
    if (count[j] > 0)
      for (int c = 0; c < u.components; ++c) out(c, j) /= count[j];
  return out;
}

// integral over x3 (sum times h3)
inline Field<2> column_integral(const Field<3>& u) {
  const auto& g = u.grid;
  const Grid<2> g2({g.dims[0], g.dims[1]}, {g.lengths[0], g.lengths[1]});
  Field<2> out(g2, u.components);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto x = g.unravel(i);
    const std::size_t j = g2.ravel({x[0], x[1]});
    for (int c = 0; c < u.components; ++c) out(c, j) += u(c, i) * g.spacing(2);
  }
  return out;
}

}  // namespace nlfilm
