#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "field.hpp"
#include "geometry.hpp"
#include "nlgrad.hpp"

namespace nlfilm {

// first two columns of a 3x3 matrix
using Mat32 = std::array<std::array<double, 2>, 3>;

inline Mat3 join_columns(const Mat32& bar, const Vec3& a) {
  Mat3 f{};
  for (int i = 0; i < 3; ++i) f[i] = {bar[i][0], bar[i][1], a[i]};
  return f;
}

inline Mat32 bar_part(const Mat3& f) {
  Mat32 b{};
  for (int i = 0; i < 3; ++i) b[i] = {f[i][0], f[i][1]};
  return b;
}

inline double frobenius2(const Mat3& f) {
  double s = 0.0;
  for (const auto& r : f)
    for (double v : r) s += v * v;
  return s;
}

// c|F|^p - C <= W(F) <= C(|F|^p + 1)
struct Growth {
  double lower = 1.0;
  double upper = 1.0;
  double p = 2.0;
};

struct ReducedValue {
  double value = 0.0;
  Vec3 minimizer{};
};

struct EnergyDensity {
  std::string family;
  double p = 2.0;
  double alpha = 0.0;
  Vec3 target{};  // v in |F e3 - v|
  Growth growth;
  bool convex = true;
  std::function<double(const Mat3&)> value;
  std::function<Mat3(const Mat3&)> derivative;
  std::function<ReducedValue(const Mat32&)> reduced_closed_form;  // empty when unknown

  double operator()(const Mat3& f) const { return value(f); }
};

// W(F) = |F|^p
inline EnergyDensity power_density(double p = 2.0) {
  if (!(p > 1.0)) throw ParameterError("power density needs p > 1");
  EnergyDensity w;
  w.family = "power";
  w.p = p;
  w.growth = {1.0, 1.0, p};
  w.value = [p](const Mat3& f) { return std::pow(frobenius2(f), 0.5 * p); };
  w.derivative = [p](const Mat3& f) {
    const double n2 = frobenius2(f);
    const double s = n2 > 0.0 ? p * std::pow(n2, 0.5 * p - 1.0) : 0.0;
    Mat3 d{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) d[i][j] = s * f[i][j];
    return d;
  };
  w.reduced_closed_form = [p](const Mat32& b) {
    return ReducedValue{std::pow(frobenius2(join_columns(b, {})), 0.5 * p), {}};
  };
  return w;
}

// W(F) = |F|^2 + alpha |F e3 - v|^2
inline EnergyDensity anisotropic_density(double alpha, const Vec3& v) {
  if (!(alpha >= 0.0)) throw ParameterError("anisotropic density needs alpha >= 0");
  EnergyDensity w;
  w.family = "anisotropic";
  w.alpha = alpha;
  w.target = v;
  const double v2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
  w.growth = {1.0, std::max({1.0 + 2.0 * alpha, 2.0 * alpha * v2, 1.0}), 2.0};
  w.value = [alpha, v](const Mat3& f) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += (f[i][2] - v[i]) * (f[i][2] - v[i]);
    return frobenius2(f) + alpha * s;
  };
  w.derivative = [alpha, v](const Mat3& f) {
    Mat3 d{};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) d[i][j] = 2.0 * f[i][j];
      d[i][2] += 2.0 * alpha * (f[i][2] - v[i]);
    }
    return d;
  };
  w.reduced_closed_form = [alpha, v, v2](const Mat32& b) {
    ReducedValue r;
    for (int i = 0; i < 3; ++i) r.minimizer[i] = alpha * v[i] / (1.0 + alpha);
    r.value = frobenius2(join_columns(b, {})) + alpha / (1.0 + alpha) * v2;
    return r;
  };
  return w;
}

// W(F) = (|F|^2 - 1)^2, non-convex
inline EnergyDensity double_well_density() {
  EnergyDensity w;
  w.family = "double-well";
  w.p = 4.0;
  w.convex = false;
  w.growth = {0.5, 1.0, 4.0};
  w.value = [](const Mat3& f) {
    const double t = frobenius2(f) - 1.0;
    return t * t;
  };
  w.derivative = [](const Mat3& f) {
    const double s = 4.0 * (frobenius2(f) - 1.0);
    Mat3 d{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) d[i][j] = s * f[i][j];
    return d;
  };
  return w;
}

inline EnergyDensity density_from_name(const std::string& family, double p, double alpha, const Vec3& v) {
  if (family == "power") return power_density(p);
  if (family == "anisotropic") return anisotropic_density(alpha, v);
  if (family == "double-well") return double_well_density();
  throw ParameterError("unknown density family '" + family + "' (expected power|anisotropic|double-well)");
}

// ---------------------------------------------------------------------------
// reduced density min_a W(Ā | a)

namespace detail {

struct LocalMin {
  Eigen::Vector3d x;
  double value = 0.0;
  double gradient = 0.0;
  bool converged = false;
};

inline LocalMin bfgs3(const std::function<double(const Eigen::Vector3d&, Eigen::Vector3d&)>& f, Eigen::Vector3d x,
                      double gtol, int max_iters = 500) {
  Eigen::Vector3d g;
  double fx = f(x, g);
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
  LocalMin out;
  for (int it = 0; it < max_iters; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= gtol) {
      out.converged = true;
      break;
    }
    Eigen::Vector3d dir = -h * g;
    if (dir.dot(g) >= 0.0) {
      h.setIdentity();
      dir = -g;
    }
    double t = 1.0;
    Eigen::Vector3d xn, gn;
    double fn = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + t * dir;
      fn = f(xn, gn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * t * dir.dot(g)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    const Eigen::Vector3d s = xn - x, y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      const double r = 1.0 / sy;
      const Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
      h = (id - r * s * y.transpose()) * h * (id - r * y * s.transpose()) + r * s * s.transpose();
    }
    x = xn;
    g = gn;
    fx = fn;
  }
  out.x = x;
  out.value = fx;
  out.gradient = g.lpNorm<Eigen::Infinity>();
  out.converged = out.converged || out.gradient <= gtol;
  return out;
}

}  // namespace detail

class ReducedDensity {
 public:
  enum class Envelope { exact_convex, raw };

  explicit ReducedDensity(EnergyDensity w, bool use_closed_form = true)
      : w_(std::move(w)), closed_(use_closed_form && bool(w_.reduced_closed_form)) {}

  const EnergyDensity& source() const { return w_; }
  Envelope envelope() const { return w_.convex ? Envelope::exact_convex : Envelope::raw; }

  ReducedValue operator()(const Mat32& bar) const { return closed_ ? w_.reduced_closed_form(bar) : minimize(bar); }

  // multistart quasi-Newton over the third column
  ReducedValue minimize(const Mat32& bar, double gtol = 1e-8, std::uint64_t seed = 7) const {
    const auto obj = [&](const Eigen::Vector3d& a, Eigen::Vector3d& g) {
      const Mat3 f = join_columns(bar, {a[0], a[1], a[2]});
      const Mat3 d = w_.derivative(f);
      for (int i = 0; i < 3; ++i) g[i] = d[i][2];
      return w_.value(f);
    };
    std::vector<Eigen::Vector3d> starts{Eigen::Vector3d::Zero()};
    for (int j = 0; j < 2; ++j) {
      const Eigen::Vector3d col(bar[0][j], bar[1][j], bar[2][j]);
      starts.push_back(col);
      starts.push_back(-col);
    }
    if (!w_.convex) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> n;
      starts.emplace_back(n(rng), n(rng), n(rng));
    }
    bool any = false;
    detail::LocalMin best;
    double worst_grad = 0.0;
    for (const auto& s : starts) {
      const auto r = detail::bfgs3(obj, s, gtol);
      worst_grad = std::max(worst_grad, r.gradient);
      if (!r.converged) continue;
      if (!any || r.value < best.value) best = r;
      any = true;
      if (w_.convex) break;
    }
    if (!any)
      throw OptimizationError("reduced density: no start reached gradient tolerance (best gradient " +
                              std::to_string(worst_grad) + ")");
    return {best.value, {best.x[0], best.x[1], best.x[2]}};
  }

  // dW̄/dĀ = first two columns of DW(Ā | a*)
  Mat32 derivative(const Mat32& bar, const Vec3& minimizer) const {
    return bar_part(w_.derivative(join_columns(bar, minimizer)));
  }

 private:
  EnergyDensity w_;
  bool closed_;
};

inline ReducedValue reduced_density(const EnergyDensity& w, const Mat32& bar) {
  return ReducedDensity(w, false).minimize(bar);
}

// ---------------------------------------------------------------------------
// functionals

struct EnergyTerms {
  double bulk = 0.0;
  double stab_lp = 0.0;
  double stab_nl = 0.0;
  double force = 0.0;  // -<f, u>
  double lambda = 0.0;
  double total() const { return bulk + lambda * (stab_lp + stab_nl) + force; }
};

namespace detail {

inline bool violates(const Field<3>& u, const Mask& support) {
  for (int c = 0; c < u.components; ++c)
    for (std::size_t i = 0; i < u.nodes(); ++i)
      if (!support[i] && u(c, i) != 0.0) return true;
  return false;
}

inline Mat3 jacobian_at(const Field<3>& g, std::size_t i, double eps) {
  Mat3 f{};
  for (int c = 0; c < 3; ++c)
    for (int d = 0; d < 3; ++d) f[c][d] = g(c * 3 + d, i) / (d == 2 ? eps : 1.0);
  return f;
}

}  // namespace detail

// the ε-rescaled operator; throws when the out-of-plane horizon exceeds the thickness
inline NonlocalOperator<3> thin_film_operator(const RadialKernel& k, const Horizon& physical, double eps,
                                              const Grid<3>& g, Realization r = Realization::compact) {
  return NonlocalOperator<3>(k, physical.rescaled(eps), g, r);
}

// ∫_Ω W((D u) T^{-1}) with T^{-1} = diag(1, 1, 1/eps); `grad` receives the L2 gradient masked to the support
inline double thin_energy(const EnergyDensity& w, const NonlocalOperator<3>& op, const DomainMasks& m, double eps,
                          const Field<3>& u, Field<3>* grad = nullptr) {
  if (!(eps > 0.0)) throw DomainError("thickness must be positive");
  if (u.components != 3) throw ShapeError("deformation must have 3 components");
  if (detail::violates(u, m.fattened)) return std::numeric_limits<double>::infinity();
  const Field<3> g = op.gradient(u);
  const double vol = u.grid.cell_volume();
  long double e = 0.0;  // wide accumulators keep line-search differences above roundoff
  Field<3> stress(u.grid, 9);
  for (std::size_t i = 0; i < u.nodes(); ++i) {
    if (!m.omega[i]) continue;
    const Mat3 f = detail::jacobian_at(g, i, eps);
    e += w.value(f) * vol;
    if (grad) {
      const Mat3 d = w.derivative(f);
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 3; ++k) stress(c * 3 + k, i) = d[c][k] / (k == 2 ? eps : 1.0);
    }
  }
  if (grad) {
    *grad = op.divergence(stress);
    *grad *= -1.0;
    grad->restrict_to(m.fattened);
  }
  return double(e);
}

struct StabilizerTerms {
  double lp = 0.0;
  double nonlocal = 0.0;
  double total() const { return lp + nonlocal; }
};

// ∫|u|^p + per-column Σ_{x3 != x3'} |u(x3) - u(x3')|^p / (eps |x3 - x3'|), both over the support mask
inline StabilizerTerms stabilizer(const Mask& support, double eps, double p, const Field<3>& u,
                                  Field<3>* grad = nullptr) {
  const auto& g = u.grid;
  const double vol = g.cell_volume(), h3 = g.spacing(2);
  const int n3 = g.dims[2], nc = u.components;
  StabilizerTerms t;
  long double lp = 0.0, nonlocal = 0.0;
  if (grad) *grad = Field<3>(g, nc);
  std::vector<double> du(nc);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!support[i]) continue;
    double n2 = 0.0;
    for (int c = 0; c < nc; ++c) n2 += u(c, i) * u(c, i);
    lp += std::pow(n2, 0.5 * p) * vol;
    if (grad && n2 > 0.0) {
      const double s = p * std::pow(n2, 0.5 * p - 1.0);
      for (int c = 0; c < nc; ++c) (*grad)(c, i) += s * u(c, i);
    }
  }
  // columns: nodes with equal in-plane index are contiguous in the last axis
  for (std::size_t col = 0; col < g.size(); col += n3) {
    for (int a = 0; a < n3; ++a) {
      const std::size_t ia = col + a;
      if (!support[ia]) continue;
      for (int b = a + 1; b < n3; ++b) {
        const std::size_t ib = col + b;
        if (!support[ib]) continue;
        double n2 = 0.0;
        for (int c = 0; c < nc; ++c) {
          du[c] = u(c, ia) - u(c, ib);
          n2 += du[c] * du[c];
        }
        const double dist = eps * (b - a) * h3;
        // ordered pairs (a, b) and (b, a)
        nonlocal += 2.0 * std::pow(n2, 0.5 * p) / dist * vol * h3;
        if (grad && n2 > 0.0) {
          const double s = 2.0 * p * std::pow(n2, 0.5 * p - 1.0) / dist * h3;
          for (int c = 0; c < nc; ++c) {
            (*grad)(c, ia) += s * du[c];
            (*grad)(c, ib) -= s * du[c];
          }
        }
      }
    }
  }
  t.lp = double(lp);
  t.nonlocal = double(nonlocal);
  if (grad) grad->restrict_to(support);
  return t;
}

// -<f, u> and its L2 gradient
inline double force_term(const Field<3>& f, const Field<3>& u, const Mask& support, Field<3>* grad = nullptr) {
  long double s = 0.0;
  for (std::size_t k = 0; k < u.data.size(); ++k) s += f.data[k] * u.data[k];
  if (grad) {
    *grad = f;
    *grad *= -1.0;
    grad->restrict_to(support);
  }
  return double(-s * u.grid.cell_volume());
}

inline EnergyTerms stabilized_energy(const EnergyDensity& w, const NonlocalOperator<3>& op, const DomainMasks& m,
                                     double eps, double lambda, const Field<3>& u, const Field<3>* force = nullptr,
                                     Field<3>* grad = nullptr) {
  if (!(lambda > 0.0)) throw ParameterError("stabilization parameter lambda must be positive");
  EnergyTerms t;
  t.lambda = lambda;
  Field<3> gb, gs, gf;
  t.bulk = thin_energy(w, op, m, eps, u, grad ? &gb : nullptr);
  if (!std::isfinite(t.bulk)) return t;
  const auto s = stabilizer(m.fattened, eps, w.p, u, grad ? &gs : nullptr);
  t.stab_lp = s.lp;
  t.stab_nl = s.nonlocal;
  if (force) t.force = force_term(*force, u, m.fattened, grad ? &gf : nullptr);
  if (grad) {
    gs *= lambda;
    gb += gs;
    if (force) gb += gf;
    *grad = std::move(gb);
    grad->support = m.fattened;
  }
  return t;
}

// ---------------------------------------------------------------------------
// 2-D limit functional

struct LimitGeometry {
  Mask section;             // columns carrying Ω nodes
  Mask support;             // columns carrying Ω_δ⁰ nodes
  Field<2> bulk_weight;     // Ω column length (≈ |I| on the section)
  Field<2> limit_weight;    // Ω_δ⁰ column length / |I|
  double thickness = 1.0;
};

// discrete columns of Ω and of the reach of the limit operator
inline LimitGeometry limit_geometry(const SlabDomain& d, const DomainMasks& limit_masks) {
  LimitGeometry lg;
  lg.thickness = d.thickness();
  lg.bulk_weight = column_weights(d, limit_masks.omega);
  lg.bulk_weight *= d.thickness();
  lg.limit_weight = column_weights(d, limit_masks.fattened);
  lg.section.assign(lg.bulk_weight.nodes(), 0);
  lg.support.assign(lg.bulk_weight.nodes(), 0);
  for (std::size_t i = 0; i < lg.section.size(); ++i) {
    lg.section[i] = lg.bulk_weight.data[i] > 0.0;
    lg.support[i] = lg.limit_weight.data[i] > 0.0;
  }
  return lg;
}

struct LimitEnergy {
  EnergyTerms terms;
  bool upper_bound = false;  // W̄ used in place of its quasiconvex envelope
  double value() const { return terms.total(); }
};

// ∫_ω W̄(D̄ ū) + λ ∫ d |ū|^p - <f̄, ū>; `grad` receives the L2 gradient on the 2-D grid
inline LimitEnergy limit_energy(const ReducedDensity& wbar, const NonlocalOperator<2>& op2, const LimitGeometry& lg,
                                double lambda, const Field<2>& ubar, const Field<2>* force = nullptr,
                                Field<2>* grad = nullptr, bool accept_upper_bound = false) {
  if (!(lambda > 0.0)) throw ParameterError("stabilization parameter lambda must be positive");
  LimitEnergy out;
  if (wbar.envelope() == ReducedDensity::Envelope::raw) {
    if (!accept_upper_bound)
      throw EnvelopeError("quasiconvex envelope unavailable for non-convex density '" + wbar.source().family + "'");
    out.upper_bound = true;
  }
  if (ubar.components != 3) throw ShapeError("limit deformation must have 3 components");
  const auto& g = ubar.grid;
  const double area = g.cell_volume();
  out.terms.lambda = lambda;
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!lg.support[i] && ubar(c, i) != 0.0) {
        out.terms.bulk = std::numeric_limits<double>::infinity();
        return out;
      }
  const Field<2> dg = op2.gradient(ubar);
  Field<2> stress(g, 6);
  long double bulk = 0.0, stab = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!lg.section[i]) continue;
    Mat32 b{};
    for (int c = 0; c < 3; ++c) b[c] = {dg(c * 2, i), dg(c * 2 + 1, i)};
    const ReducedValue r = wbar(b);
    const double wgt = lg.bulk_weight.data[i] * area;
    bulk += r.value * wgt;
    if (grad) {
      const Mat32 d = wbar.derivative(b, r.minimizer);
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 2; ++k) stress(c * 2 + k, i) = d[c][k] * lg.bulk_weight.data[i];
    }
  }
  const double p = wbar.source().p;
  Field<2> gl(g, 3);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!lg.support[i]) continue;
    double n2 = 0.0;
    for (int c = 0; c < 3; ++c) n2 += ubar(c, i) * ubar(c, i);
    const double wgt = lg.limit_weight.data[i] * lg.thickness;
    stab += std::pow(n2, 0.5 * p) * wgt * area;
    if (grad && n2 > 0.0)
      for (int c = 0; c < 3; ++c) gl(c, i) = lambda * wgt * p * std::pow(n2, 0.5 * p - 1.0) * ubar(c, i);
  }
  out.terms.bulk = double(bulk);
  out.terms.stab_lp = double(stab);
  if (force) {
    long double s = 0.0;
    for (std::size_t k = 0; k < ubar.data.size(); ++k) s += force->data[k] * ubar.data[k];
    out.terms.force = double(-s * area);
  }
  if (grad) {
    *grad = op2.divergence(stress);
    *grad *= -1.0;
    *grad += gl;
    if (force) *grad -= *force;
    grad->restrict_to(lg.support);
  }
  return out;
}

// ---------------------------------------------------------------------------
// forces

struct ForceSpec {
  Field<3> potential;        // V, 9 channels supported in Ω
  Field<3> force;            // Div at δ^ε
  Field<3> limit_force;      // Div at δ⁰
  Field<2> reduced_limit;    // ∫ f₀ dx3
};

inline Field<3> force_from_potential(const NonlocalOperator<3>& op, const Field<3>& v, const Mask& omega) {
  if (v.components != 9) throw ShapeError("force potential needs 9 channels");
  if (detail::violates(v, omega)) throw SupportError("force potential is not supported in Ω");
  return op.divergence(v);
}

inline ForceSpec admissible_force(const Field<3>& v, const Mask& omega, const NonlocalOperator<3>& op_eps,
                                  const NonlocalOperator<3>& op_limit) {
  ForceSpec fs;
  fs.potential = v;
  fs.force = force_from_potential(op_eps, v, omega);
  fs.limit_force = force_from_potential(op_limit, v, omega);
  fs.reduced_limit = column_integral(fs.limit_force);
  return fs;
}

// <f, h> in the grid L2 for a scalar field h placed in channel c
inline double force_pairing(const Field<3>& f, const Field<3>& h, int channel) {
  double s = 0.0;
  for (std::size_t i = 0; i < h.nodes(); ++i) s += f(channel, i) * h.data[i];
  return s * h.grid.cell_volume();
}

// smooth in-plane stress potential vanishing on ∂ω, restricted to Ω; third column zero
inline Field<3> smooth_potential(const SlabDomain& d, const Mask& omega, double amplitude = 1.0) {
  const auto& g = d.grid;
  const auto& cs = d.cross_section;
  Field<3> v(g, 9);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!omega[i]) continue;
    const auto x = g.node(i);
    double t1 = 0.0, t2 = 0.0, bump = 0.0;
    if (cs.kind == CrossSection::Kind::rectangle) {
      t1 = 2.0 * (x[0] - cs.center[0]) / cs.size[0];
      t2 = 2.0 * (x[1] - cs.center[1]) / cs.size[1];
      bump = std::pow(std::max(0.0, 1.0 - t1 * t1), 2) * std::pow(std::max(0.0, 1.0 - t2 * t2), 2);
    } else {
      t1 = (x[0] - cs.center[0]) / cs.size[0];
      t2 = (x[1] - cs.center[1]) / cs.size[0];
      bump = std::pow(std::max(0.0, 1.0 - t1 * t1 - t2 * t2), 2);
    }
    const double a = amplitude * bump;
    v(0, i) = 0.8 * a;
    v(1, i) = 0.3 * t1 * a;
    v(3, i) = -0.5 * a;
    v(4, i) = 0.6 * t2 * a;
    v(6, i) = 0.4 * a;
    v(7, i) = 0.2 * t1 * t2 * a;
  }
  v.support = omega;
  return v;
}

}  // namespace nlfilm
