#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <deque>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "energy.hpp"
#include "geometry.hpp"
#include "horizon.hpp"
#include "kernel.hpp"
#include "nlgrad.hpp"

namespace nlfilm {

struct MinimizeConfig {
  int max_iters = 20000;
  double gradient_tol = 1e-6;  // sup norm of the L2 gradient
  double backtrack = 0.5;
  double armijo = 1e-4;
  int memory = 12;

  void validate() const {
    if (max_iters < 1 || !(gradient_tol > 0.0) || !(backtrack > 0.0 && backtrack < 1.0) ||
        !(armijo > 0.0 && armijo < 1.0) || memory < 1)
      throw ParameterError("invalid minimizer configuration");
  }
};

// value and Euclidean gradient of a function of nodal values; `metric` converts to the L2 gradient
struct Objective {
  std::size_t size = 0;
  double metric = 1.0;
  std::function<double(const std::vector<double>&, std::vector<double>&)> evaluate;
  std::function<void(std::vector<double>&)> precondition;  // optional approximate inverse Hessian, in place
};

struct MinimizeResult {
  std::vector<double> x;
  double value = 0.0;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
  std::string stop_reason;
};

// limited-memory BFGS; a step is taken on Armijo decrease, or on a non-increasing value with a
// sufficiently reduced directional derivative once differences in f sit at roundoff
inline MinimizeResult minimize(const Objective& obj, std::vector<double> x, const MinimizeConfig& cfg) {
  cfg.validate();
  if (x.size() != obj.size) throw ShapeError("initial point has the wrong size");
  const std::size_t n = obj.size;
  const auto dot = [n](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
  };
  const auto supnorm = [&](const std::vector<double>& g) {
    double s = 0.0;
    for (double v : g) s = std::max(s, std::abs(v));
    return s / obj.metric;
  };
  MinimizeResult res;
  std::vector<double> g(n), gn(n), xn(n), dir(n);
  double f = obj.evaluate(x, g);
  if (!std::isfinite(f)) throw OptimizationError("initial point has non-finite energy");
  res.trace.push_back(f);
  std::deque<std::vector<double>> ss, ys;
  std::deque<double> rhos;
  std::vector<double> alpha(cfg.memory);
  for (int it = 0; it < cfg.max_iters; ++it) {
    res.gradient_norm = supnorm(g);
    if (res.gradient_norm <= cfg.gradient_tol) {
      res.converged = true;
      res.stop_reason = "gradient tolerance reached";
      break;
    }
    // two-loop recursion
    dir = g;
    for (int k = int(ss.size()) - 1; k >= 0; --k) {
      alpha[k] = rhos[k] * dot(ss[k], dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] -= alpha[k] * ys[k][i];
    }
    double gamma = 1.0;
    if (obj.precondition) {
      obj.precondition(dir);
      if (!ss.empty()) {
        std::vector<double> my = ys.back();
        obj.precondition(my);
        gamma = dot(ss.back(), ys.back()) / dot(ys.back(), my);
      }
    } else {
      gamma = ss.empty() ? 1.0 / std::max(1.0, supnorm(g) * obj.metric)
                         : dot(ss.back(), ys.back()) / dot(ys.back(), ys.back());
    }
    for (double& v : dir) v *= gamma;
    for (std::size_t k = 0; k < ss.size(); ++k) {
      const double b = rhos[k] * dot(ys[k], dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] += (alpha[k] - b) * ss[k][i];
    }
    for (double& v : dir) v = -v;
    double slope = dot(dir, g);
    if (!(slope < 0.0)) {
      ss.clear(), ys.clear(), rhos.clear();
      for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i] / std::max(1.0, supnorm(g) * obj.metric);
      slope = dot(dir, g);
    }
    double t = 1.0, fn = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + t * dir[i];
      fn = obj.evaluate(xn, gn);
      if (std::isfinite(fn) && fn <= f + cfg.armijo * t * slope) {
        accepted = true;
        break;
      }
      if (std::isfinite(fn) && fn <= f && std::abs(dot(dir, gn)) <= 0.9 * std::abs(slope)) {
        accepted = true;
        break;
      }
      t *= cfg.backtrack;
    }
    if (!accepted) {
      res.stop_reason = "line search failed";
      break;
    }
    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = xn[i] - x[i], y[i] = gn[i] - g[i];
    const double sy = dot(s, y);
    if (sy > 1e-16 * std::sqrt(dot(s, s) * dot(y, y))) {
      if (int(ss.size()) == cfg.memory) ss.pop_front(), ys.pop_front(), rhos.pop_front();
      ss.push_back(std::move(s));
      ys.push_back(std::move(y));
      rhos.push_back(1.0 / sy);
    }
    x.swap(xn);
    g.swap(gn);
    f = fn;
    res.trace.push_back(f);
    res.iterations = it + 1;
  }
  if (!res.converged) {
    res.gradient_norm = supnorm(g);
    if (res.gradient_norm <= cfg.gradient_tol) res.converged = true;
    if (res.stop_reason.empty()) res.stop_reason = "iteration budget exhausted";
  }
  res.x = std::move(x);
  res.value = f;
  return res;
}

// ---------------------------------------------------------------------------
// problems on the free nodes of a support mask

template <int Dim>
struct Packing {
  Grid<Dim> grid;
  Mask support;
  std::vector<std::size_t> nodes;
  int components = 3;

  Packing() = default;
  Packing(const Grid<Dim>& g, const Mask& m, int comps) : grid(g), support(m), components(comps) {
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i]) nodes.push_back(i);
  }
  std::size_t size() const { return nodes.size() * std::size_t(components); }
  Field<Dim> unpack(const std::vector<double>& x) const {
    Field<Dim> u(grid, components);
    for (int c = 0; c < components; ++c)
      for (std::size_t j = 0; j < nodes.size(); ++j) u(c, nodes[j]) = x[c * nodes.size() + j];
    u.support = support;
    return u;
  }
  std::vector<double> pack(const Field<Dim>& u) const {
    std::vector<double> x(size());
    for (int c = 0; c < components; ++c)
      for (std::size_t j = 0; j < nodes.size(); ++j) x[c * nodes.size() + j] = u(c, nodes[j]);
    return x;
  }
};

// nominal second derivative of W along in-plane and third columns
inline std::array<double, 2> column_stiffness(const EnergyDensity& w) {
  if (w.family == "anisotropic") return {2.0, 2.0 * (1.0 + w.alpha)};
  return {w.p, w.p};
}

// inverse of a translation-invariant model of the Euclidean Hessian, applied on the packed nodes
template <int Dim>
std::function<void(std::vector<double>&)> spectral_preconditioner(const NonlocalOperator<Dim>& op,
                                                                  const Packing<Dim>& packing,
                                                                  std::vector<double> hessian_symbol) {
  const double vol = op.grid().cell_volume();
  for (double& v : hessian_symbol) v = 1.0 / (vol * v);
  return [&op, &packing, inv = std::move(hessian_symbol)](std::vector<double>& r) {
    r = packing.pack(op.apply_mode_factor(packing.unpack(r), inv));
  };
}

// ℐ_ε^stab - <f_ε, ·> over fields supported on Ω_δ^ε
struct ThinFilmProblem {
  const EnergyDensity* density = nullptr;
  const NonlocalOperator<3>* op = nullptr;
  DomainMasks masks;
  double eps = 1.0;
  double lambda = 1.0;
  std::optional<Field<3>> force;
  Packing<3> packing;

  ThinFilmProblem(const EnergyDensity& w, const NonlocalOperator<3>& o, DomainMasks m, double e, double l,
                  std::optional<Field<3>> f = std::nullopt)
      : density(&w), op(&o), masks(std::move(m)), eps(e), lambda(l), force(std::move(f)),
        packing(o.grid(), masks.fattened, 3) {}

  EnergyTerms energy(const Field<3>& u, Field<3>* grad = nullptr) const {
    return stabilized_energy(*density, *op, masks, eps, lambda, u, force ? &*force : nullptr, grad);
  }

  Objective objective() const {
    Objective o;
    o.size = packing.size();
    o.metric = op->grid().cell_volume();
    o.evaluate = [this, m = o.metric](const std::vector<double>& x, std::vector<double>& g) {
      Field<3> grad;
      const double e = energy(packing.unpack(x), &grad).total();
      g = packing.pack(grad);
      for (double& v : g) v *= m;
      return e;
    };
    o.precondition = spectral_preconditioner(*op, packing, hessian_symbol());
    return o;
  }

  std::vector<double> hessian_symbol() const {
    const auto& g = op->grid();
    const auto stiff = column_stiffness(*density);
    const double p = density->p, h3 = g.spacing(2);
    const int n3 = g.dims[2];
    std::vector<double> h(g.spectral_size());
    const auto& s1 = op->gradient_symbol(0);
    const auto& s2 = op->gradient_symbol(1);
    const auto& s3 = op->gradient_symbol(2);
    op->for_each_mode([&](std::size_t m, const std::array<int, 3>& i) {
      const double theta = op->axes().xi[2][i[2]] * h3;
      double column = 0.0;
      for (int k = 1; k < n3; ++k) column += 4.0 * p * (1.0 - std::cos(theta * k)) / (eps * k);
      h[m] = stiff[0] * (std::norm(s1[m]) + std::norm(s2[m])) + stiff[1] * std::norm(s3[m]) / (eps * eps) +
             lambda * (p + column);
    });
    return h;
  }
};

// ℐ^stab - <f̄₀, ·> over cross-section fields supported on the limit columns
struct LimitProblem {
  const ReducedDensity* density = nullptr;
  const NonlocalOperator<2>* op = nullptr;
  LimitGeometry geometry;
  double lambda = 1.0;
  std::optional<Field<2>> force;
  bool accept_upper_bound = false;
  Packing<2> packing;

  LimitProblem(const ReducedDensity& w, const NonlocalOperator<2>& o, LimitGeometry lg, double l,
               std::optional<Field<2>> f = std::nullopt, bool upper = false)
      : density(&w), op(&o), geometry(std::move(lg)), lambda(l), force(std::move(f)), accept_upper_bound(upper),
        packing(o.grid(), geometry.support, 3) {}

  LimitEnergy energy(const Field<2>& u, Field<2>* grad = nullptr) const {
    return limit_energy(*density, *op, geometry, lambda, u, force ? &*force : nullptr, grad, accept_upper_bound);
  }

  Objective objective() const {
    Objective o;
    o.size = packing.size();
    o.metric = op->grid().cell_volume();
    o.evaluate = [this, m = o.metric](const std::vector<double>& x, std::vector<double>& g) {
      Field<2> grad;
      const double e = energy(packing.unpack(x), &grad).value();
      g = packing.pack(grad);
      for (double& v : g) v *= m;
      return e;
    };
    o.precondition = spectral_preconditioner(*op, packing, hessian_symbol());
    return o;
  }

  std::vector<double> hessian_symbol() const {
    const double stiff = column_stiffness(density->source())[0], p = density->source().p;
    const double t = geometry.thickness;
    const auto& s1 = op->gradient_symbol(0);
    const auto& s2 = op->gradient_symbol(1);
    std::vector<double> h(op->grid().spectral_size());
    for (std::size_t m = 0; m < h.size(); ++m) h[m] = t * (stiff * (std::norm(s1[m]) + std::norm(s2[m])) + lambda * p);
    return h;
  }
};

// ---------------------------------------------------------------------------
// recovery sequence

// 1_{Ω_δ^ε}(ū + eps (x3 - z0) b) with b = P̄ d at the in-plane horizon of `op2`
inline Field<3> recovery_field(const Field<2>& ubar, const Field<2>& dfield, const NonlocalOperator<2>& op2,
                               const SlabDomain& d, const Mask& support, double eps, double floor = 1e-8) {
  if (ubar.components != 3 || dfield.components != 3) throw ShapeError("recovery data must have 3 components");
  const Field<2> b = op2.inverse_average(dfield, floor).field;
  const auto& g = d.grid;
  Field<3> u(g, 3);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!support[i]) continue;
    const auto x = g.unravel(i);
    const std::size_t j = ubar.grid.ravel({x[0], x[1]});
    const double z = g.node(x)[2] - d.z0;
    for (int c = 0; c < 3; ++c) u(c, i) = ubar(c, j) + eps * z * b(c, j);
  }
  u.support = support;
  return u;
}

struct RecoveryStep {
  double eps = 0.0;
  Horizon horizon;
  Field<3> field;
};

// fields u_ε for each ε, using the rescaled horizons of `regime`
inline std::vector<RecoveryStep> recovery_sequence(const RadialKernel& k, const RadialKernel& reduced, Regime regime,
                                                   const SlabDomain& d, const Field<2>& ubar, const Field<2>& dfield,
                                                   const std::vector<double>& eps_list) {
  std::vector<RecoveryStep> out;
  for (double eps : eps_list) {
    const Horizon h = rescaled_horizon(regime, eps);
    const NonlocalOperator<3> op(k, h, d.grid, Realization::compact);
    const NonlocalOperator<2> op2(reduced, Horizon(h.inplane, 0.0), d.inplane_grid(), Realization::compact);
    const DomainMasks m = reach_masks(d, op);
    out.push_back({eps, h, recovery_field(ubar, dfield, op2, d, m.fattened, eps)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Γ-sweep

struct SweepConfig {
  Regime regime = Regime::aniso;
  std::vector<double> eps_list{0.4, 0.2, 0.1, 0.05};
  double lambda = 1.0;
  MinimizeConfig minimize;
  int threads = 1;
  double slack = 0.1;  // allowed relative increase per step of a trend
  int test_fields = 20;
};

struct SweepRecord {
  double eps = 0.0;
  Horizon horizon;  // rescaled δ^ε
  EnergyTerms terms;
  double energy = 0.0;
  double gap = 0.0;       // |min ℐ_ε^stab - min ℐ^stab|
  double distance = 0.0;  // L2 distance of the x3-average to the limit minimizer
  double recovery_energy = 0.0;
  double limit_of_average = 0.0;  // ℐ^stab at the x3-average
  double scaled_gradient_lp = 0.0;  // ||(D u) T^{-1}||_{L^p(Ω)}
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
  std::vector<double> pairings;
  Field<3> minimizer;
  Field<2> averaged;
};

struct LimitRecord {
  Horizon horizon;  // δ⁰
  LimitEnergy energy;
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
  std::vector<double> pairings;
  Field<2> minimizer;
};

struct SweepResult {
  Regime regime = Regime::aniso;
  std::vector<SweepRecord> records;  // decreasing ε
  LimitRecord limit;
  bool complete = true;
  std::string failure;
  bool energy_trend = false;
  bool distance_trend = false;
  bool recovery_bound = false;
};

// a[i] <= (1 + slack) a[i-1] for every step
inline bool non_increasing(const std::vector<double>& a, double slack, double abs_tol = 1e-12) {
  for (std::size_t i = 1; i < a.size(); ++i)
    if (a[i] > a[i - 1] * (1.0 + slack) + abs_tol) return false;
  return true;
}

// smooth fields φ_k on the torus for weak-convergence pairings
inline Field<3> test_field(const Grid<3>& g, int k) {
  const int c = k % 3, a = 1 + (k / 3) % 3, b = 1 + (k / 9) % 3;
  const double ph = 0.37 * k;
  Field<3> f(g, 3);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto x = g.node(i);
    f(c, i) = std::sin(2.0 * std::numbers::pi * a * x[0] / g.lengths[0] + ph) *
              std::cos(2.0 * std::numbers::pi * b * x[1] / g.lengths[1] - ph) *
              (1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * x[2] / g.lengths[2] + ph));
  }
  return f;
}

inline double pairing(const Field<3>& u, const Field<3>& phi) {
  double s = 0.0;
  for (std::size_t k = 0; k < u.data.size(); ++k) s += u.data[k] * phi.data[k];
  return s * u.grid.cell_volume();
}

inline double scaled_gradient_norm(const NonlocalOperator<3>& op, const Mask& omega, double eps, double p,
                                   const Field<3>& u) {
  const Field<3> g = op.gradient(u);
  double s = 0.0;
  for (std::size_t i = 0; i < u.nodes(); ++i)
    if (omega[i]) s += std::pow(frobenius2(detail::jacobian_at(g, i, eps)), 0.5 * p);
  return std::pow(s * u.grid.cell_volume(), 1.0 / p);
}

// optimal third columns a*(D̄ ū) of the limit minimizer
inline Field<2> optimal_third_column(const ReducedDensity& wbar, const NonlocalOperator<2>& op2, const Field<2>& ubar) {
  const Field<2> dg = op2.gradient(ubar);
  Field<2> out(ubar.grid, 3);
  for (std::size_t i = 0; i < ubar.nodes(); ++i) {
    Mat32 b{};
    for (int c = 0; c < 3; ++c) b[c] = {dg(c * 2, i), dg(c * 2 + 1, i)};
    const ReducedValue r = wbar(b);
    for (int c = 0; c < 3; ++c) out(c, i) = r.minimizer[c];
  }
  return out;
}

// `potential` has 9 channels supported in Ω (or is empty for zero force)
inline SweepResult gamma_sweep(const RadialKernel& k, const SlabDomain& d, const EnergyDensity& w,
                               const SweepConfig& cfg, const std::optional<Field<3>>& potential = std::nullopt) {
  if (!(cfg.lambda > 0.0)) throw ParameterError("stabilization parameter lambda must be positive");
  if (cfg.eps_list.empty()) throw ParameterError("empty eps list");
  for (std::size_t i = 1; i < cfg.eps_list.size(); ++i)
    if (!(cfg.eps_list[i] < cfg.eps_list[i - 1])) throw ParameterError("eps list must be strictly decreasing");
  if (!w.convex) throw EnvelopeError("Γ-sweep diagnostics need a convex density");
  cfg.minimize.validate();

  const RadialKernel kbar = reduce_kernel(k);
  const ReducedDensity wbar(w);
  SweepResult out;
  out.regime = cfg.regime;
  const Grid<3>& g = d.grid;
  const Grid<2> g2 = d.inplane_grid();
  std::vector<Field<3>> phis;
  for (int j = 0; j < cfg.test_fields; ++j) phis.push_back(test_field(g, j));

  // limit problem
  const Horizon h0 = limit_horizon(cfg.regime);
  const NonlocalOperator<3> op_lim(k, h0, g, Realization::compact);
  const DomainMasks m_lim = reach_masks(d, op_lim);
  const LimitGeometry lg = limit_geometry(d, m_lim);
  const NonlocalOperator<2> op2_lim(kbar, Horizon(h0.inplane, 0.0), g2, Realization::compact);
  std::optional<Field<2>> fbar;
  if (potential) fbar = column_integral(force_from_potential(op_lim, *potential, m_lim.omega));
  const LimitProblem lp(wbar, op2_lim, lg, cfg.lambda, fbar);
  {
    const auto r = minimize(lp.objective(), std::vector<double>(lp.packing.size(), 0.0), cfg.minimize);
    out.limit.horizon = h0;
    out.limit.minimizer = lp.packing.unpack(r.x);
    out.limit.energy = lp.energy(out.limit.minimizer);
    out.limit.iterations = r.iterations;
    out.limit.converged = r.converged;
    out.limit.gradient_norm = r.gradient_norm;
    const Field<3> lifted = lift(out.limit.minimizer, g, &m_lim.fattened);
    for (const auto& phi : phis) out.limit.pairings.push_back(pairing(lifted, phi));
  }
  const Field<2> dstar = optimal_third_column(wbar, op2_lim, out.limit.minimizer);

  std::vector<SweepRecord> recs(cfg.eps_list.size());
  std::vector<std::string> errors(cfg.eps_list.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&]() {
    for (std::size_t idx = next++; idx < recs.size(); idx = next++) {
      try {
        SweepRecord& rec = recs[idx];
        const double eps = cfg.eps_list[idx];
        rec.eps = eps;
        rec.horizon = rescaled_horizon(cfg.regime, eps);
        const NonlocalOperator<3> op(k, rec.horizon, g, Realization::compact);
        const DomainMasks m = reach_masks(d, op);
        std::optional<Field<3>> f;
        if (potential) f = force_from_potential(op, *potential, m.omega);
        const ThinFilmProblem prob(w, op, m, eps, cfg.lambda, f);
        const auto r = minimize(prob.objective(), std::vector<double>(prob.packing.size(), 0.0), cfg.minimize);
        rec.minimizer = prob.packing.unpack(r.x);
        rec.terms = prob.energy(rec.minimizer);
        rec.energy = rec.terms.total();
        rec.iterations = r.iterations;
        rec.converged = r.converged;
        rec.gradient_norm = r.gradient_norm;
        rec.scaled_gradient_lp = scaled_gradient_norm(op, m.omega, eps, w.p, rec.minimizer);
        rec.averaged = column_average(rec.minimizer, m.fattened);
        double dist = 0.0;
        for (std::size_t i = 0; i < rec.averaged.data.size(); ++i) {
          const double e = rec.averaged.data[i] - out.limit.minimizer.data[i];
          dist += e * e;
        }
        rec.distance = std::sqrt(dist * g2.cell_volume());
        Field<2> avg = rec.averaged;
        avg.restrict_to(lg.support);
        rec.limit_of_average = lp.energy(avg).value();
        const NonlocalOperator<2> op2(kbar, Horizon(rec.horizon.inplane, 0.0), g2, Realization::compact);
        const Field<3> urec = recovery_field(out.limit.minimizer, dstar, op2, d, m.fattened, eps);
        rec.recovery_energy = prob.energy(urec).total();
        for (const auto& phi : phis) rec.pairings.push_back(pairing(rec.minimizer, phi));
        if (!r.converged)
          errors[idx] = "minimizer did not converge at eps=" + std::to_string(eps) + " (" + r.stop_reason +
                        ", gradient " + std::to_string(r.gradient_norm) + ")";
      } catch (const std::exception& e) {
        errors[idx] = e.what();
      }
    }
  };
  const int nt = std::max(1, std::min<int>(cfg.threads, int(recs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (!errors[i].empty()) {
      out.complete = false;
      out.failure = errors[i];
      if (recs[i].minimizer.data.empty()) break;
      recs[i].gap = std::abs(recs[i].energy - out.limit.energy.value());
      out.records.push_back(std::move(recs[i]));
      break;
    }
    recs[i].gap = std::abs(recs[i].energy - out.limit.energy.value());
    out.records.push_back(std::move(recs[i]));
  }
  if (!out.limit.converged) {
    out.complete = false;
    if (out.failure.empty()) out.failure = "limit minimizer did not converge";
  }
  std::vector<double> gaps, dists;
  out.recovery_bound = true;
  for (const auto& r : out.records) {
    gaps.push_back(r.gap);
    dists.push_back(r.distance);
    if (r.energy > r.recovery_energy + 1e-9 * std::max(1.0, std::abs(r.recovery_energy))) out.recovery_bound = false;
  }
  out.energy_trend = out.complete && non_increasing(gaps, cfg.slack);
  out.distance_trend = out.complete && non_increasing(dists, cfg.slack);
  return out;
}

struct CompactnessReport {
  double sup_scaled_gradient = 0.0;
  double median_scaled_gradient = 0.0;
  bool non_exploding = true;  // no value above 10x the median
  std::vector<double> stabilizer_nonlocal;
  bool stabilizer_decreasing = true;
  std::vector<double> pairing_error;  // max_k |<u_ε, φ_k> - <u_0, φ_k>|
};

inline CompactnessReport compactness_diagnostic(const SweepResult& s) {
  CompactnessReport rep;
  std::vector<double> norms;
  for (const auto& r : s.records) {
    norms.push_back(r.scaled_gradient_lp);
    rep.stabilizer_nonlocal.push_back(r.terms.stab_nl);
    double e = 0.0;
    for (std::size_t j = 0; j < r.pairings.size() && j < s.limit.pairings.size(); ++j)
      e = std::max(e, std::abs(r.pairings[j] - s.limit.pairings[j]));
    rep.pairing_error.push_back(e);
  }
  if (!norms.empty()) {
    rep.sup_scaled_gradient = *std::max_element(norms.begin(), norms.end());
    auto sorted = norms;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    rep.median_scaled_gradient = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    for (double v : norms)
      if (v > 10.0 * rep.median_scaled_gradient + 1e-300) rep.non_exploding = false;
  }
  for (std::size_t i = 1; i < rep.stabilizer_nonlocal.size(); ++i)
    if (rep.stabilizer_nonlocal[i] > rep.stabilizer_nonlocal[i - 1] * (1.0 + 1e-9) + 1e-300)
      rep.stabilizer_decreasing = false;
  return rep;
}

}  // namespace nlfilm
