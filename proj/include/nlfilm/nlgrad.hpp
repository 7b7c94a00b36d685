#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include "field.hpp"
#include "horizon.hpp"
#include "kernel.hpp"

namespace nlfilm {

// spectral: exact multiplier of the averaged kernel and exact derivative symbols.
// compact: cell-integrated kernel weights with forward differences; strictly local,
// so masked problems never see leakage across the support boundary.
enum class Realization { spectral, compact };

inline std::string to_string(Realization r) { return r == Realization::spectral ? "spectral" : "compact"; }

template <int Dim>
struct StencilEntry {
  std::array<int, Dim> offset{};
  double weight = 0.0;
};

namespace detail {

// integral of Q(|z|) over an axis-aligned box, splitting toward the singularity
template <int Dim>
double box_integral(const RadialKernel& k, const std::array<double, Dim>& lo, const std::array<double, Dim>& hi) {
  double d2 = 0.0, ext = 0.0;
  int longest = 0;
  for (int a = 0; a < Dim; ++a) {
    const double c = lo[a] > 0.0 ? lo[a] : (hi[a] < 0.0 ? -hi[a] : 0.0);
    d2 += c * c;
    if (hi[a] - lo[a] > ext) {
      ext = hi[a] - lo[a];
      longest = a;
    }
  }
  if (d2 >= 1.0 || ext <= 0.0) return 0.0;
  const double d = std::sqrt(d2);
  if (ext > 0.5 * d || ext > 0.25) {
    auto mid_hi = hi, mid_lo = lo;
    const double mid = 0.5 * (lo[longest] + hi[longest]);
    mid_hi[longest] = mid;
    mid_lo[longest] = mid;
    return box_integral<Dim>(k, lo, mid_hi) + box_integral<Dim>(k, mid_lo, hi);
  }
  const auto& g = quad::gauss_rule<8>();
  double sum = 0.0;
  std::array<int, Dim> i{};
  while (true) {
    double r2 = 0.0, w = 1.0;
    for (int a = 0; a < Dim; ++a) {
      const double half = 0.5 * (hi[a] - lo[a]);
      const double z = 0.5 * (hi[a] + lo[a]) + half * g.x[i[a]];
      r2 += z * z;
      w *= g.w[i[a]] * half;
    }
    sum += w * k.q(std::sqrt(r2));
    int a = Dim - 1;
    while (a >= 0 && ++i[a] == 8) i[a--] = 0;
    if (a < 0) break;
  }
  return sum;
}

}  // namespace detail

// Cell weights of the scaled averaging kernel: weight of the cell at offset j is the
// mass of Q over the preimage of that cell under the horizon scaling. The origin cell
// takes the complement so the weights sum to one exactly.
template <int Dim>
std::vector<StencilEntry<Dim>> compact_stencil(const RadialKernel& k, const std::array<double, Dim>& scale,
                                               const std::array<double, Dim>& spacing) {
  if (k.dimension() != Dim) throw DomainError("kernel dimension does not match operator dimension");
  std::array<int, Dim> reach{};
  for (int a = 0; a < Dim; ++a)
    reach[a] = scale[a] > 0.0 ? std::max(0, int(std::ceil(scale[a] / spacing[a] + 0.5)) - 1) : 0;

  std::vector<StencilEntry<Dim>> out;
  double total = 0.0;
  std::array<int, Dim> j{};
  while (true) {
    bool origin = true;
    for (int a = 0; a < Dim; ++a) origin = origin && j[a] == 0;
    if (!origin) {
      std::array<double, Dim> lo{}, hi{};
      for (int a = 0; a < Dim; ++a) {
        if (scale[a] > 0.0) {
          lo[a] = std::clamp((j[a] - 0.5) * spacing[a] / scale[a], -1.0, 1.0);
          hi[a] = std::clamp((j[a] + 0.5) * spacing[a] / scale[a], -1.0, 1.0);
        } else {
          lo[a] = -1.0;
          hi[a] = 1.0;
        }
      }
      const double w = detail::box_integral<Dim>(k, lo, hi);
      if (w > 0.0) {
        // mirror into every sign pattern
        for (int mask = 0; mask < (1 << Dim); ++mask) {
          std::array<int, Dim> o = j;
          bool dup = false;
          for (int a = 0; a < Dim; ++a) {
            if (mask & (1 << a)) {
              if (j[a] == 0) dup = true;
              o[a] = -j[a];
            }
          }
          if (dup) continue;
          out.push_back({o, w});
          total += w;
        }
      }
    }
    int a = Dim - 1;
    while (a >= 0 && ++j[a] > reach[a]) j[a--] = 0;
    if (a < 0) break;
  }
  out.push_back({std::array<int, Dim>{}, 1.0 - total});
  return out;
}

struct InverseReport {
  std::size_t clamped_modes = 0;
  double clamped_energy_fraction = 0.0;
};

template <int Dim>
struct InverseResult {
  Field<Dim> field;
  InverseReport report;
};

template <int Dim>
class NonlocalOperator {
 public:
  NonlocalOperator(const RadialKernel& k, const Horizon& h, const Grid<Dim>& g,
                   Realization r = Realization::spectral)
      : kernel_(k), horizon_(h), grid_(g), realization_(r), axes_(g) {
    if (k.dimension() != Dim) throw DomainError("kernel dimension does not match operator dimension");
    for (int a = 0; a < Dim; ++a) scale_[a] = a < 2 ? h.inplane : h.outofplane;
    build_derivatives();
    if (r == Realization::spectral)
      build_spectral_multiplier();
    else
      build_compact_multiplier();
    for (int d = 0; d < Dim; ++d) {
      symbol_[d].resize(grid_.spectral_size());
      for_each_mode([&](std::size_t m, const std::array<int, Dim>& i) { symbol_[d][m] = deriv_[d][i[d]] * mult_[m]; });
    }
  }

  const RadialKernel& kernel() const { return kernel_; }
  const Horizon& horizon() const { return horizon_; }
  const Grid<Dim>& grid() const { return grid_; }
  Realization realization() const { return realization_; }
  const std::array<double, Dim>& scaling() const { return scale_; }
  const std::vector<double>& multiplier() const { return mult_; }
  const std::vector<StencilEntry<Dim>>& stencil() const { return stencil_; }
  std::complex<double> derivative_symbol(int axis, int index) const { return deriv_[axis][index]; }
  const std::vector<std::complex<double>>& gradient_symbol(int axis) const { return symbol_[axis]; }
  const SpectralAxes<Dim>& axes() const { return axes_; }

  Field<Dim> average(const Field<Dim>& u) const {
    check(u);
    return apply_scalar(u, [&](std::size_t m) { return std::complex<double>(mult_[m], 0.0); });
  }

  // derivative symbol alone, no averaging
  Field<Dim> local_gradient(const Field<Dim>& u) const {
    check(u);
    return apply_gradient(u, [&](int d, std::size_t, const std::array<int, Dim>& i) { return deriv_[d][i[d]]; });
  }

  // channel layout c * Dim + d: row = component, column = direction
  Field<Dim> gradient(const Field<Dim>& u) const {
    check(u);
    return apply_gradient(u, [&](int d, std::size_t m, const std::array<int, Dim>&) { return symbol_[d][m]; });
  }

  // adjoint of the gradient up to sign: <D phi, psi> = -<phi, Div psi>
  Field<Dim> divergence(const Field<Dim>& v) const {
    check(v);
    if (v.components % Dim != 0) throw ShapeError("divergence needs components * Dim channels");
    const int comps = v.components / Dim;
    Field<Dim> out(grid_, comps);
    const std::size_t nm = grid_.spectral_size();
    std::vector<std::complex<double>> in(nm), acc(nm);
    for (int c = 0; c < comps; ++c) {
      std::fill(acc.begin(), acc.end(), std::complex<double>{});
      for (int d = 0; d < Dim; ++d) {
        detail::forward_channel(grid_, v.channel(c * Dim + d), in.data());
        const auto& s = symbol_[d];
        for (std::size_t m = 0; m < nm; ++m) acc[m] -= std::conj(s[m]) * in[m];
      }
      detail::inverse_channel(grid_, acc, out.channel(c));
    }
    return out;
  }

  InverseResult<Dim> inverse_average(const Field<Dim>& v, double floor = 1e-8) const {
    check(v);
    InverseResult<Dim> res{Field<Dim>(grid_, v.components), {}};
    const std::size_t nm = grid_.spectral_size();
    std::vector<std::complex<double>> s(nm);
    double clamped = 0.0, total = 0.0;
    std::vector<std::uint8_t> is_clamped(nm, 0);
    for (std::size_t m = 0; m < nm; ++m)
      if (std::abs(mult_[m]) < floor) is_clamped[m] = 1;
    for (int c = 0; c < v.components; ++c) {
      detail::forward_channel(grid_, v.channel(c), s.data());
      for_each_mode([&](std::size_t m, const std::array<int, Dim>& i) {
        const int last = i[Dim - 1];
        const double w = (last == 0 || last == grid_.dims[Dim - 1] / 2) ? 1.0 : 2.0;
        const double e = w * std::norm(s[m]);
        total += e;
        if (is_clamped[m]) {
          clamped += e;
          s[m] /= mult_[m] < 0.0 ? -floor : floor;
        } else {
          s[m] /= mult_[m];
        }
      });
      detail::inverse_channel(grid_, s, res.field.channel(c));
    }
    for (auto b : is_clamped) res.report.clamped_modes += b;
    res.report.clamped_energy_fraction = total > 0.0 ? clamped / total : 0.0;
    if (res.report.clamped_energy_fraction > 0.01) throw IllConditionedError(res.report.clamped_energy_fraction);
    return res;
  }

  // nodes touched by the gradient evaluated on `region` (compact realization only)
  Mask interaction_reach(const Mask& region) const {
    if (realization_ != Realization::compact)
      throw UnsupportedCaseError("interaction reach is defined for the compact realization only");
    if (region.size() != grid_.size()) throw ShapeError("mask size does not match grid");
    std::vector<std::array<int, Dim>> offs;
    for (const auto& e : stencil_) {
      offs.push_back(e.offset);
      for (int d = 0; d < Dim; ++d) {
        auto o = e.offset;
        ++o[d];
        offs.push_back(o);
      }
    }
    std::sort(offs.begin(), offs.end());
    offs.erase(std::unique(offs.begin(), offs.end()), offs.end());
    Mask out(grid_.size(), 0);
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      if (!region[i]) continue;
      const auto x = grid_.unravel(i);
      for (const auto& o : offs) {
        auto y = x;
        for (int a = 0; a < Dim; ++a) y[a] += o[a];
        out[grid_.ravel_wrapped(y)] = 1;
      }
    }
    return out;
  }

  template <class F>
  void for_each_mode(F&& f) const {
    const auto sd = grid_.spectral_dims();
    std::size_t m = 0;
    if constexpr (Dim == 3) {
      for (int a = 0; a < sd[0]; ++a)
        for (int b = 0; b < sd[1]; ++b)
          for (int c = 0; c < sd[2]; ++c) f(m++, std::array<int, 3>{a, b, c});
    } else {
      for (int a = 0; a < sd[0]; ++a)
        for (int b = 0; b < sd[1]; ++b) f(m++, std::array<int, 2>{a, b});
    }
  }

 private:
  RadialKernel kernel_;
  Horizon horizon_;
  Grid<Dim> grid_;
  Realization realization_;
  SpectralAxes<Dim> axes_;
  std::array<double, Dim> scale_{};
  std::vector<double> mult_;
  std::array<std::vector<std::complex<double>>, Dim> deriv_;
  std::array<std::vector<std::complex<double>>, Dim> symbol_;
  std::vector<StencilEntry<Dim>> stencil_;

  void check(const Field<Dim>& u) const {
    if (u.grid != grid_) throw ShapeError("field grid does not match operator grid");
  }

  void build_derivatives() {
    for (int a = 0; a < Dim; ++a) {
      const auto& xi = axes_.xi[a];
      deriv_[a].resize(xi.size());
      const double h = grid_.spacing(a);
      for (std::size_t i = 0; i < xi.size(); ++i) {
        if (realization_ == Realization::spectral) {
          const bool nyq = std::abs(axes_.k[a][i]) == axes_.nyquist[a];
          deriv_[a][i] = nyq ? 0.0 : std::complex<double>(0.0, xi[i]);
        } else {
          deriv_[a][i] = (std::exp(std::complex<double>(0.0, xi[i] * h)) - 1.0) / h;
        }
      }
    }
  }

  void build_spectral_multiplier() {
    mult_.assign(grid_.spectral_size(), 1.0);
    double fmax2 = 0.0;
    for (int a = 0; a < Dim; ++a) {
      const double w = scale_[a] * std::numbers::pi * grid_.dims[a] / grid_.lengths[a];
      fmax2 += w * w;
    }
    if (fmax2 == 0.0) return;
    const double fmax = std::sqrt(fmax2) * (1.0 + 1e-9);
    const auto samples = std::size_t(std::max(257.0, std::ceil(fmax / 0.02) + 1.0));
    const FourierProfile table = fourier_profile(kernel_, fmax, samples);
    for_each_mode([&](std::size_t m, const std::array<int, Dim>& i) {
      double w2 = 0.0;
      for (int a = 0; a < Dim; ++a) {
        const double w = scale_[a] * axes_.xi[a][i[a]];
        w2 += w * w;
      }
      mult_[m] = table(std::sqrt(w2));
    });
  }

  void build_compact_multiplier() {
    std::array<double, Dim> h{};
    for (int a = 0; a < Dim; ++a) h[a] = grid_.spacing(a);
    stencil_ = compact_stencil<Dim>(kernel_, scale_, h);
    Field<Dim> w(grid_, 1);
    std::array<int, Dim> ext{};
    for (const auto& e : stencil_)
      for (int a = 0; a < Dim; ++a) ext[a] = std::max(ext[a], std::abs(e.offset[a]));
    for (int a = 0; a < Dim; ++a)
      if (2 * ext[a] + 1 > grid_.dims[a]) throw SizeError("interaction stencil wider than the torus");
    for (const auto& e : stencil_) w.data[grid_.ravel_wrapped(e.offset)] += e.weight;
    const auto s = forward_transform(w);
    const double inv = 1.0 / grid_.cell_volume();
    mult_.resize(s.data.size());
    for (std::size_t m = 0; m < s.data.size(); ++m) mult_[m] = s.data[m].real() * inv;
  }

 public:
  // multiplies every channel by a real per-mode factor
  Field<Dim> apply_mode_factor(const Field<Dim>& u, const std::vector<double>& factor) const {
    check(u);
    if (factor.size() != grid_.spectral_size()) throw ShapeError("mode factor has the wrong size");
    return apply_scalar(u, [&](std::size_t m) { return factor[m]; });
  }

 private:
  template <class Sym>
  Field<Dim> apply_scalar(const Field<Dim>& u, Sym&& sym) const {
    Field<Dim> out(grid_, u.components);
    const std::size_t nm = grid_.spectral_size();
    std::vector<std::complex<double>> s(nm);
    for (int c = 0; c < u.components; ++c) {
      detail::forward_channel(grid_, u.channel(c), s.data());
      for (std::size_t m = 0; m < nm; ++m) s[m] *= sym(m);
      detail::inverse_channel(grid_, s, out.channel(c));
    }
    return out;
  }

  template <class Sym>
  Field<Dim> apply_gradient(const Field<Dim>& u, Sym&& sym) const {
    Field<Dim> out(grid_, u.components * Dim);
    const std::size_t nm = grid_.spectral_size();
    std::vector<std::complex<double>> s(nm), t(nm);
    for (int c = 0; c < u.components; ++c) {
      detail::forward_channel(grid_, u.channel(c), s.data());
      for (int d = 0; d < Dim; ++d) {
        for_each_mode([&](std::size_t m, const std::array<int, Dim>& i) { t[m] = sym(d, m, i) * s[m]; });
        detail::inverse_channel(grid_, t, out.channel(c * Dim + d));
      }
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// field-level operations

template <int Dim>
Field<Dim> averaging(const NonlocalOperator<Dim>& op, const Field<Dim>& u) {
  return op.average(u);
}

template <int Dim>
Field<Dim> nonlocal_gradient(const NonlocalOperator<Dim>& op, const Field<Dim>& u) {
  return op.gradient(u);
}

// in-plane columns (directions 1, 2) of a 3-D Jacobian field
inline Field<3> bar_columns(const Field<3>& grad) {
  if (grad.components % 3 != 0) throw ShapeError("bar_columns expects a Jacobian field");
  const int comps = grad.components / 3;
  Field<3> out(grad.grid, comps * 2);
  for (int c = 0; c < comps; ++c)
    for (int d = 0; d < 2; ++d)
      std::copy(grad.channel(c * 3 + d), grad.channel(c * 3 + d) + grad.nodes(), out.channel(c * 2 + d));
  return out;
}

template <int Dim>
Field<Dim> nonlocal_divergence(const NonlocalOperator<Dim>& op, const Field<Dim>& v) {
  return op.divergence(v);
}

template <int Dim>
InverseResult<Dim> inverse_averaging(const NonlocalOperator<Dim>& op, const Field<Dim>& v, double floor = 1e-8) {
  return op.inverse_average(v, floor);
}

// D(chi u) - chi D(u)
template <int Dim>
Field<Dim> leibniz_remainder(const NonlocalOperator<Dim>& op, const Field<Dim>& u, const Field<Dim>& chi) {
  if (chi.components != 1) throw ShapeError("chi must be scalar");
  Field<Dim> prod = u;
  for (int c = 0; c < u.components; ++c)
    for (std::size_t i = 0; i < u.nodes(); ++i) prod(c, i) *= chi.data[i];
  Field<Dim> k = op.gradient(prod);
  const Field<Dim> du = op.gradient(u);
  for (int c = 0; c < k.components; ++c)
    for (std::size_t i = 0; i < u.nodes(); ++i) k(c, i) -= chi.data[i] * du(c, i);
  return k;
}

// ---------------------------------------------------------------------------
// real-space quadrature over the unit ball

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

struct BallRule {
  int radial = 8;   // Gauss nodes per radial panel
  int polar = 24;   // Gauss nodes in cos(theta)
  int azimuth = 48; // uniform nodes in phi
  bool check_refinement = false;

  BallRule refined() const { return {2 * radial, 2 * polar, 2 * azimuth, false}; }
};

namespace detail {

// Gauss-Legendre nodes on [-1, 1] by Newton iteration on P_n
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5)), dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = -z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

struct BallNodes {
  std::vector<Vec3> dirs;
  std::vector<double> dir_w;
  std::vector<double> radial_x, radial_w;
};

inline BallNodes ball_nodes(const BallRule& rule) {
  BallNodes b;
  const auto [mx, mw] = gauss_legendre(rule.polar);
  for (int i = 0; i < rule.polar; ++i) {
    const double st = std::sqrt(1.0 - mx[i] * mx[i]);
    for (int j = 0; j < rule.azimuth; ++j) {
      const double ph = 2.0 * std::numbers::pi * (j + 0.5) / rule.azimuth;
      b.dirs.push_back({st * std::cos(ph), st * std::sin(ph), mx[i]});
      b.dir_w.push_back(mw[i] * 2.0 * std::numbers::pi / rule.azimuth);
    }
  }
  std::tie(b.radial_x, b.radial_w) = gauss_legendre(rule.radial);
  return b;
}

// int_{B_1} f(z) dz for f ~ |z|^{-(2 + beta)} at the origin; f returns std::array<double, M>
template <std::size_t M, class F>
std::array<double, M> ball_integral(F&& f, double beta, const BallRule& rule) {
  const BallNodes nodes = ball_nodes(rule);
  std::vector<double> br = {1.0, 0.875, 0.75, 0.625, 0.5};
  while (br.back() > 0x1p-24) br.push_back(0.5 * br.back());
  const auto shell = [&](double r) {
    std::array<double, M> s{};
    for (std::size_t k = 0; k < nodes.dirs.size(); ++k) {
      const Vec3 z = {r * nodes.dirs[k][0], r * nodes.dirs[k][1], r * nodes.dirs[k][2]};
      const auto v = f(z);
      for (std::size_t m = 0; m < M; ++m) s[m] += nodes.dir_w[k] * v[m];
    }
    for (auto& v : s) v *= r * r;
    return s;
  };
  std::array<double, M> total{};
  for (std::size_t p = 0; p + 1 < br.size(); ++p) {
    const double lo = br[p + 1], hi = br[p];
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    for (std::size_t q = 0; q < nodes.radial_x.size(); ++q) {
      const auto s = shell(mid + half * nodes.radial_x[q]);
      for (std::size_t m = 0; m < M; ++m) total[m] += nodes.radial_w[q] * half * s[m];
    }
  }
  const double rmin = br.back();
  const auto tail = shell(rmin);
  for (std::size_t m = 0; m < M; ++m) total[m] += tail[m] * rmin / (1.0 - beta);
  return total;
}

inline std::array<double, 9> flatten(const Mat3& a) {
  std::array<double, 9> f{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) f[3 * i + j] = a[i][j];
  return f;
}

inline Mat3 unflatten(const std::array<double, 9>& f) {
  Mat3 a{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a[i][j] = f[3 * i + j];
  return a;
}

inline double max_abs_diff(const Mat3& a, const Mat3& b) {
  double m = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m = std::max(m, std::abs(a[i][j] - b[i][j]));
  return m;
}

}  // namespace detail

struct QuadratureMatrix {
  Mat3 value{};
  double refinement_change = 0.0;
  bool accurate = true;  // refinement changed the result by <= 1e-6
};

using VectorFunction = std::function<Vec3(const Vec3&)>;
using ScalarFunction = std::function<double(const Vec3&)>;
using JacobianFunction = std::function<Mat3(const Vec3&)>;

// int (u(x + T z) - u(x - T z)) / 2 (x) z / |z|^2 rho(z) dz T^{-1}
inline QuadratureMatrix direct_quadrature_gradient(const RadialKernel& k, const Horizon& h, const VectorFunction& u,
                                                   const Vec3& x, const BallRule& rule = {}) {
  if (k.dimension() != 3) throw DomainError("direct quadrature expects a 3-D kernel");
  if (!(h.inplane > 0.0) || !(h.outofplane > 0.0))
    throw DomainError("direct quadrature needs positive horizons; use the spectral path for degenerate ones");
  const auto T = h.scaling();
  const auto eval = [&](const BallRule& r) {
    const auto f = [&](const Vec3& z) {
      const Vec3 tz = {T[0] * z[0], T[1] * z[1], T[2] * z[2]};
      const Vec3 up = u({x[0] + tz[0], x[1] + tz[1], x[2] + tz[2]});
      const Vec3 um = u({x[0] - tz[0], x[1] - tz[1], x[2] - tz[2]});
      const double r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
      const double w = k.profile(std::sqrt(r2)) / r2;
      std::array<double, 9> v{};
      for (int c = 0; c < 3; ++c)
        for (int d = 0; d < 3; ++d) v[3 * c + d] = 0.5 * (up[c] - um[c]) * z[d] * w / T[d];
      return v;
    };
    return detail::unflatten(detail::ball_integral<9>(f, k.radial_singularity(), r));
  };
  QuadratureMatrix out;
  out.value = eval(rule);
  if (rule.check_refinement) {
    out.refinement_change = detail::max_abs_diff(out.value, eval(rule.refined()));
    out.accurate = out.refinement_change <= 1e-6;
  }
  return out;
}

struct LeibnizInputs {
  VectorFunction u;
  ScalarFunction chi;
  std::optional<JacobianFunction> grad_u;                 // row = component, column = direction
  std::optional<std::function<Vec3(const Vec3&)>> grad_chi;
};

// pointwise remainder K(x): integrated forms for positive horizons, the defining
// form with derivatives of u for a vanishing one
inline QuadratureMatrix leibniz_remainder_at(const RadialKernel& k, const Horizon& h, const LeibnizInputs& in,
                                             const Vec3& x, const BallRule& rule = {}) {
  if (k.dimension() != 3) throw DomainError("leibniz quadrature expects a 3-D kernel");
  const auto T = h.scaling();
  const bool bar_pos = h.inplane > 0.0, third_pos = h.outofplane > 0.0;
  if ((!bar_pos || !third_pos) && (!in.grad_u || !in.grad_chi))
    throw UnsupportedCaseError(
        "vanishing horizon component requires derivatives of u and chi for the corresponding columns");
  const double chi_x = in.chi(x);
  const auto eval = [&](const BallRule& r) {
    const auto f = [&](const Vec3& z) {
      const Vec3 y = {x[0] - T[0] * z[0], x[1] - T[1] * z[1], x[2] - T[2] * z[2]};
      const double rz = std::sqrt(z[0] * z[0] + z[1] * z[1] + z[2] * z[2]);
      const Vec3 uy = in.u(y);
      const double dchi = in.chi(y) - chi_x;
      std::array<double, 9> v{};
      Mat3 gu{};
      Vec3 gc{};
      if (!bar_pos || !third_pos) {
        gu = (*in.grad_u)(y);
        gc = (*in.grad_chi)(y);
      }
      const double rho_w = k.profile(rz) / (rz * rz);
      const double qz = k.q(rz);
      for (int d = 0; d < 3; ++d) {
        const bool integrated = d < 2 ? bar_pos : third_pos;
        for (int c = 0; c < 3; ++c) {
          if (integrated)
            v[3 * c + d] = -z[d] * rho_w * dchi * uy[c] / T[d];
          else
            v[3 * c + d] = qz * (dchi * gu[c][d] + uy[c] * gc[d]);
        }
      }
      return v;
    };
    return detail::unflatten(detail::ball_integral<9>(f, k.radial_singularity(), r));
  };
  QuadratureMatrix out;
  out.value = eval(rule);
  if (rule.check_refinement) {
    out.refinement_change = detail::max_abs_diff(out.value, eval(rule.refined()));
    out.accurate = out.refinement_change <= 1e-6;
  }
  return out;
}

// ---------------------------------------------------------------------------
// continuity in the horizon

struct HorizonErrorRow {
  Horizon horizon;
  double distance = 0.0;  // |delta_j - delta|
  double sup_error = 0.0;
  double ratio = 0.0;     // sup_error / distance
};

struct HorizonConvergenceTable {
  Horizon target;
  std::vector<HorizonErrorRow> rows;
  double fitted_rate = 0.0;  // slope of log error against log distance
  double max_ratio = 0.0;
};

template <int Dim>
HorizonConvergenceTable horizon_convergence_check(const RadialKernel& k, const Field<Dim>& u,
                                                  const std::vector<Horizon>& horizons, const Horizon& target,
                                                  Realization r = Realization::spectral) {
  HorizonConvergenceTable tab;
  tab.target = target;
  const Field<Dim> ref = NonlocalOperator<Dim>(k, target, u.grid, r).gradient(u);
  std::vector<double> lx, ly;
  for (const auto& h : horizons) {
    HorizonErrorRow row;
    row.horizon = h;
    row.distance = std::hypot(h.inplane - target.inplane, h.outofplane - target.outofplane);
    const Field<Dim> g = NonlocalOperator<Dim>(k, h, u.grid, r).gradient(u);
    row.sup_error = sup_norm(g - ref);
    row.ratio = row.distance > 0.0 ? row.sup_error / row.distance : 0.0;
    tab.max_ratio = std::max(tab.max_ratio, row.ratio);
    if (row.distance > 0.0 && row.sup_error > 0.0) {
      lx.push_back(std::log(row.distance));
      ly.push_back(std::log(row.sup_error));
    }
    tab.rows.push_back(row);
  }
  if (lx.size() >= 2) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i], my += ly[i];
    mx /= lx.size();
    my /= ly.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) sxy += (lx[i] - mx) * (ly[i] - my), sxx += (lx[i] - mx) * (lx[i] - mx);
    tab.fitted_rate = sxy / sxx;
  }
  return tab;
}

}  // namespace nlfilm
