#pragma once

#include <array>
#include <cmath>
#include <algorithm>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace nlfilm::quad {

// Full Gauss-Legendre rule on [-1, 1].
template <unsigned N>
struct GaussRule {
  std::array<double, N> x{};
  std::array<double, N> w{};
};

template <unsigned N>
const GaussRule<N>& gauss_rule() {
  static const GaussRule<N> rule = [] {
    using G = boost::math::quadrature::gauss<double, N>;
    const auto& a = G::abscissa();
    const auto& wt = G::weights();
    GaussRule<N> r;
    unsigned k = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == 0.0) {
        r.x[k] = 0.0;
        r.w[k++] = wt[i];
      } else {
        r.x[k] = -a[i];
        r.w[k++] = wt[i];
        r.x[k] = a[i];
        r.w[k++] = wt[i];
      }
    }
    std::array<unsigned, N> order{};
    for (unsigned i = 0; i < N; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](unsigned p, unsigned q) { return r.x[p] < r.x[q]; });
    GaussRule<N> sorted;
    for (unsigned i = 0; i < N; ++i) {
      sorted.x[i] = r.x[order[i]];
      sorted.w[i] = r.w[order[i]];
    }
    return sorted;
  }();
  return rule;
}

template <unsigned N = 20, class F>
double panel(F&& f, double a, double b) {
  const auto& g = gauss_rule<N>();
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double s = 0.0;
  for (unsigned i = 0; i < N; ++i) s += g.w[i] * f(mid + half * g.x[i]);
  return s * half;
}

// Integral of f over [a, b] where f may blow up like C r^{-beta} (beta < 1) at r = 0.
// Panels halve toward the origin; when a == 0 the last sliver is integrated in
// closed form from the leading power.
template <unsigned N = 20, class F>
double radial_integral(F&& f, double a, double b, double beta, double max_width = 1.0 / 16) {
  if (b <= a) return 0.0;
  const double floor = a > 0.0 ? a : b * 0x1p-40;
  double sum = 0.0, hi = b;
  while (hi > floor) {
    const double lo = std::max({floor, 0.5 * hi, hi - max_width});
    sum += panel<N>(f, lo, hi);
    hi = lo;
  }
  if (a <= 0.0) sum += f(floor) * floor / (1.0 - beta);
  return sum;
}

template <class F>
double adaptive(F&& f, double a, double b, double tol = 1e-13, double* err = nullptr) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  double e = 0.0;
  const double v = GK::integrate(f, a, b, 20, tol, &e);
  if (err) *err = e;
  return v;
}

}  // namespace nlfilm::quad
