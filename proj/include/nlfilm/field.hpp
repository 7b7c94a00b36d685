#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <type_traits>
#include <vector>

#include <fftw3.h>

#include "error.hpp"

namespace nlfilm {

using Mask = std::vector<std::uint8_t>;

inline std::size_t mask_count(const Mask& m) {
  std::size_t c = 0;
  for (auto v : m) c += v != 0;
  return c;
}

template <int Dim>
struct Grid {
  static_assert(Dim == 2 || Dim == 3);
  std::array<int, Dim> dims{};
  std::array<double, Dim> lengths{};

  Grid() = default;
  Grid(std::array<int, Dim> n, std::array<double, Dim> l) : dims(n), lengths(l) {
    for (int a = 0; a < Dim; ++a) {
      if (dims[a] < 4 || dims[a] % 2 != 0) throw ShapeError("grid sample counts must be even and >= 4");
      if (!(lengths[a] > 0.0)) throw ShapeError("grid lengths must be positive");
    }
  }

  double spacing(int a) const { return lengths[a] / dims[a]; }
  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < Dim; ++a) v *= spacing(a);
    return v;
  }
  double volume() const {
    double v = 1.0;
    for (int a = 0; a < Dim; ++a) v *= lengths[a];
    return v;
  }
  std::size_t size() const {
    std::size_t s = 1;
    for (int a = 0; a < Dim; ++a) s *= std::size_t(dims[a]);
    return s;
  }
  // Hermitian-packed spectrum: last axis keeps N/2 + 1 modes
  std::array<int, Dim> spectral_dims() const {
    auto d = dims;
    d[Dim - 1] = dims[Dim - 1] / 2 + 1;
    return d;
  }
  std::size_t spectral_size() const {
    std::size_t s = 1;
    for (int v : spectral_dims()) s *= std::size_t(v);
    return s;
  }
  std::size_t ravel(const std::array<int, Dim>& i) const {
    std::size_t idx = 0;
    for (int a = 0; a < Dim; ++a) idx = idx * dims[a] + std::size_t(i[a]);
    return idx;
  }
  // index with periodic wrap
  std::size_t ravel_wrapped(std::array<int, Dim> i) const {
    for (int a = 0; a < Dim; ++a) i[a] = ((i[a] % dims[a]) + dims[a]) % dims[a];
    return ravel(i);
  }
  std::array<int, Dim> unravel(std::size_t idx) const {
    std::array<int, Dim> i{};
    for (int a = Dim - 1; a >= 0; --a) {
      i[a] = int(idx % std::size_t(dims[a]));
      idx /= std::size_t(dims[a]);
    }
    return i;
  }
  std::array<double, Dim> node(const std::array<int, Dim>& i) const {
    std::array<double, Dim> x{};
    for (int a = 0; a < Dim; ++a) x[a] = (i[a] + 0.5) * spacing(a);
    return x;
  }
  std::array<double, Dim> node(std::size_t idx) const { return node(unravel(idx)); }

  bool operator==(const Grid& o) const { return dims == o.dims && lengths == o.lengths; }
  bool operator!=(const Grid& o) const { return !(*this == o); }
};

// Channel-major samples: data[c * grid.size() + node]
template <int Dim>
struct Field {
  Grid<Dim> grid;
  int components = 1;
  std::vector<double> data;
  std::optional<Mask> support;

  Field() = default;
  Field(const Grid<Dim>& g, int comps) : grid(g), components(comps), data(g.size() * std::size_t(comps), 0.0) {
    if (comps < 1) throw ShapeError("field needs at least one channel");
  }

  std::size_t nodes() const { return grid.size(); }
  double* channel(int c) { return data.data() + std::size_t(c) * nodes(); }
  const double* channel(int c) const { return data.data() + std::size_t(c) * nodes(); }
  double& operator()(int c, std::size_t i) { return data[std::size_t(c) * nodes() + i]; }
  double operator()(int c, std::size_t i) const { return data[std::size_t(c) * nodes() + i]; }

  // zero everything off the mask and remember it
  Field& restrict_to(const Mask& m) {
    if (m.size() != nodes()) throw ShapeError("mask size does not match grid");
    for (int c = 0; c < components; ++c)
      for (std::size_t i = 0; i < nodes(); ++i)
        if (!m[i]) (*this)(c, i) = 0.0;
    support = m;
    return *this;
  }

  bool respects_support() const {
    if (!support) return true;
    for (int c = 0; c < components; ++c)
      for (std::size_t i = 0; i < nodes(); ++i)
        if (!(*support)[i] && (*this)(c, i) != 0.0) return false;
    return true;
  }

  bool finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  Field& operator+=(const Field& o) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= o.data[i];
    return *this;
  }
  Field& operator*=(double a) {
    for (double& v : data) v *= a;
    return *this;
  }
};

template <int Dim>
Field<Dim> operator-(Field<Dim> a, const Field<Dim>& b) {
  a -= b;
  return a;
}
template <int Dim>
Field<Dim> operator+(Field<Dim> a, const Field<Dim>& b) {
  a += b;
  return a;
}

template <int Dim>
struct Spectrum {
  Grid<Dim> grid;
  int components = 1;
  std::vector<std::complex<double>> data;

  std::size_t modes() const { return grid.spectral_size(); }
  std::complex<double>* channel(int c) { return data.data() + std::size_t(c) * modes(); }
  const std::complex<double>* channel(int c) const { return data.data() + std::size_t(c) * modes(); }
};

// signed wavenumbers and angular frequencies of the packed spectrum, per axis
template <int Dim>
struct SpectralAxes {
  std::array<std::vector<int>, Dim> k;
  std::array<std::vector<double>, Dim> xi;
  std::array<int, Dim> nyquist{};

  explicit SpectralAxes(const Grid<Dim>& g) {
    const auto sd = g.spectral_dims();
    for (int a = 0; a < Dim; ++a) {
      const int n = g.dims[a];
      nyquist[a] = n / 2;
      k[a].resize(sd[a]);
      xi[a].resize(sd[a]);
      for (int i = 0; i < sd[a]; ++i) {
        k[a][i] = (a == Dim - 1 || i <= n / 2) ? i : i - n;
        xi[a][i] = 2.0 * std::numbers::pi * k[a][i] / g.lengths[a];
      }
    }
  }
};

namespace detail {

struct FftPlanPair {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

inline const FftPlanPair& fft_plans(const std::vector<int>& dims) {
  static std::mutex mu;
  static std::map<std::vector<int>, FftPlanPair> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(dims);
  if (it != cache.end()) return it->second;
  std::size_t n = 1, m = 1;
  for (std::size_t a = 0; a < dims.size(); ++a) {
    n *= std::size_t(dims[a]);
    m *= a + 1 == dims.size() ? std::size_t(dims[a] / 2 + 1) : std::size_t(dims[a]);
  }
  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(m);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  FftPlanPair p;
  const int rank = int(dims.size());
  p.r2c = fftw_plan_dft_r2c(rank, dims.data(), in, out, flags);
  p.c2r = fftw_plan_dft_c2r(rank, dims.data(), out, in, flags);
  fftw_free(in);
  fftw_free(out);
  return cache.emplace(dims, p).first->second;
}

template <int Dim>
const FftPlanPair& fft_plans(const Grid<Dim>& g) {
  return fft_plans(std::vector<int>(g.dims.begin(), g.dims.end()));
}

// single-channel transforms with the same scaling as the field-level ones
template <int Dim>
void forward_channel(const Grid<Dim>& g, const double* in, std::complex<double>* out) {
  fftw_execute_dft_r2c(fft_plans(g).r2c, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
  const double scale = g.cell_volume();
  const std::size_t m = g.spectral_size();
  for (std::size_t i = 0; i < m; ++i) out[i] *= scale;
}

template <int Dim>
void inverse_channel(const Grid<Dim>& g, std::vector<std::complex<double>>& work, double* out) {
  fftw_execute_dft_c2r(fft_plans(g).c2r, reinterpret_cast<fftw_complex*>(work.data()), out);
  const double scale = 1.0 / g.volume();
  const std::size_t n = g.size();
  for (std::size_t i = 0; i < n; ++i) out[i] *= scale;
}

}  // namespace detail

// coefficient(xi) = h^Dim * sum_j u_j exp(-i xi . (j h))
template <int Dim>
Spectrum<Dim> forward_transform(const Field<Dim>& u) {
  Spectrum<Dim> s{u.grid, u.components, {}};
  s.data.resize(s.modes() * std::size_t(u.components));
  const auto& p = detail::fft_plans(u.grid);
  const double scale = u.grid.cell_volume();
  for (int c = 0; c < u.components; ++c) {
    fftw_execute_dft_r2c(p.r2c, const_cast<double*>(u.channel(c)),
                         reinterpret_cast<fftw_complex*>(s.channel(c)));
  }
  for (auto& v : s.data) v *= scale;
  return s;
}

template <int Dim>
Field<Dim> inverse_transform(const Spectrum<Dim>& s) {
  Field<Dim> u(s.grid, s.components);
  const auto& p = detail::fft_plans(s.grid);
  std::vector<std::complex<double>> work(s.modes());
  const double scale = 1.0 / s.grid.volume();
  for (int c = 0; c < s.components; ++c) {
    std::copy(s.channel(c), s.channel(c) + s.modes(), work.begin());
    fftw_execute_dft_c2r(p.c2r, reinterpret_cast<fftw_complex*>(work.data()), u.channel(c));
  }
  for (double& v : u.data) v *= scale;
  return u;
}

template <int Dim, class F>
Field<Dim> sample(const Grid<Dim>& g, F&& f) {
  using R = std::invoke_result_t<F&, const std::array<double, Dim>&>;
  if constexpr (std::is_arithmetic_v<R>) {
    Field<Dim> u(g, 1);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = f(g.node(i));
      if (!std::isfinite(v)) throw SamplingError("non-finite sample", i);
      u.data[i] = v;
    }
    return u;
  } else {
    constexpr int C = int(std::tuple_size_v<R>);
    Field<Dim> u(g, C);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const R v = f(g.node(i));
      for (int c = 0; c < C; ++c) {
        if (!std::isfinite(double(v[c]))) throw SamplingError("non-finite sample", i);
        u(c, i) = double(v[c]);
      }
    }
    return u;
  }
}

struct NormResult {
  double value = 0.0;
  bool empty_region = false;
  operator double() const { return value; }
};

// discrete L^p norm of the pointwise Euclidean magnitude
template <int Dim>
NormResult lp_norm(const Field<Dim>& u, double p, const Mask* region = nullptr) {
  if (!(p >= 1.0)) throw DomainError("lp_norm needs p >= 1");
  if (region && region->size() != u.nodes()) throw ShapeError("region mask does not match grid");
  NormResult r;
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < u.nodes(); ++i) {
    if (region && !(*region)[i]) continue;
    ++used;
    double m2 = 0.0;
    for (int c = 0; c < u.components; ++c) m2 += u(c, i) * u(c, i);
    sum += std::pow(m2, 0.5 * p);
  }
  if (used == 0) {
    r.empty_region = true;
    return r;
  }
  r.value = std::pow(sum * u.grid.cell_volume(), 1.0 / p);
  return r;
}

template <int Dim>
double sup_norm(const Field<Dim>& u, const Mask* region = nullptr) {
  double sup = 0.0;
  for (std::size_t i = 0; i < u.nodes(); ++i) {
    if (region && !(*region)[i]) continue;
    double m2 = 0.0;
    for (int c = 0; c < u.components; ++c) m2 += u(c, i) * u(c, i);
    sup = std::max(sup, std::sqrt(m2));
  }
  return sup;
}

// sum over nodes and channels of u v h^Dim
template <int Dim>
double inner(const Field<Dim>& u, const Field<Dim>& v, const Mask* region = nullptr) {
  if (u.grid != v.grid || u.components != v.components) throw ShapeError("inner product shape mismatch");
  double s = 0.0;
  for (int c = 0; c < u.components; ++c)
    for (std::size_t i = 0; i < u.nodes(); ++i)
      if (!region || (*region)[i]) s += u(c, i) * v(c, i);
  return s * u.grid.cell_volume();
}

}  // namespace nlfilm
