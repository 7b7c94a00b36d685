#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include "error.hpp"
#include "quadrature.hpp"

namespace nlfilm {

using RadialFunction = std::function<double(double)>;

struct Cutoff {
  std::string name;
  RadialFunction eval;

  // (1 - r^2)^4 on [0, 1]
  static Cutoff bump() {
    return {"bump", [](double r) {
              if (r < 0.0) r = -r;
              if (r >= 1.0) return 0.0;
              const double t = 1.0 - r * r;
              return (t * t) * (t * t);
            }};
  }

  // 1 on [0, 1/2], C-infinity transition to 0 at r = 1
  static Cutoff plateau() {
    return {"plateau", [](double r) {
              if (r < 0.0) r = -r;
              if (r <= 0.5) return 1.0;
              if (r >= 1.0) return 0.0;
              const double t = 2.0 * r - 1.0;
              const double a = std::exp(-1.0 / (1.0 - t));
              const double b = std::exp(-1.0 / t);
              return a / (a + b);
            }};
  }

  static Cutoff from_name(const std::string& name) {
    if (name == "bump") return bump();
    if (name == "plateau") return plateau();
    throw DomainError("unknown cutoff '" + name + "' (expected bump|plateau)");
  }
};

inline double unit_sphere_measure(int dim) {
  return dim == 3 ? 4.0 * std::numbers::pi : 2.0 * std::numbers::pi;
}

namespace detail {

using Spline = boost::math::interpolators::cardinal_cubic_b_spline<double>;

// Uniform table on [0, 1] with cubic B-spline interpolation.
struct UnitTable {
  std::vector<double> values;
  Spline spline;

  UnitTable() = default;
  UnitTable(std::vector<double> v, double left_slope)
      : values(std::move(v)),
        spline(values.data(), values.size(), 0.0, 1.0 / double(values.size() - 1), left_slope) {}

  double operator()(double r) const {
    if (r <= 0.0) return values.front();
    if (r >= 1.0) return values.back();
    return spline(r);
  }
  double step() const { return 1.0 / double(values.size() - 1); }
};

struct KernelData {
  int dim = 3;
  double alpha = 0.0;  // profile = smooth(r) * r^-alpha
  std::optional<double> order;
  std::string cutoff_name;
  RadialFunction cutoff;
  double normalization = 1.0;
  double eta0 = 0.5, sigma = 0.0, gamma = 0.0, nu = 1.0;
  UnitTable q_scaled;  // r^alpha * Q(r)
  double mass = 0.0;
  double q_l1 = 0.0;

  double beta() const { return alpha - dim + 1; }
  double smooth(double r) const { return r >= 1.0 ? 0.0 : normalization * cutoff(r); }
};

inline constexpr std::size_t kTableIntervals = 4096;

}  // namespace detail

struct KernelSpec {
  int dim = 3;
  double alpha = 2.5;
  std::optional<double> order;
  std::string cutoff_name;
  RadialFunction cutoff;
  std::optional<double> normalization;  // computed from the mass identity when absent
  double eta0 = 0.5;
  double sigma = 0.25, gamma = 0.75, nu = 1.0;
};

class RadialKernel {
 public:
  explicit RadialKernel(const KernelSpec& spec) : d_(build(spec)) {}

  int dimension() const { return d_->dim; }
  double singular_power() const { return d_->alpha; }
  std::optional<double> fractional_order() const { return d_->order; }
  const std::string& cutoff_name() const { return d_->cutoff_name; }
  double cutoff(double r) const { return r >= 1.0 ? 0.0 : d_->cutoff(r); }
  double normalization() const { return d_->normalization; }
  double eta0() const { return d_->eta0; }
  double sigma() const { return d_->sigma; }
  double gamma() const { return d_->gamma; }
  double nu() const { return d_->nu; }

  // g with profile(r) = g(r) r^-alpha
  double smooth_factor(double r) const { return d_->smooth(r); }
  double profile(double r) const {
    if (r >= 1.0) return 0.0;
    return d_->smooth(r) * std::pow(r, -d_->alpha);
  }
  double f_rho(double r) const { return std::pow(r, d_->dim - 2) * profile(r); }

  // Q^rad and r^alpha Q^rad
  double q(double r) const {
    if (r >= 1.0) return 0.0;
    return d_->q_scaled(r) * std::pow(r, -d_->alpha);
  }
  double scaled_q(double r) const { return r >= 1.0 ? 0.0 : d_->q_scaled(r); }
  const std::vector<double>& scaled_q_table() const { return d_->q_scaled.values; }

  // n * |S^{n-1}|/n * int rho r^{n-1}; the identity says this equals n
  double mass() const { return d_->mass; }
  double q_l1() const { return d_->q_l1; }
  // exponent of the r^-beta behaviour of rho(r) r^{n-1} at the origin
  double radial_singularity() const { return d_->beta(); }

 private:
  std::shared_ptr<const detail::KernelData> d_;

  static std::shared_ptr<const detail::KernelData> build(const KernelSpec& spec) {
    auto d = std::make_shared<detail::KernelData>();
    if (spec.dim != 2 && spec.dim != 3) throw DomainError("kernel dimension must be 2 or 3");
    d->dim = spec.dim;
    d->alpha = spec.alpha;
    d->order = spec.order;
    d->cutoff_name = spec.cutoff_name;
    d->cutoff = spec.cutoff;
    d->eta0 = spec.eta0;
    d->sigma = spec.sigma;
    d->gamma = spec.gamma;
    d->nu = spec.nu;
    const double beta = d->beta();
    if (beta >= 1.0)
      throw QuadratureError("non-integrable singularity: mass diverges under refinement", 0.0,
                            0x1p-40);
    const double sphere = unit_sphere_measure(d->dim);
    const auto raw = [&](double r) { return r >= 1.0 ? 0.0 : spec.cutoff(r) * std::pow(r, -beta); };
    if (spec.normalization) {
      d->normalization = *spec.normalization;
    } else {
      const double m = sphere * quad::radial_integral(raw, 0.0, 1.0, beta, 1.0 / 32);
      d->normalization = d->dim / m;
    }
    const auto radial_mass = [&](double r) { return d->smooth(r) * std::pow(r, -beta); };
    d->mass = sphere * quad::radial_integral(radial_mass, 0.0, 1.0, beta, 1.0 / 32);

    // cumulative Q from r = 1 inward on a uniform grid, stored as r^alpha Q
    const std::size_t n = detail::kTableIntervals;
    const double h = 1.0 / double(n);
    std::vector<double> qs(n + 1, 0.0);
    const double a = d->alpha;
    const auto integrand = [&](double t) { return d->smooth(t) * std::pow(t, -a - 1.0); };
    double acc = 0.0;
    for (std::size_t i = n; i-- > 1;) {
      acc += quad::panel<12>(integrand, double(i) * h, double(i + 1) * h);
      qs[i] = acc * std::pow(double(i) * h, a);
    }
    qs[0] = d->smooth(0.0) / a;
    d->q_scaled = detail::UnitTable(std::move(qs), 0.0);

    const auto q_radial = [&](double r) { return d->q_scaled(r) * std::pow(r, -beta); };
    d->q_l1 = sphere * quad::radial_integral(q_radial, 0.0, 1.0, beta, 1.0 / 32);
    return d;
  }
};

inline void validate_cutoff(const Cutoff& c) {
  const double c0 = c.eval(0.0);
  if (!(c0 > 0.0) || !std::isfinite(c0)) throw ValidationError("cutoff must be positive at 0", 0.0);
  double prev = c0;
  for (int i = 1; i <= 2000; ++i) {
    const double r = i / 2000.0;
    const double v = c.eval(r);
    if (!std::isfinite(v) || v < 0.0) throw ValidationError("cutoff must be finite and >= 0", r);
    if (v > prev + 1e-14 * c0) throw ValidationError("cutoff must be non-increasing", r);
    prev = v;
  }
  for (int i = 1; i <= 100; ++i) {
    const double r = 1.0 + i / 100.0;
    if (c.eval(r) != 0.0) throw ValidationError("cutoff must vanish outside [0, 1]", r);
  }
}

inline RadialKernel make_truncated_fractional(double s, const Cutoff& cutoff = Cutoff::bump(),
                                              int dim = 3, double eta0 = 0.5) {
  if (!(s > 0.0 && s < 1.0)) throw DomainError("fractional order s must lie in (0, 1)");
  if (!(eta0 > 0.0 && eta0 <= 1.0)) throw DomainError("eta0 must lie in (0, 1]");
  validate_cutoff(cutoff);
  if (!(cutoff.eval(eta0 * (1.0 - 1e-12)) > 0.0))
    throw ValidationError("cutoff must stay positive on (0, eta0)", eta0);
  KernelSpec spec;
  spec.dim = dim;
  spec.alpha = double(dim) - 1.0 + s;
  spec.order = s;
  spec.cutoff_name = cutoff.name;
  spec.cutoff = cutoff.eval;
  spec.eta0 = eta0;
  spec.sigma = 0.5 * s;
  spec.gamma = 0.5 * (1.0 + s);
  spec.nu = 1.0;
  return RadialKernel(spec);
}

// ---------------------------------------------------------------------------
// hypothesis checks

struct HypothesisCheck {
  std::string name;
  bool pass = false;
  double value = 0.0;
  std::string detail;
};

struct HypothesisReport {
  int dimension = 3;
  double mass = 0.0;
  double q_l1 = 0.0;
  double positivity_floor = 0.0;
  std::array<double, 3> derivative_constants{};  // C_1..C_3 of (H2)
  double h3_constant = 1.0;
  double h4_constant = 1.0;
  std::vector<HypothesisCheck> checks;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

inline std::vector<double> geometric_samples(double lo, double hi, int count) {
  std::vector<double> r(count);
  const double q = std::log(hi / lo) / double(count - 1);
  for (int i = 0; i < count; ++i) r[i] = lo * std::exp(q * i);
  r.back() = hi;
  return r;
}

inline HypothesisReport check_hypotheses(const RadialKernel& k, double almost_monotone_bound = 1e3,
                                         int samples = 200) {
  HypothesisReport rep;
  const int n = k.dimension();
  rep.dimension = n;
  rep.mass = k.mass();
  rep.q_l1 = k.q_l1();
  const double eta = k.eta0();

  rep.checks.push_back({"H0.mass", std::abs(rep.mass - n) <= 1e-6, rep.mass,
                        "radial mass integral, target " + std::to_string(n)});
  rep.checks.push_back({"H0.q_l1", std::abs(rep.q_l1 - 1.0) <= 1e-6, rep.q_l1, "L1 norm of Q, target 1"});

  double outside = 0.0;
  for (int i = 1; i <= 50; ++i) outside = std::max(outside, std::abs(k.profile(1.0 + i / 50.0)));
  rep.checks.push_back({"H0.support", outside == 0.0, outside, "max |rho| on (1, 2]"});

  const auto inner = geometric_samples(1e-6 * eta, eta * (1.0 - 1e-9), samples);
  double floor = INFINITY;
  for (double r : inner) floor = std::min(floor, k.profile(r));
  rep.positivity_floor = floor;
  rep.checks.push_back({"H0.lower_bound", floor > 0.0, floor, "inf of rho on (0, eta0)"});

  // (H1) r^nu f_rho non-increasing
  const auto full = geometric_samples(1e-6, 1.0, samples);
  double worst = 0.0;
  double prev = std::pow(full[0], k.nu()) * k.f_rho(full[0]);
  for (std::size_t i = 1; i < full.size(); ++i) {
    const double v = std::pow(full[i], k.nu()) * k.f_rho(full[i]);
    if (prev > 0.0) worst = std::max(worst, (v - prev) / prev);
    prev = v;
  }
  rep.checks.push_back({"H1.monotone", worst <= 1e-12, worst, "max relative increase of r^nu f_rho"});

  // (H2) scale-invariant derivative bounds for k <= 3
  std::array<double, 3> cmax{};
  for (double r : inner) {
    const double h = 1e-3 * r;
    const double f0 = k.f_rho(r), fp = k.f_rho(r + h), fm = k.f_rho(r - h);
    const double fp2 = k.f_rho(r + 2 * h), fm2 = k.f_rho(r - 2 * h);
    const double d1 = (fp - fm) / (2 * h);
    const double d2 = (fp - 2 * f0 + fm) / (h * h);
    const double d3 = (fp2 - 2 * fp + 2 * fm - fm2) / (2 * h * h * h);
    cmax[0] = std::max(cmax[0], std::abs(d1) * r / f0);
    cmax[1] = std::max(cmax[1], std::abs(d2) * r * r / f0);
    cmax[2] = std::max(cmax[2], std::abs(d3) * r * r * r / f0);
  }
  rep.derivative_constants = cmax;
  for (int j = 0; j < 3; ++j)
    rep.checks.push_back({"H2.C" + std::to_string(j + 1),
                          std::isfinite(cmax[j]) && cmax[j] <= almost_monotone_bound, cmax[j],
                          "sup r^k |f^(k)| / f on (0, eta0)"});

  // (H3) almost non-increasing, (H4) almost non-decreasing
  double c3 = 1.0, c4 = 1.0, run_min = INFINITY, run_max = 0.0;
  for (double r : inner) {
    const double a = std::pow(r, n + k.sigma() - 1) * k.profile(r);
    const double b = std::pow(r, n + k.gamma() - 1) * k.profile(r);
    if (run_min < INFINITY) c3 = std::max(c3, a / run_min);
    if (run_max > 0.0) c4 = std::max(c4, run_max / b);
    run_min = std::min(run_min, a);
    run_max = std::max(run_max, b);
  }
  rep.h3_constant = c3;
  rep.h4_constant = c4;
  rep.checks.push_back({"H3.almost_nonincreasing", c3 <= almost_monotone_bound, c3,
                        "r^(n+sigma-1) rho on (0, eta0)"});
  rep.checks.push_back({"H4.almost_nondecreasing", c4 <= almost_monotone_bound, c4,
                        "r^(n+gamma-1) rho on (0, eta0)"});
  rep.checks.push_back({"exponents", k.sigma() > 0 && k.sigma() <= k.gamma() && k.gamma() < 1 && k.nu() > 0,
                        k.gamma() - k.sigma(), "0 < sigma <= gamma < 1, nu > 0"});
  return rep;
}

// ---------------------------------------------------------------------------
// averaged kernel and Fourier profile

class FourierProfile {
 public:
  FourierProfile() = default;
  FourierProfile(double freq_max, std::vector<double> values, double refinement_error)
      : freq_max_(freq_max),
        step_(freq_max / double(values.size() - 1)),
        values_(std::move(values)),
        spline_(values_.data(), values_.size(), 0.0, step_, 0.0),
        refinement_error_(refinement_error) {}

  double operator()(double w) const {
    w = std::abs(w);
    if (w > freq_max_ * (1.0 + 1e-12))
      throw DomainError("frequency " + std::to_string(w) + " beyond tabulated range " +
                        std::to_string(freq_max_));
    if (w >= freq_max_) return values_.back();
    return spline_(w);
  }
  double freq_max() const { return freq_max_; }
  double step() const { return step_; }
  const std::vector<double>& values() const { return values_; }
  double refinement_error() const { return refinement_error_; }

 private:
  double freq_max_ = 0.0, step_ = 0.0;
  std::vector<double> values_;
  detail::Spline spline_;
  double refinement_error_ = 0.0;
};

namespace detail {

inline double sinc(double x) { return std::abs(x) < 1e-4 ? 1.0 - x * x / 6.0 * (1.0 - x * x / 20.0) : std::sin(x) / x; }

inline double fourier_value(const RadialKernel& k, double w, double width_scale) {
  const double beta = k.radial_singularity();
  const double width = width_scale * std::min(1.0 / 16, w > 0 ? 4.0 / w : 1.0);
  if (k.dimension() == 3) {
    const auto f = [&](double r) { return k.scaled_q(r) * std::pow(r, -beta) * sinc(w * r); };
    return 4.0 * std::numbers::pi * quad::radial_integral(f, 0.0, 1.0, beta, width);
  }
  const auto f = [&](double r) { return k.scaled_q(r) * std::pow(r, -beta) * ::j0(w * r); };
  return 2.0 * std::numbers::pi * quad::radial_integral(f, 0.0, 1.0, beta, width);
}

}  // namespace detail

// Radial transform of Q on a uniform frequency grid, e^{-i xi.x} convention
inline FourierProfile fourier_profile(const RadialKernel& k, double freq_max, std::size_t samples) {
  if (!(freq_max > 0.0) || samples < 2) throw DomainError("fourier_profile needs freq_max > 0 and samples >= 2");
  std::vector<double> v(samples);
  const double dw = freq_max / double(samples - 1);
  for (std::size_t i = 0; i < samples; ++i) v[i] = detail::fourier_value(k, dw * double(i), 1.0);
  double refine = 0.0;
  const std::size_t stride = std::max<std::size_t>(1, samples / 32);
  for (std::size_t i = 0; i < samples; i += stride)
    refine = std::max(refine, std::abs(detail::fourier_value(k, dw * double(i), 0.5) - v[i]));
  return FourierProfile(freq_max, std::move(v), refine);
}

struct AveragedProfile {
  RadialKernel source;
  double l1_mass = 0.0;
  FourierProfile fourier;

  double q(double r) const { return source.q(r); }
  double operator()(double r) const { return source.q(r); }
};

inline AveragedProfile q_profile(const RadialKernel& k, double freq_max = 64.0, std::size_t samples = 2049) {
  return AveragedProfile{k, k.q_l1(), fourier_profile(k, freq_max, samples)};
}

// ---------------------------------------------------------------------------
// dimensional reduction

inline RadialKernel reduce_kernel(const RadialKernel& k) {
  if (k.dimension() != 3) throw DomainError("reduce_kernel expects a 3-D kernel");
  const double a = k.singular_power();
  const double c = k.normalization();
  // cutoff of the reduced kernel, 2 int_0^{acosh(1/r)} chi(r cosh v) cosh^{-a-1} v dv
  const std::size_t n = detail::kTableIntervals;
  std::vector<double> vals(n + 1, 0.0);
  vals[0] = k.cutoff(0.0) * std::sqrt(std::numbers::pi) * std::tgamma(0.5 * (a + 1.0)) / std::tgamma(0.5 * a + 1.0);
  for (std::size_t i = 1; i < n; ++i) {
    const double r = double(i) / double(n);
    const double top = std::acosh(1.0 / r);
    const auto f = [&](double v) { return k.cutoff(r * std::cosh(v)) * std::pow(std::cosh(v), -a - 1.0); };
    const int panels = std::max(1, int(std::ceil(top * 8.0)));
    double sum = 0.0;
    for (int p = 0; p < panels; ++p) sum += quad::panel<20>(f, top * p / panels, top * (p + 1) / panels);
    vals[i] = 2.0 * sum;
  }
  auto table = std::make_shared<detail::UnitTable>(std::move(vals), 0.0);

  KernelSpec spec;
  spec.dim = 2;
  spec.alpha = a - 1.0;
  spec.order = k.fractional_order();
  spec.cutoff_name = "reduced-" + k.cutoff_name();
  spec.cutoff = [table](double r) { return r >= 1.0 ? 0.0 : (*table)(r); };
  spec.normalization = c;
  spec.eta0 = k.eta0();
  spec.sigma = k.sigma();
  spec.gamma = k.gamma();
  spec.nu = k.nu();
  return RadialKernel(spec);
}

struct ReductionRecord {
  double radius = 0.0;
  double fiber_integral = 0.0;  // int_R Q(zbar, z3) dz3
  double reduced_q = 0.0;       // Q of the reduced kernel
  double discrepancy = 0.0;
};

inline std::vector<ReductionRecord> reduced_q_identity_check(const RadialKernel& k, const RadialKernel& reduced,
                                                             const std::vector<double>& radii) {
  std::vector<ReductionRecord> out;
  for (double r : radii) {
    ReductionRecord rec;
    rec.radius = r;
    const double top = r < 1.0 ? std::sqrt(1.0 - r * r) : 0.0;
    double sum = 0.0, lo = 0.0, width = std::max(r, 1e-6);
    while (lo < top) {
      const double hi = std::min(top, lo + std::min(width, 1.0 / 16));
      sum += quad::panel<20>([&](double z) { return k.q(std::sqrt(r * r + z * z)); }, lo, hi);
      lo = hi;
      width *= 2.0;
    }
    rec.fiber_integral = 2.0 * sum;
    rec.reduced_q = reduced.q(r);
    rec.discrepancy = std::abs(rec.fiber_integral - rec.reduced_q);
    out.push_back(rec);
  }
  return out;
}

inline std::vector<ReductionRecord> reduced_q_identity_check(const RadialKernel& k, const std::vector<double>& radii) {
  return reduced_q_identity_check(k, reduce_kernel(k), radii);
}

}  // namespace nlfilm
