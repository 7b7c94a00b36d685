#include <gtest/gtest.h>

#include <random>

#include "nlfilm/gamma.hpp"

using namespace nlfilm;

namespace {

const RadialKernel& kernel3() {
  static const RadialKernel k = make_truncated_fractional(0.5);
  return k;
}

SlabDomain small_slab() {
  return {CrossSection::rectangle(2.0, 2.0, {2.4, 2.4}), 4.0 / 3, 7.0 / 3, Horizon(1, 1),
          Grid<3>({24, 24, 12}, {4.8, 4.8, 4.0})};
}

TEST(Minimize, SolvesRosenbrock) {
  Objective obj;
  obj.size = 2;
  obj.evaluate = [](const std::vector<double>& x, std::vector<double>& g) {
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    g = {-2 * a - 400 * x[0] * b, 200 * b};
    return a * a + 100 * b * b;
  };
  MinimizeConfig cfg;
  cfg.gradient_tol = 1e-10;
  const auto r = minimize(obj, {-1.2, 1.0}, cfg);
  EXPECT_TRUE(r.converged) << r.stop_reason;
  EXPECT_NEAR(r.x[0], 1.0, 1e-8);
  EXPECT_NEAR(r.x[1], 1.0, 1e-8);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1]);
}

TEST(Minimize, RejectsBadConfigurationAndStart) {
  Objective obj;
  obj.size = 1;
  obj.evaluate = [](const std::vector<double>& x, std::vector<double>& g) {
    g = {1.0};
    return x[0] > 0 ? INFINITY : x[0];
  };
  MinimizeConfig bad;
  bad.backtrack = 1.5;
  EXPECT_THROW(minimize(obj, {0.0}, bad), ParameterError);
  EXPECT_THROW(minimize(obj, {1.0}, MinimizeConfig{}), OptimizationError);
  EXPECT_THROW(minimize(obj, {0.0, 1.0}, MinimizeConfig{}), ShapeError);
}

TEST(Packing, RoundTripOnSupport) {
  const Grid<2> g({8, 8}, {1.0, 1.0});
  Mask m(g.size(), 0);
  for (std::size_t i = 0; i < g.size(); i += 3) m[i] = 1;
  const Packing<2> p(g, m, 3);
  std::vector<double> x(p.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = double(i);
  EXPECT_EQ(p.pack(p.unpack(x)), x);
  EXPECT_TRUE(p.unpack(x).respects_support());
}

TEST(Trend, NonIncreasingWithSlack) {
  EXPECT_TRUE(non_increasing({3.0, 2.0, 1.0}, 0.0));
  EXPECT_FALSE(non_increasing({3.0, 2.0, 2.1}, 0.0));
  EXPECT_TRUE(non_increasing({3.0, 2.0, 2.1}, 0.1));
  EXPECT_FALSE(non_increasing({3.0, 3.5, 1.0}, 0.1));
  EXPECT_TRUE(non_increasing({0.0, 0.0, 0.0}, 0.0));
}

TEST(Recovery, ThirdColumnEqualsTheTargetOnOmega) {
  const SlabDomain d = small_slab();
  const double eps = 0.2;
  const Horizon h = rescaled_horizon(Regime::aniso, eps);
  const NonlocalOperator<3> op(kernel3(), h, d.grid, Realization::compact);
  const NonlocalOperator<2> op2(reduce_kernel(kernel3()), Horizon(h.inplane, 0.0), d.inplane_grid(),
                                Realization::compact);
  const DomainMasks m = reach_masks(d, op);
  const Grid<2> g2 = d.inplane_grid();
  Field<2> ubar(g2, 3), dfield(g2, 3);
  for (std::size_t j = 0; j < g2.size(); ++j) {
    const auto x = g2.node(j);
    ubar(0, j) = x[0], ubar(1, j) = x[1], ubar(2, j) = 0.1 * std::sin(x[0]);
    dfield(0, j) = 0.2 * std::cos(x[1]), dfield(2, j) = 1.0 + 0.1 * std::sin(x[0] + x[1]);
  }
  const Field<3> u = recovery_field(ubar, dfield, op2, d, m.fattened, eps);
  EXPECT_TRUE(u.respects_support());
  const Field<3> g = op.gradient(u);
  const Field<2> dg = op2.gradient(ubar);
  double third = 0.0, planar = 0.0;
  for (std::size_t i = 0; i < d.grid.size(); ++i) {
    if (!m.omega[i]) continue;
    const auto x = d.grid.unravel(i);
    const std::size_t j = g2.ravel({x[0], x[1]});
    for (int c = 0; c < 3; ++c) {
      third = std::max(third, std::abs(g(3 * c + 2, i) / eps - dfield(c, j)));
      for (int k = 0; k < 2; ++k) {
        // in-plane columns pick up eps (x3 - z0) D̄b, which vanishes with eps
        planar = std::max(planar, std::abs(g(3 * c + k, i) - dg(2 * c + k, j)));
      }
    }
  }
  EXPECT_LT(third, 1e-8);
  EXPECT_LT(planar, 2.0 * eps);
}

TEST(Sweep, ZeroForceGivesZeroGap) {
  SweepConfig cfg;
  cfg.eps_list = {0.4, 0.2};
  cfg.test_fields = 3;
  const SweepResult s = gamma_sweep(kernel3(), small_slab(), power_density(2.0), cfg);
  ASSERT_TRUE(s.complete) << s.failure;
  ASSERT_EQ(s.records.size(), 2u);
  for (const auto& r : s.records) {
    EXPECT_EQ(r.gap, 0.0);
    EXPECT_EQ(r.distance, 0.0);
    EXPECT_EQ(r.energy, 0.0);
  }
  EXPECT_TRUE(s.energy_trend);
  EXPECT_TRUE(s.distance_trend);
}

TEST(Sweep, RejectsNonConvexDensityAndBadLists) {
  SweepConfig cfg;
  EXPECT_THROW(gamma_sweep(kernel3(), small_slab(), double_well_density(), cfg), EnvelopeError);
  cfg.eps_list = {0.1, 0.2};
  EXPECT_THROW(gamma_sweep(kernel3(), small_slab(), power_density(2.0), cfg), ParameterError);
  cfg.eps_list = {0.2, 0.1};
  cfg.lambda = 0.0;
  EXPECT_THROW(gamma_sweep(kernel3(), small_slab(), power_density(2.0), cfg), ParameterError);
}

TEST(Sweep, MinimizersStayBelowTheirRecoveryFields) {
  const SlabDomain d = small_slab();
  SweepConfig cfg;
  cfg.eps_list = {0.4, 0.2};
  cfg.test_fields = 4;
  cfg.minimize.gradient_tol = 1e-6;
  const Field<3> v = smooth_potential(d, masks(d.with_horizon(Horizon(0, 0))).omega);
  const SweepResult s = gamma_sweep(kernel3(), d, anisotropic_density(1.0, {0, 0, 0.5}), cfg, v);
  ASSERT_TRUE(s.complete) << s.failure;
  EXPECT_TRUE(s.recovery_bound);
  for (const auto& r : s.records) {
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.energy, r.recovery_energy);
    EXPECT_EQ(r.pairings.size(), 4u);
  }
  const CompactnessReport c = compactness_diagnostic(s);
  EXPECT_TRUE(c.non_exploding);
  EXPECT_EQ(c.pairing_error.size(), 2u);
}

}  // namespace
