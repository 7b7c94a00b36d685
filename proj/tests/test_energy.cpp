#include <gtest/gtest.h>

#include <random>

#include "nlfilm/energy.hpp"

using namespace nlfilm;

namespace {

const RadialKernel& kernel3() {
  static const RadialKernel k = make_truncated_fractional(0.5);
  return k;
}

Mat3 random_matrix(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Mat3 f{};
  for (auto& r : f)
    for (double& v : r) v = n(rng);
  return f;
}

double fro(const Mat3& f) { return std::sqrt(frobenius2(f)); }

SlabDomain small_slab() {
  return {CrossSection::rectangle(2.0, 2.0, {2.4, 2.4}), 4.0 / 3, 7.0 / 3, Horizon(1, 1),
          Grid<3>({24, 24, 12}, {4.8, 4.8, 4.0})};
}

TEST(Density, GrowthBoundsHold) {
  std::mt19937_64 rng(1);
  for (const EnergyDensity& w : {power_density(2.0), power_density(3.0), anisotropic_density(1.0, {0, 0, 0.5}),
                                 anisotropic_density(2.5, {1.0, -1.0, 0.3}), double_well_density()}) {
    for (int s = 0; s < 2000; ++s) {
      const Mat3 f = random_matrix(rng, s % 3 == 0 ? 0.1 : (s % 3 == 1 ? 1.0 : 10.0));
      const double np = std::pow(fro(f), w.growth.p), v = w(f);
      EXPECT_GE(v, w.growth.lower * np - w.growth.upper) << w.family;
      EXPECT_LE(v, w.growth.upper * (np + 1.0)) << w.family;
    }
  }
}

TEST(Density, DerivativeMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  for (const EnergyDensity& w : {power_density(3.0), anisotropic_density(1.0, {0, 0, 0.5}), double_well_density()}) {
    const Mat3 f = random_matrix(rng, 1.0);
    const Mat3 d = w.derivative(f);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        Mat3 fp = f, fm = f;
        fp[i][j] += 1e-6;
        fm[i][j] -= 1e-6;
        EXPECT_NEAR(d[i][j], (w(fp) - w(fm)) / 2e-6, 1e-5 * std::max(1.0, std::abs(d[i][j]))) << w.family;
      }
  }
}

// coarse lattice search followed by shrinking the lattice around the best point
double grid_search_third_column(const EnergyDensity& w, const Mat32& bar) {
  Vec3 best{};
  double best_v = INFINITY, width = 4.0;
  for (int level = 0; level < 14; ++level) {
    const Vec3 center = best;
    for (int i = -6; i <= 6; ++i)
      for (int j = -6; j <= 6; ++j)
        for (int k = -6; k <= 6; ++k) {
          const Vec3 a{center[0] + width * i / 6, center[1] + width * j / 6, center[2] + width * k / 6};
          const double v = w(join_columns(bar, a));
          if (v < best_v) best_v = v, best = a;
        }
    width *= 0.35;
  }
  return best_v;
}

TEST(ReducedDensity, ClosedFormAgreesWithMinimizationAndGridSearch) {
  std::mt19937_64 rng(3);
  const EnergyDensity w = anisotropic_density(1.0, {0.2, -0.1, 0.5});
  const ReducedDensity closed(w), numeric(w, false);
  for (int s = 0; s < 5; ++s) {
    const Mat32 bar = bar_part(random_matrix(rng, 1.0));
    const ReducedValue a = closed(bar), b = numeric(bar);
    EXPECT_NEAR(a.value, b.value, 1e-10);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(a.minimizer[i], b.minimizer[i], 1e-6);
    EXPECT_NEAR(a.value, grid_search_third_column(w, bar), 1e-8);
  }
  const Mat32 bar = bar_part(random_matrix(rng, 1.0));
  EXPECT_NEAR(power_density(2.0).reduced_closed_form(bar).value, reduced_density(power_density(2.0), bar).value, 1e-10);
}

TEST(ReducedDensity, NonConvexDensityUsesMultistart) {
  std::mt19937_64 rng(4);
  const EnergyDensity w = double_well_density();
  const ReducedDensity rd(w);
  EXPECT_EQ(rd.envelope(), ReducedDensity::Envelope::raw);
  for (int s = 0; s < 3; ++s) {
    const Mat32 bar = bar_part(random_matrix(rng, 0.3));
    EXPECT_NEAR(rd(bar).value, grid_search_third_column(w, bar), 1e-7);
  }
}

TEST(ReducedDensity, DerivativeIsTheEnvelopeGradient) {
  std::mt19937_64 rng(5);
  const ReducedDensity rd(anisotropic_density(1.5, {0.0, 0.3, 0.5}));
  const Mat32 bar = bar_part(random_matrix(rng, 1.0));
  const Mat32 d = rd.derivative(bar, rd(bar).minimizer);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) {
      Mat32 bp = bar, bm = bar;
      bp[i][j] += 1e-6;
      bm[i][j] -= 1e-6;
      EXPECT_NEAR(d[i][j], (rd(bp).value - rd(bm).value) / 2e-6, 1e-5);
    }
}

TEST(Stabilizer, LinearColumnsMatchClosedForm) {
  const Grid<3> g({4, 4, 8}, {1.0, 1.0, 2.0});
  const double slope = 0.7, eps = 0.25;
  Field<3> u(g, 1);
  for (std::size_t i = 0; i < g.size(); ++i) u.data[i] = slope * g.node(i)[2] + 3.0;
  Mask all(g.size(), 1);
  const StabilizerTerms t = stabilizer(all, eps, 2.0, u);
  const int n = 8;
  const double h3 = g.spacing(2);
  // Σ over ordered pairs of slope² |Δz| / eps = slope² h3 n (n² - 1) / 3 / eps per column
  const double per_column = slope * slope * h3 * n * (n * n - 1) / 3.0 / eps;
  EXPECT_NEAR(t.nonlocal, 16 * per_column * g.cell_volume() * h3, 1e-10);
  double lp = 0.0;
  for (double v : u.data) lp += v * v * g.cell_volume();
  EXPECT_NEAR(t.lp, lp, 1e-10);
  // x3-independent fields carry no nonlocal penalty
  Field<3> flat(g, 1);
  for (std::size_t i = 0; i < g.size(); ++i) flat.data[i] = g.node(i)[0];
  EXPECT_EQ(stabilizer(all, eps, 2.0, flat).nonlocal, 0.0);
}

class GradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradientCheck, StabilizedEnergyGradientMatchesFiniteDifferences) {
  const SlabDomain d = small_slab();
  const double eps = 0.25;
  const EnergyDensity w = GetParam() == 0 ? anisotropic_density(1.0, {0, 0, 0.5}) : power_density(3.0);
  const NonlocalOperator<3> op = thin_film_operator(kernel3(), Horizon(1.0, eps), eps, d.grid);
  const DomainMasks m = reach_masks(d, op);
  const Field<3> v = smooth_potential(d, m.omega);
  const Field<3> f = force_from_potential(op, v, m.omega);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 0.3);
  Field<3> u(d.grid, 3);
  for (double& x : u.data) x = n(rng);
  u.restrict_to(m.fattened);
  Field<3> grad;
  stabilized_energy(w, op, m, eps, 1.0, u, &f, &grad);
  std::vector<std::size_t> probes;
  for (std::size_t i = 0; i < u.nodes(); i += 97)
    if (m.fattened[i]) probes.push_back(i);
  ASSERT_GT(probes.size(), 5u);
  for (std::size_t i : probes)
    for (int c = 0; c < 3; ++c) {
      const double hstep = 1e-5;
      Field<3> up = u, um = u;
      up(c, i) += hstep;
      um(c, i) -= hstep;
      const double fd = (stabilized_energy(w, op, m, eps, 1.0, up, &f).total() -
                         stabilized_energy(w, op, m, eps, 1.0, um, &f).total()) /
                        (2 * hstep);
      const double l2 = grad(c, i) * d.grid.cell_volume();  // L2 gradient times the node weight
      EXPECT_NEAR(l2, fd, 1e-5 * std::max(1.0, std::abs(fd))) << "node " << i << " channel " << c;
    }
}

INSTANTIATE_TEST_SUITE_P(Densities, GradientCheck, ::testing::Values(0, 1));

TEST(LimitEnergy, GradientMatchesFiniteDifferences) {
  const SlabDomain d = small_slab();
  const RadialKernel kbar = reduce_kernel(kernel3());
  const Grid<2> g2 = d.inplane_grid();
  const NonlocalOperator<2> op2(kbar, Horizon(1.0, 0.0), g2, Realization::compact);
  const NonlocalOperator<3> op0(kernel3(), Horizon(1.0, 1.0), d.grid, Realization::compact);
  const LimitGeometry lg = limit_geometry(d, reach_masks(d, op0));
  const ReducedDensity wbar(anisotropic_density(1.0, {0, 0, 0.5}));
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 0.3);
  Field<2> u(g2, 3), f(g2, 3);
  for (double& x : u.data) x = n(rng);
  for (double& x : f.data) x = n(rng);
  u.restrict_to(lg.support);
  f.restrict_to(lg.support);
  Field<2> grad;
  limit_energy(wbar, op2, lg, 1.0, u, &f, &grad);
  for (std::size_t i = 0; i < u.nodes(); i += 13) {
    if (!lg.support[i]) continue;
    for (int c = 0; c < 3; ++c) {
      Field<2> up = u, um = u;
      up(c, i) += 1e-5;
      um(c, i) -= 1e-5;
      const double fd =
          (limit_energy(wbar, op2, lg, 1.0, up, &f).value() - limit_energy(wbar, op2, lg, 1.0, um, &f).value()) / 2e-5;
      EXPECT_NEAR(grad(c, i) * g2.cell_volume(), fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(LimitEnergy, NonConvexDensityNeedsExplicitUpperBound) {
  const SlabDomain d = small_slab();
  const Grid<2> g2 = d.inplane_grid();
  const NonlocalOperator<2> op2(reduce_kernel(kernel3()), Horizon(1.0, 0.0), g2, Realization::compact);
  const NonlocalOperator<3> op0(kernel3(), Horizon(1.0, 1.0), d.grid, Realization::compact);
  const LimitGeometry lg = limit_geometry(d, reach_masks(d, op0));
  const ReducedDensity wbar(double_well_density());
  const Field<2> zero(g2, 3);
  EXPECT_THROW(limit_energy(wbar, op2, lg, 1.0, zero), EnvelopeError);
  const LimitEnergy e = limit_energy(wbar, op2, lg, 1.0, zero, nullptr, nullptr, true);
  EXPECT_TRUE(e.upper_bound);
  // min over the third column of (|a|² - 1)² vanishes on the unit sphere
  EXPECT_NEAR(e.terms.bulk, 0.0, 1e-9);
}

TEST(ThinEnergy, GuardsAndSupport) {
  const SlabDomain d = small_slab();
  EXPECT_THROW(thin_film_operator(kernel3(), Horizon(1.0, 0.2), 0.1, d.grid), RegimeError);
  const double eps = 0.25;
  const NonlocalOperator<3> op = thin_film_operator(kernel3(), Horizon(1.0, eps), eps, d.grid);
  const DomainMasks m = reach_masks(d, op);
  Field<3> u(d.grid, 3);
  const EnergyDensity w = power_density(2.0);
  EXPECT_EQ(thin_energy(w, op, m, eps, u), 0.0);
  u(0, 0) = 1.0;  // node far outside the reach
  ASSERT_FALSE(m.fattened[0]);
  EXPECT_TRUE(std::isinf(thin_energy(w, op, m, eps, u)));
  EXPECT_THROW(stabilized_energy(w, op, m, eps, 0.0, Field<3>(d.grid, 3)), ParameterError);
}

TEST(ThinEnergy, IndependentFieldsSeeOnlyInPlaneColumns) {
  const SlabDomain d = small_slab();
  const double eps = 0.25;
  const NonlocalOperator<3> op = thin_film_operator(kernel3(), Horizon(1.0, eps), eps, d.grid);
  const DomainMasks m = reach_masks(d, op);
  const Grid<2> g2 = d.inplane_grid();
  const NonlocalOperator<2> op2(reduce_kernel(kernel3()), Horizon(1.0, 0.0), g2, Realization::compact);
  Field<2> ub(g2, 3);
  for (std::size_t j = 0; j < g2.size(); ++j) {
    const auto x = g2.node(j);
    ub(0, j) = std::sin(x[0]), ub(1, j) = x[1] * 0.1, ub(2, j) = std::cos(x[0] + x[1]);
  }
  const Field<3> u = lift(ub, d.grid, &m.fattened);
  const double e3 = thin_energy(power_density(2.0), op, m, eps, u);
  // oracle: Σ_Ω |D̄ ū|² h³ using the planar operator applied to the unmasked field
  const Field<2> dg = op2.gradient(ub);
  double e2 = 0.0;
  for (std::size_t i = 0; i < d.grid.size(); ++i)
    if (m.omega[i]) {
      const auto x = d.grid.unravel(i);
      const std::size_t j = g2.ravel({x[0], x[1]});
      for (int c = 0; c < 6; ++c) e2 += dg(c, j) * dg(c, j) * d.grid.cell_volume();
    }
  EXPECT_NEAR(e3, e2, 1e-10 * e2);
}

TEST(Force, PairingIsMinusPotentialAgainstGradient) {
  const SlabDomain d = small_slab();
  const NonlocalOperator<3> op(kernel3(), Horizon(1.0, 1.0), d.grid, Realization::compact);
  const DomainMasks m = reach_masks(d, op);
  const Field<3> v = smooth_potential(d, m.omega, 2.0);
  const Field<3> f = force_from_potential(op, v, m.omega);
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n;
  Field<3> h(d.grid, 1);
  for (double& x : h.data) x = n(rng);
  const Field<3> dh = op.gradient(h);
  for (int c = 0; c < 3; ++c) {
    double rhs = 0.0;
    for (std::size_t i = 0; i < d.grid.size(); ++i)
      for (int k = 0; k < 3; ++k) rhs -= v(3 * c + k, i) * dh(k, i) * d.grid.cell_volume();
    EXPECT_NEAR(force_pairing(f, h, c), rhs, 1e-10 * std::max(1.0, std::abs(rhs)));
  }
  Field<3> bad = v;
  bad(0, 0) = 1.0;
  EXPECT_THROW(force_from_potential(op, bad, m.omega), SupportError);
  for (std::size_t i = 0; i < d.grid.size(); ++i) EXPECT_EQ(v(2, i), 0.0);
}

}  // namespace
