#include <gtest/gtest.h>

#include <random>

#include "nlfilm/field.hpp"
#include "nlfilm/io.hpp"

using namespace nlfilm;

namespace {

TEST(Grid, RavelIsRowMajorWithLastAxisFastest) {
  const Grid<3> g({4, 6, 8}, {1.0, 2.0, 3.0});
  EXPECT_EQ(g.size(), 192u);
  EXPECT_EQ(g.ravel({0, 0, 1}), 1u);
  EXPECT_EQ(g.ravel({0, 1, 0}), 8u);
  EXPECT_EQ(g.ravel({1, 0, 0}), 48u);
  for (std::size_t i = 0; i < g.size(); i += 7) EXPECT_EQ(g.ravel(g.unravel(i)), i);
  EXPECT_EQ(g.ravel_wrapped({-1, 6, 9}), g.ravel({3, 0, 1}));
  EXPECT_DOUBLE_EQ(g.cell_volume(), 0.25 * (2.0 / 6) * (3.0 / 8));
  EXPECT_DOUBLE_EQ(g.node({0, 0, 0})[2], 0.5 * 3.0 / 8);
}

TEST(Grid, RejectsOddOrTinyCounts) {
  EXPECT_THROW((Grid<2>({5, 8}, {1.0, 1.0})), ShapeError);
  EXPECT_THROW((Grid<2>({2, 8}, {1.0, 1.0})), ShapeError);
  EXPECT_THROW((Grid<2>({8, 8}, {1.0, 0.0})), ShapeError);
}

TEST(Transform, ConstantHasOnlyTheZeroModeWithVolumeScaling) {
  const Grid<3> g({8, 8, 4}, {2.0, 3.0, 1.0});
  Field<3> u(g, 1);
  for (double& v : u.data) v = 2.5;
  const auto s = forward_transform(u);
  EXPECT_NEAR(s.data[0].real(), 2.5 * g.volume(), 1e-12);
  for (std::size_t m = 1; m < s.modes(); ++m) EXPECT_LT(std::abs(s.data[m]), 1e-12);
}

TEST(Transform, RoundTripAndParseval) {
  const Grid<2> g({16, 12}, {2.0, 1.5});
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  Field<2> u(g, 2);
  for (double& v : u.data) v = n(rng);
  const Field<2> back = inverse_transform(forward_transform(u));
  EXPECT_LT(sup_norm(back - u), 1e-13);
}

TEST(Transform, MatchesDirectSumForSingleMode) {
  const Grid<2> g({8, 8}, {1.0, 2.0});
  Field<2> u(g, 1);
  u.data[g.ravel({3, 5})] = 1.0;
  const auto s = forward_transform(u);
  // mode (k1, k2) = (1, 2): h^2 exp(-i xi . x_j) with x_j the node offset from index 0
  const double xi1 = 2 * std::numbers::pi * 1 / 1.0, xi2 = 2 * std::numbers::pi * 2 / 2.0;
  const double phase = xi1 * 3 * g.spacing(0) + xi2 * 5 * g.spacing(1);
  const std::complex<double> ref = g.cell_volume() * std::exp(std::complex<double>(0.0, -phase));
  const std::size_t m = std::size_t(1) * g.spectral_dims()[1] + 2;
  EXPECT_LT(std::abs(s.data[m] - ref), 1e-14);
}

TEST(Field, NormsAndInnerProduct) {
  const Grid<2> g({4, 4}, {2.0, 2.0});
  Field<2> u(g, 2);
  for (std::size_t i = 0; i < g.size(); ++i) u(0, i) = 3.0, u(1, i) = 4.0;
  EXPECT_NEAR(lp_norm(u, 2.0).value, 5.0 * 2.0, 1e-12);
  EXPECT_NEAR(lp_norm(u, 1.0).value, 5.0 * 4.0, 1e-12);
  EXPECT_NEAR(sup_norm(u), 5.0, 1e-15);
  EXPECT_NEAR(inner(u, u), 25.0 * 4.0, 1e-12);
  Mask none(g.size(), 0);
  EXPECT_TRUE(lp_norm(u, 2.0, &none).empty_region);
  EXPECT_THROW(lp_norm(u, 0.5), DomainError);
}

TEST(Field, RestrictionRecordsSupport) {
  const Grid<2> g({4, 4}, {1.0, 1.0});
  Field<2> u(g, 1);
  for (double& v : u.data) v = 1.0;
  Mask m(g.size(), 0);
  m[5] = 1;
  u.restrict_to(m);
  EXPECT_TRUE(u.respects_support());
  EXPECT_EQ(u.data[5], 1.0);
  EXPECT_EQ(u.data[4], 0.0);
  u.data[0] = 1.0;
  EXPECT_FALSE(u.respects_support());
}

TEST(Field, SamplingRejectsNonFiniteValues) {
  const Grid<2> g({4, 4}, {1.0, 1.0});
  EXPECT_THROW(sample(g, [](const std::array<double, 2>& x) { return x[0] > 0.5 ? NAN : 0.0; }), SamplingError);
  const auto u = sample(g, [](const std::array<double, 2>& x) { return std::array<double, 2>{x[0], x[1]}; });
  EXPECT_EQ(u.components, 2);
}

TEST(FieldIo, DumpRoundTripKeepsValuesAndSupport) {
  const Grid<3> g({4, 6, 4}, {1.0, 1.5, 2.0});
  Field<3> u(g, 3);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> un(-1, 1);
  for (double& v : u.data) v = un(rng);
  Mask m(g.size(), 0);
  for (std::size_t i = 10; i < 40; ++i) m[i] = 1;
  u.restrict_to(m);
  const auto path = std::filesystem::temp_directory_path() / "nlfilm_field_io" / "u.bin";
  io::write_field(path, u);
  const Field<3> v = io::read_field<3>(path);
  EXPECT_EQ(v.grid, g);
  EXPECT_EQ(v.data, u.data);
  ASSERT_TRUE(v.support.has_value());
  EXPECT_EQ(*v.support, m);
  EXPECT_EQ(io::field_dimension(path), 3);
  EXPECT_THROW(io::read_field<2>(path), ShapeError);
}

}  // namespace
