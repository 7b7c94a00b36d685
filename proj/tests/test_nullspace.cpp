#include <gtest/gtest.h>

#include <random>

#include "nlfilm/geometry.hpp"
#include "nlfilm/nullspace.hpp"

using namespace nlfilm;

namespace {

const RadialKernel& kernel3() {
  static const RadialKernel k = make_truncated_fractional(0.5);
  return k;
}

SlabDomain tiny_slab() {
  return {CrossSection::rectangle(1.5, 1.5, {2.0, 2.0}), 1.5, 2.5, Horizon(1, 1), Grid<3>({16, 16, 8}, {4, 4, 4})};
}

// masked gradient assembled from the real-space stencil, independent of the FFT path
Eigen::MatrixXd stencil_matrix(const NonlocalOperator<3>& op, const Mask& omega, const std::vector<std::size_t>& cols) {
  const auto& g = op.grid();
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (omega[i]) rows.push_back(i);
  std::map<std::size_t, Eigen::Index> col_index;
  for (std::size_t j = 0; j < cols.size(); ++j) col_index[cols[j]] = Eigen::Index(j);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(Eigen::Index(3 * rows.size()), Eigen::Index(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto x = g.unravel(rows[r]);
    for (int d = 0; d < 3; ++d) {
      for (int side = 0; side < 2; ++side) {
        auto base = x;
        base[d] += side;
        const double sign = side ? 1.0 : -1.0;
        for (const auto& e : op.stencil()) {
          const std::size_t src = g.ravel_wrapped({base[0] - e.offset[0], base[1] - e.offset[1], base[2] - e.offset[2]});
          const auto it = col_index.find(src);
          if (it != col_index.end()) m(Eigen::Index(3 * r + d), it->second) += sign * e.weight / g.spacing(d);
        }
      }
    }
  }
  return m;
}

TEST(Nullspace, DimensionMatchesStencilRank) {
  const SlabDomain d = tiny_slab();
  for (const Horizon& h : {Horizon(0, 0), Horizon(0.5, 0.5)}) {
    const NonlocalOperator<3> op(kernel3(), h, d.grid, Realization::compact);
    const DomainMasks m = reach_masks(d.with_horizon(h), op);
    const NullspaceBasis nb = nullspace(op, m.omega, m.fattened);
    const Eigen::MatrixXd a = stencil_matrix(op, m.omega, nb.support_nodes);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv[i] > 1e-8 * sv[0];
    EXPECT_EQ(nb.scalar_dimension(), int(nb.support_nodes.size()) - rank);
    EXPECT_EQ(nb.dimension(3), 3 * nb.scalar_dimension());
    if (h.local()) EXPECT_EQ(nb.scalar_dimension(), 1);
    else EXPECT_GT(nb.scalar_dimension(), 1);
  }
}

TEST(Nullspace, BasisIsOrthonormalAndAnnihilated) {
  const SlabDomain d = tiny_slab();
  const Horizon h(1.0, 0.5);
  const NonlocalOperator<3> op(kernel3(), h, d.grid, Realization::compact);
  const DomainMasks m = reach_masks(d.with_horizon(h), op);
  const NullspaceBasis nb = nullspace(op, m.omega, m.fattened);
  const Eigen::MatrixXd gram = nb.basis.transpose() * nb.basis * nb.cell_volume;
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(nullspace_residual(op, nb), 1e-10);
  // projection is idempotent and leaves null fields alone
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  Field<3> u(d.grid, 3);
  for (double& v : u.data) v = n(rng);
  u.restrict_to(m.fattened);
  const Field<3> p = nb.project(u);
  EXPECT_LT(sup_norm(nb.project(p) - p), 1e-10);
  EXPECT_LT(poincare_ratio(op, nb, p).distance, 1e-10);
}

TEST(Nullspace, PoincareRatioBoundedByInverseSingularValue) {
  const SlabDomain d = tiny_slab();
  for (const Horizon& h : {Horizon(0, 0), Horizon(0.5, 0.5), Horizon(1, 0.5), Horizon(1, 1)}) {
    const NonlocalOperator<3> op(kernel3(), h, d.grid, Realization::compact);
    const DomainMasks m = reach_masks(d.with_horizon(h), op);
    const NullspaceBasis nb = nullspace(op, m.omega, m.fattened);
    const double bound = 1.0 / nb.smallest_nonzero();
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n;
    for (int s = 0; s < 10; ++s) {
      Field<3> u(d.grid, 3);
      for (double& v : u.data) v = n(rng);
      u.restrict_to(m.fattened);
      EXPECT_LE(poincare_ratio(op, nb, u).ratio, bound * (1.0 + 1e-9));
    }
  }
}

TEST(Nullspace, VanishingThirdColumnMeansColumnConstantUpToNullFields) {
  const SlabDomain d = tiny_slab();
  const Horizon h(0.5, 0.5);
  const NonlocalOperator<3> op(kernel3(), h, d.grid, Realization::compact);
  const DomainMasks m = reach_masks(d.with_horizon(h), op);
  const NullspaceBasis nb = nullspace(op, m.omega, m.fattened);
  const ConstancyReport rep = x3_constancy_check(op, nb, 5, 3);
  EXPECT_GT(rep.third_column_null_dimension, rep.nullspace_dimension);
  EXPECT_LT(rep.worst_residual, 1e-10);
}

TEST(Nullspace, RefusesLargeSupports) {
  const Grid<3> g({32, 32, 32}, {4, 4, 4});
  const NonlocalOperator<3> op(kernel3(), Horizon(0, 0), g, Realization::compact);
  const Mask all(g.size(), 1);
  EXPECT_THROW(nullspace(op, all, all), SizeError);
}

}  // namespace
