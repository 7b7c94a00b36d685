#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <map>
#include <random>
#include <vector>

#include "field.hpp"
#include "nlgrad.hpp"

namespace nlfilm {

// Null space of u |-> (D u)|_Ω for u supported on a mask, per scalar channel.
// Vector-valued null spaces are the channelwise products, so `dimension(c) = c * scalar_dimension()`.
struct NullspaceBasis {
  Grid<3> grid;
  Mask omega;
  Mask support;
  std::vector<std::size_t> support_nodes;  // column order of the basis
  Eigen::MatrixXd basis;                   // support_nodes.size() x k, orthonormal in the grid L2
  Eigen::VectorXd singular_values;         // of the masked operator, descending
  double threshold = 0.0;
  double cell_volume = 1.0;

  int scalar_dimension() const { return int(basis.cols()); }
  int dimension(int components) const { return components * scalar_dimension(); }

  // smallest singular value above the threshold
  double smallest_nonzero() const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < singular_values.size(); ++i)
      if (singular_values[i] > threshold) s = singular_values[i];
    return s;
  }

  Eigen::VectorXd restrict(const Field<3>& u, int c) const {
    Eigen::VectorXd v(support_nodes.size());
    for (std::size_t j = 0; j < support_nodes.size(); ++j) v[j] = u(c, support_nodes[j]);
    return v;
  }

  // L2-orthogonal projection onto the null space, channelwise
  Field<3> project(const Field<3>& u) const {
    Field<3> out(u.grid, u.components);
    for (int c = 0; c < u.components; ++c) {
      const Eigen::VectorXd v = restrict(u, c);
      const Eigen::VectorXd p = basis * (basis.transpose() * v) * cell_volume;
      for (std::size_t j = 0; j < support_nodes.size(); ++j) out(c, support_nodes[j]) = p[j];
    }
    out.support = support;
    return out;
  }

  Field<3> field(int column) const {
    Field<3> f(grid, 1);
    for (std::size_t j = 0; j < support_nodes.size(); ++j) f.data[support_nodes[j]] = basis(Eigen::Index(j), column);
    f.support = support;
    return f;
  }

};

namespace detail {

constexpr std::size_t kNullspaceNodeLimit = 24 * 24 * 24;

inline std::vector<std::size_t> mask_nodes(const Mask& m) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) out.push_back(i);
  return out;
}

// rows: (Ω node, direction) for the listed directions; columns: support nodes
inline Eigen::MatrixXd masked_gradient_matrix(const NonlocalOperator<3>& op, const Mask& omega, const Mask& support,
                                              const std::vector<int>& directions) {
  const auto& g = op.grid();
  if (g.size() > kNullspaceNodeLimit) throw SizeError("grid too large for dense null-space assembly (limit 24^3 nodes)");
  if (omega.size() != g.size() || support.size() != g.size()) throw ShapeError("mask size does not match grid");
  const auto rows = mask_nodes(omega);
  const auto cols = mask_nodes(support);
  const auto nd = Eigen::Index(directions.size());
  Eigen::MatrixXd m(Eigen::Index(rows.size()) * nd, Eigen::Index(cols.size()));
  Field<3> impulse(g, 1);
  for (std::size_t j = 0; j < cols.size(); ++j) {
    impulse.data[cols[j]] = 1.0;
    const Field<3> grad = op.gradient(impulse);
    impulse.data[cols[j]] = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (Eigen::Index d = 0; d < nd; ++d) m(Eigen::Index(r) * nd + d, Eigen::Index(j)) = grad(directions[d], rows[r]);
  }
  return m;
}

// right singular vectors beyond the rank plus those with singular value below `thr`
inline Eigen::MatrixXd right_null(const Eigen::MatrixXd& m, double rel_tol, Eigen::VectorXd* sv, double* thr_out) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
  const Eigen::VectorXd s = svd.singularValues();
  const double thr = rel_tol * (s.size() ? s[0] : 0.0);
  Eigen::Index rank = 0;
  while (rank < s.size() && s[rank] > thr) ++rank;
  if (sv) *sv = s;
  if (thr_out) *thr_out = thr;
  return svd.matrixV().rightCols(m.cols() - rank);
}

}  // namespace detail

inline NullspaceBasis nullspace(const NonlocalOperator<3>& op, const Mask& omega, const Mask& support,
                                double rel_tol = 1e-8) {
  NullspaceBasis nb;
  nb.omega = omega;
  nb.support = support;
  nb.grid = op.grid();
  nb.cell_volume = op.grid().cell_volume();
  nb.support_nodes = detail::mask_nodes(support);
  const Eigen::MatrixXd m = detail::masked_gradient_matrix(op, omega, support, {0, 1, 2});
  nb.basis = detail::right_null(m, rel_tol, &nb.singular_values, &nb.threshold) / std::sqrt(nb.cell_volume);
  return nb;
}

// ||(D b)|_Ω|| for each basis field, in the grid L2
inline double nullspace_residual(const NonlocalOperator<3>& op, const NullspaceBasis& nb) {
  double worst = 0.0;
  for (int k = 0; k < nb.scalar_dimension(); ++k) {
    const Field<3> g = op.gradient(nb.field(k));
    double s = 0.0;
    for (std::size_t i = 0; i < g.nodes(); ++i)
      if (nb.omega[i])
        for (int d = 0; d < 3; ++d) s += g(d, i) * g(d, i);
    worst = std::max(worst, std::sqrt(s * nb.cell_volume));
  }
  return worst;
}

struct PoincareSample {
  double distance = 0.0;  // min_h ||u - h||
  double gradient = 0.0;  // ||(D u)|_Ω||
  double ratio = 0.0;
};

inline PoincareSample poincare_ratio(const NonlocalOperator<3>& op, const NullspaceBasis& nb, const Field<3>& u) {
  const Field<3> r = u - nb.project(u);
  const Field<3> g = op.gradient(u);
  PoincareSample s;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < u.nodes(); ++i) {
    for (int c = 0; c < u.components; ++c) num += r(c, i) * r(c, i);
    if (nb.omega[i])
      for (int c = 0; c < g.components; ++c) den += g(c, i) * g(c, i);
  }
  s.distance = std::sqrt(num * nb.cell_volume);
  s.gradient = std::sqrt(den * nb.cell_volume);
  s.ratio = s.gradient > 0.0 ? s.distance / s.gradient : (s.distance > 0.0 ? INFINITY : 0.0);
  return s;
}

struct ConstancyReport {
  int third_column_null_dimension = 0;  // scalar fields with (D u) e3 = 0 on Ω and its in-plane shifts
  int nullspace_dimension = 0;
  int column_count = 0;
  double worst_residual = 0.0;  // relative distance of a sample to N + {x3-independent}
};

// samples u with vanishing third gradient column on Ω and measures how far u is from h + (x3-independent)
inline ConstancyReport x3_constancy_check(const NonlocalOperator<3>& op, const NullspaceBasis& nb, int samples,
                                          std::uint64_t seed) {
  const auto& g = op.grid();
  // forward differences read Ω + e1 and Ω + e2, so the constraint is imposed there as well
  Mask rows = nb.omega;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (nb.omega[i])
      for (int a = 0; a < 2; ++a) {
        auto x = g.unravel(i);
        ++x[a];
        rows[g.ravel_wrapped(x)] = 1;
      }
  const Eigen::MatrixXd m3 = detail::masked_gradient_matrix(op, rows, nb.support, {2});
  const Eigen::MatrixXd n3 = detail::right_null(m3, 1e-8, nullptr, nullptr);
  // column indicators restricted to the support
  std::vector<int> col_of(nb.support_nodes.size());
  std::map<std::size_t, int> ids;
  for (std::size_t j = 0; j < nb.support_nodes.size(); ++j) {
    const auto x = g.unravel(nb.support_nodes[j]);
    const std::size_t key = std::size_t(x[0]) * g.dims[1] + x[1];
    auto it = ids.emplace(key, int(ids.size())).first;
    col_of[j] = it->second;
  }
  const Eigen::Index nn = nb.basis.cols(), nc = Eigen::Index(ids.size());
  Eigen::MatrixXd span(nb.support_nodes.size(), nn + nc);
  span.leftCols(nn) = nb.basis;
  span.rightCols(nc).setZero();
  for (std::size_t j = 0; j < col_of.size(); ++j) span(Eigen::Index(j), nn + col_of[j]) = 1.0;
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> qr(span);
  ConstancyReport rep;
  rep.third_column_null_dimension = int(n3.cols());
  rep.nullspace_dimension = int(nn);
  rep.column_count = int(nc);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (int s = 0; s < samples && n3.cols() > 0; ++s) {
    Eigen::VectorXd coef(n3.cols());
    for (auto& v : coef) v = normal(rng);
    const Eigen::VectorXd u = n3 * coef;
    const Eigen::VectorXd fit = span * qr.solve(u);
    rep.worst_residual = std::max(rep.worst_residual, (u - fit).norm() / u.norm());
  }
  return rep;
}

}  // namespace nlfilm
