#include "qp_oracle.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "test_models.hpp"

namespace testing_support {

using closedlink::MatX;
using closedlink::VecX;

std::optional<VecX> enumerate_active_sets(const closedlink::QuadraticProgram& qp) {
  const int n = qp.variables();
  const MatX h = qp.hessian();
  const VecX lin = qp.linear_term();
  const MatX& c = qp.equality_matrix();
  const MatX& g = qp.inequality_matrix();
  // One-sided rows s * g_i^T x <= s * bound.
  std::vector<VecX> normals;
  std::vector<double> bounds;
  for (int i = 0; i < g.rows(); ++i) {
    if (std::isfinite(qp.inequality_upper()[i])) {
      normals.push_back(g.row(i).transpose());
      bounds.push_back(qp.inequality_upper()[i]);
    }
    if (std::isfinite(qp.inequality_lower()[i])) {
      normals.push_back(-g.row(i).transpose());
      bounds.push_back(-qp.inequality_lower()[i]);
    }
  }
  const int rows = static_cast<int>(normals.size());
  const int ne = static_cast<int>(c.rows());
  std::optional<VecX> best;
  double best_value = std::numeric_limits<double>::infinity();
  for (long mask = 0; mask < (1L << rows); ++mask) {
    std::vector<int> set;
    for (int i = 0; i < rows; ++i) {
      if (mask & (1L << i)) set.push_back(i);
    }
    const int k = ne + static_cast<int>(set.size());
    if (k > n) continue;
    MatX kkt = MatX::Zero(n + k, n + k);
    VecX rhs = VecX::Zero(n + k);
    kkt.topLeftCorner(n, n) = h;
    rhs.head(n) = -lin;
    for (int j = 0; j < ne; ++j) {
      kkt.block(0, n + j, n, 1) = c.row(j).transpose();
      kkt.block(n + j, 0, 1, n) = c.row(j);
      rhs[n + j] = qp.equality_vector()[j];
    }
    for (size_t j = 0; j < set.size(); ++j) {
      const int col = n + ne + static_cast<int>(j);
      kkt.block(0, col, n, 1) = normals[set[j]];
      kkt.block(col, 0, 1, n) = normals[set[j]].transpose();
      rhs[col] = bounds[set[j]];
    }
    Eigen::FullPivLU<MatX> lu(kkt);
    if (!lu.isInvertible()) continue;
    const VecX sol = lu.solve(rhs);
    const VecX x = sol.head(n);
    bool ok = (sol.tail(set.size()).array() >= -1e-10).all();
    for (int i = 0; i < rows && ok; ++i) ok = normals[i].dot(x) <= bounds[i] + 1e-10;
    if (!ok) continue;
    const double value = qp.objective(x);
    if (value < best_value) {
      best_value = value;
      best = x;
    }
  }
  return best;
}

closedlink::QuadraticProgram random_qp(std::mt19937& rng, int variables, int equalities, int inequalities,
                                       bool two_sided) {
  closedlink::QuadraticProgram qp(variables);
  qp.add_term(MatX(MatX::NullaryExpr(variables + 2, variables, [&] { return uniform(rng, -1, 1); })),
              random_vector(rng, variables + 2, 3.0));
  const VecX interior = random_vector(rng, variables, 0.5);
  if (equalities > 0) {
    const MatX c = MatX::NullaryExpr(equalities, variables, [&] { return uniform(rng, -1, 1); });
    qp.add_equality(c, c * interior);
  }
  if (inequalities > 0) {
    const MatX g = MatX::NullaryExpr(inequalities, variables, [&] { return uniform(rng, -1, 1); });
    const VecX margin = VecX::NullaryExpr(inequalities, [&] { return uniform(rng, 0.05, 0.5); });
    const VecX upper = g * interior + margin;
    if (two_sided) qp.add_inequality(g, upper, g * interior - margin);
    else qp.add_inequality(g, upper);
  }
  return qp;
}

}  // namespace testing_support
