#include "closedlink/qp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace closedlink {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MatX append_rows(const MatX& top, const MatX& bottom) {
  MatX out(top.rows() + bottom.rows(), bottom.cols());
  out << top, bottom;
  return out;
}

VecX append(const VecX& top, const VecX& bottom) {
  VecX out(top.size() + bottom.size());
  out << top, bottom;
  return out;
}

// Inequality a^T z <= b in reduced coordinates, a of unit length.
struct ReducedRow {
  VecX a;
  double b = 0.0;
  ActiveBound id;
};

std::vector<ActiveBound> ids_of(const std::vector<ReducedRow>& rows, const std::vector<int>& set) {
  std::vector<ActiveBound> out;
  for (int i : set) out.push_back(rows[i].id);
  return out;
}

MatX columns_of(const std::vector<ReducedRow>& rows, const std::vector<int>& set, int dim) {
  MatX n(dim, static_cast<int>(set.size()));
  for (size_t j = 0; j < set.size(); ++j) n.col(j) = rows[set[j]].a;
  return n;
}

bool contains(const std::vector<int>& set, int i) {
  return std::find(set.begin(), set.end(), i) != set.end();
}

// Dual active-set projection of `target` onto {z : a_i^T z <= b_i}. Returns the
// active rows at the projection, which are linearly independent.
std::vector<int> feasible_point(const std::vector<ReducedRow>& rows, VecX& z, const QpOptions& opt,
                                int& iterations) {
  const int dim = static_cast<int>(z.size());
  std::vector<int> active;
  std::vector<double> lambda;
  while (true) {
    int p = -1;
    double worst = 0.0;
    for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
      if (contains(active, i)) continue;
      const double violation = rows[i].a.dot(z) - rows[i].b;
      if (violation > 1e-12 * std::max(1.0, std::abs(rows[i].b)) && violation > worst) {
        worst = violation;
        p = i;
      }
    }
    if (p < 0) return active;

    double lambda_p = 0.0;
    while (true) {
      if (++iterations > opt.max_iterations) {
        throw Error(ErrorCode::kMaxIterations, "QP feasibility phase exceeded the iteration limit");
      }
      const MatX n = columns_of(rows, active, dim);
      VecX r = VecX::Zero(static_cast<int>(active.size()));
      if (!active.empty()) r = n.colPivHouseholderQr().solve(rows[p].a);
      const VecX dz = -(rows[p].a - n * r);
      const bool dependent = dz.norm() <= 1e-12;
      const double slack = rows[p].a.dot(z) - rows[p].b;
      const double full_step = dependent ? kInf : slack / dz.squaredNorm();

      double partial_step = kInf;
      int drop = -1;
      for (size_t j = 0; j < active.size(); ++j) {
        if (r[j] > 1e-14 && lambda[j] / r[j] < partial_step) {
          partial_step = lambda[j] / r[j];
          drop = static_cast<int>(j);
        }
      }
      if (dependent && drop < 0) {
        // y = (-r, 1) >= 0 combines the rows into 0 <= negative margin.
        std::vector<int> combined = active;
        combined.push_back(p);
        const double y_norm = std::sqrt(1.0 + r.squaredNorm());
        throw Infeasible("inequality constraints are infeasible", ids_of(rows, combined),
                         dz.norm() / y_norm);
      }
      const double step = std::min(full_step, partial_step);
      if (!dependent) z += step * dz;
      for (size_t j = 0; j < active.size(); ++j) lambda[j] -= step * r[j];
      lambda_p += step;
      if (full_step <= partial_step) {
        active.push_back(p);
        lambda.push_back(lambda_p);
        break;
      }
      active.erase(active.begin() + drop);
      lambda.erase(lambda.begin() + drop);
    }
  }
}

double primal_violation(const QuadraticProgram& qp, const VecX& x) {
  double worst = 0.0;
  if (qp.equality_matrix().rows() > 0) {
    worst = (qp.equality_matrix() * x - qp.equality_vector()).lpNorm<Eigen::Infinity>();
  }
  const VecX gx = qp.inequality_matrix() * x;
  for (int i = 0; i < gx.size(); ++i) {
    worst = std::max({worst, gx[i] - qp.inequality_upper()[i], qp.inequality_lower()[i] - gx[i]});
  }
  return worst;
}

// Mapping the reduced solution back to x loses digits when scaled variables
// cancel, so the equalities and working rows are re-imposed in x with a
// minimum-norm correction in the scaled metric. Kept only when it helps.
void refine_on_working_set(const QuadraticProgram& qp, const VecX& scale, const std::vector<ActiveBound>& working,
                           VecX& x) {
  const MatX& c = qp.equality_matrix();
  const MatX& g = qp.inequality_matrix();
  const int ne = static_cast<int>(c.rows());
  const int rows = ne + static_cast<int>(working.size());
  if (rows == 0) return;
  MatX a(rows, qp.variables());
  VecX rhs(rows);
  if (ne > 0) {
    a.topRows(ne) = c;
    rhs.head(ne) = qp.equality_vector();
  }
  for (size_t j = 0; j < working.size(); ++j) {
    const ActiveBound& id = working[j];
    a.row(ne + j) = g.row(id.row);
    rhs[ne + j] = id.lower ? qp.inequality_lower()[id.row] : qp.inequality_upper()[id.row];
  }
  Eigen::CompleteOrthogonalDecomposition<MatX> cod(a * scale.asDiagonal());
  cod.setThreshold(1e-10);
  double before = primal_violation(qp, x);
  for (int pass = 0; pass < 2; ++pass) {
    const VecX candidate = x - scale.asDiagonal() * cod.solve(a * x - rhs);
    const double after = primal_violation(qp, candidate);
    if (!(after < before)) return;
    x = candidate;
    before = after;
  }
}

}  // namespace

QuadraticProgram::QuadraticProgram(int variables)
    : n_(variables), eq_matrix_(0, variables), ineq_matrix_(0, variables) {
  if (variables < 0) throw Error(ErrorCode::kInvalidArgument, "negative variable count");
}

void QuadraticProgram::add_term(const MatX& a, const VecX& b, double weight) {
  if (a.cols() != n_ || a.rows() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "objective term has inconsistent dimensions");
  }
  if (!(weight >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "objective weight must be non-negative");
  terms_.push_back({a, b, weight});
}

void QuadraticProgram::add_regularization(int offset, int size, double weight) {
  if (offset < 0 || size < 0 || offset + size > n_) {
    throw Error(ErrorCode::kDimensionMismatch, "regularization block out of range");
  }
  MatX a = MatX::Zero(size, n_);
  a.middleCols(offset, size).setIdentity();
  add_term(a, VecX::Zero(size), weight);
}

void QuadraticProgram::add_equality(const MatX& c, const VecX& d) {
  if (c.cols() != n_ || c.rows() != d.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "equality constraint has inconsistent dimensions");
  }
  eq_matrix_ = append_rows(eq_matrix_, c);
  eq_vector_ = append(eq_vector_, d);
}

void QuadraticProgram::add_inequality(const MatX& g, const VecX& upper, const VecX& lower) {
  const VecX lo = lower.size() == 0 ? VecX::Constant(g.rows(), -kInf) : lower;
  if (g.cols() != n_ || g.rows() != upper.size() || lo.size() != upper.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "inequality constraint has inconsistent dimensions");
  }
  if ((lo.array() > upper.array()).any()) {
    throw Error(ErrorCode::kInvalidArgument, "inequality lower bound exceeds upper bound");
  }
  ineq_matrix_ = append_rows(ineq_matrix_, g);
  ineq_upper_ = append(ineq_upper_, upper);
  ineq_lower_ = append(ineq_lower_, lo);
}

MatX QuadraticProgram::hessian() const {
  MatX h = MatX::Zero(n_, n_);
  for (const auto& t : terms_) h.noalias() += 2.0 * t.weight * t.a.transpose() * t.a;
  return h;
}

VecX QuadraticProgram::linear_term() const {
  VecX g = VecX::Zero(n_);
  for (const auto& t : terms_) g.noalias() -= 2.0 * t.weight * t.a.transpose() * t.b;
  return g;
}

double QuadraticProgram::objective(const VecX& x) const {
  double f = 0.0;
  for (const auto& t : terms_) f += t.weight * (t.a * x - t.b).squaredNorm();
  return f;
}

VecX QuadraticProgram::gradient(const VecX& x) const {
  VecX g = VecX::Zero(n_);
  for (const auto& t : terms_) g.noalias() += 2.0 * t.weight * t.a.transpose() * (t.a * x - t.b);
  return g;
}

double KktResiduals::max() const {
  return std::max({stationarity, primal, dual, complementarity});
}

Infeasible::Infeasible(const std::string& message, std::vector<ActiveBound> violated,
                       double certificate_residual)
    : Error(ErrorCode::kInfeasible, message + " (certificate residual " +
                                        std::to_string(certificate_residual) + ")"),
      violated_(std::move(violated)),
      certificate_residual_(certificate_residual) {}

QpSolution solve(const QuadraticProgram& qp, const QpOptions& opt) {
  const int n = qp.variables();
  const MatX& c = qp.equality_matrix();
  const VecX& d = qp.equality_vector();
  const MatX& g = qp.inequality_matrix();
  const MatX hessian = qp.hessian();
  const VecX linear = qp.linear_term();

  // Jacobi scaling x = D y equalizes curvature across variables.
  VecX scale(n);
  for (int i = 0; i < n; ++i) scale[i] = hessian(i, i) > 0.0 ? 1.0 / std::sqrt(hessian(i, i)) : 1.0;
  const MatX c_scaled = c * scale.asDiagonal();

  // Equality elimination y = y0 + Z z.
  VecX y0 = VecX::Zero(n);
  MatX basis = MatX::Identity(n, n);
  if (c.rows() > 0) {
    Eigen::CompleteOrthogonalDecomposition<MatX> cod(c_scaled);
    cod.setThreshold(1e-10);
    y0 = cod.solve(d);
    const VecX residual = c_scaled * y0 - d;
    if (residual.lpNorm<Eigen::Infinity>() > opt.tolerance * std::max(1.0, d.lpNorm<Eigen::Infinity>())) {
      std::vector<ActiveBound> rows;
      for (int i = 0; i < residual.size(); ++i) {
        if (std::abs(residual[i]) > opt.tolerance) rows.push_back({i, false});
      }
      throw Infeasible("equality constraints are inconsistent", rows, residual.norm());
    }
    Eigen::ColPivHouseholderQR<MatX> qr(c_scaled.transpose());
    qr.setThreshold(1e-10);
    const int rank = static_cast<int>(qr.rank());
    const MatX q = qr.householderQ();
    basis = q.rightCols(n - rank);
  }
  const int dim = static_cast<int>(basis.cols());

  const MatX scaled_hessian = scale.asDiagonal() * hessian * scale.asDiagonal();
  const MatX reduced_hessian = basis.transpose() * scaled_hessian * basis;
  const VecX grad0 = scale.asDiagonal() * (hessian * (scale.asDiagonal() * y0) + linear);
  const VecX reduced_gradient = basis.transpose() * grad0;
  Eigen::LLT<MatX> llt(reduced_hessian);
  if (dim > 0 && (llt.info() != Eigen::Success || llt.rcond() < 1e-15)) {
    Eigen::SelfAdjointEigenSolver<MatX> eig(reduced_hessian, Eigen::EigenvaluesOnly);
    throw Error(ErrorCode::kNonConvex, "reduced Hessian is not positive definite (smallest eigenvalue " +
                                           std::to_string(eig.eigenvalues()[0]) + ")");
  }

  std::vector<ReducedRow> rows;
  auto add_row = [&](const VecX& grow, double bound, ActiveBound id) {
    const VecX gy = scale.asDiagonal() * grow;
    const VecX a = basis.transpose() * gy;
    const double b = bound - gy.dot(y0);
    const double norm = a.norm();
    if (norm <= 1e-12 * std::max(1.0, gy.norm())) {
      if (b < -opt.tolerance * std::max(1.0, std::abs(bound))) {
        throw Infeasible("constraint violated on the equality manifold", {id}, 0.0);
      }
      return;
    }
    rows.push_back({a / norm, b / norm, id});
  };
  for (int i = 0; i < g.rows(); ++i) {
    if (std::isfinite(qp.inequality_upper()[i])) add_row(g.row(i).transpose(), qp.inequality_upper()[i], {i, false});
    if (std::isfinite(qp.inequality_lower()[i])) add_row(-g.row(i).transpose(), -qp.inequality_lower()[i], {i, true});
  }

  QpSolution sol;
  VecX z = dim > 0 ? VecX(-llt.solve(reduced_gradient)) : VecX::Zero(0);
  std::vector<int> working = feasible_point(rows, z, opt, sol.iterations);

  auto reduced_objective = [&](const VecX& zz) {
    return qp.objective(scale.asDiagonal() * y0) + reduced_gradient.dot(zz) + 0.5 * zz.dot(reduced_hessian * zz);
  };
  sol.objective_history.push_back(reduced_objective(z));
  // After an unblocked full step z minimizes over the working set; the next
  // computed step is round-off and must not be taken.
  bool at_subspace_minimum = false;
  while (dim > 0) {
    if (++sol.iterations > opt.max_iterations) {
      throw Error(ErrorCode::kMaxIterations, "QP exceeded the iteration limit");
    }
    const VecX grad = reduced_hessian * z + reduced_gradient;
    // Null-space step: stays exactly on the working constraints however the Hessian is conditioned.
    VecX step;
    VecX mu;
    if (working.empty()) {
      step = -llt.solve(grad);
    } else {
      const MatX normals = columns_of(rows, working, dim);
      Eigen::ColPivHouseholderQR<MatX> qr(normals);
      qr.setThreshold(1e-12);
      const int rank = static_cast<int>(qr.rank());
      mu = qr.solve(-grad);
      if (rank < dim) {
        const MatX q = qr.householderQ();
        const MatX free = q.rightCols(dim - rank);
        const MatX projected = free.transpose() * reduced_hessian * free;
        step = free * projected.llt().solve(-free.transpose() * grad);
      } else {
        step = VecX::Zero(dim);
      }
    }

    if (at_subspace_minimum || step.lpNorm<Eigen::Infinity>() <= 1e-13 * std::max(1.0, z.lpNorm<Eigen::Infinity>())) {
      at_subspace_minimum = false;
      int drop = -1;
      double most_negative = -1e-12 * std::max(1.0, mu.size() ? mu.lpNorm<Eigen::Infinity>() : 0.0);
      for (int j = 0; j < mu.size(); ++j) {
        if (mu[j] < most_negative) {
          most_negative = mu[j];
          drop = j;
        }
      }
      if (drop < 0) break;
      working.erase(working.begin() + drop);
      continue;
    }

    double alpha = 1.0;
    int blocking = -1;
    const double step_norm = step.norm();
    for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
      if (contains(working, i)) continue;
      const double rate = rows[i].a.dot(step);
      if (rate <= 1e-14 * step_norm) continue;
      const double ratio = std::max(0.0, rows[i].b - rows[i].a.dot(z)) / rate;
      if (ratio < alpha) {
        alpha = ratio;
        blocking = i;
      }
    }
    z += alpha * step;
    if (blocking >= 0) working.push_back(blocking);
    at_subspace_minimum = blocking < 0;
    sol.objective_history.push_back(reduced_objective(z));
  }

  sol.x = scale.asDiagonal() * (y0 + basis * z);
  refine_on_working_set(qp, scale, ids_of(rows, working), sol.x);
  std::sort(working.begin(), working.end(), [&](int l, int r) {
    return rows[l].id.row != rows[r].id.row ? rows[l].id.row < rows[r].id.row : rows[l].id.lower < rows[r].id.lower;
  });
  sol.active_set = ids_of(rows, working);

  // Multipliers from full stationarity: grad f + C^T mu + sum +-G_i^T lambda_i = 0.
  const int ne = static_cast<int>(c.rows());
  MatX normals(n, ne + static_cast<int>(working.size()));
  normals.leftCols(ne) = c.transpose();
  for (size_t j = 0; j < working.size(); ++j) {
    const ActiveBound& id = rows[working[j]].id;
    normals.col(ne + j) = (id.lower ? -1.0 : 1.0) * g.row(id.row).transpose();
  }
  VecX multipliers = VecX::Zero(normals.cols());
  if (normals.cols() > 0) {
    Eigen::CompleteOrthogonalDecomposition<MatX> cod(normals);
    multipliers = cod.solve(-(hessian * sol.x + linear));
  }
  sol.equality_multipliers = multipliers.head(ne);
  sol.upper_multipliers = VecX::Zero(g.rows());
  sol.lower_multipliers = VecX::Zero(g.rows());
  for (size_t j = 0; j < working.size(); ++j) {
    const ActiveBound& id = rows[working[j]].id;
    (id.lower ? sol.lower_multipliers : sol.upper_multipliers)[id.row] = multipliers[ne + j];
  }
  sol.residuals = check_kkt(qp, sol.x, sol.equality_multipliers, sol.upper_multipliers, sol.lower_multipliers);
  return sol;
}

KktResiduals check_kkt(const QuadraticProgram& qp, const VecX& x, const VecX& equality_multipliers,
                       const VecX& upper_multipliers, const VecX& lower_multipliers) {
  const MatX& c = qp.equality_matrix();
  const MatX& g = qp.inequality_matrix();
  if (x.size() != qp.variables() || equality_multipliers.size() != c.rows() ||
      upper_multipliers.size() != g.rows() || lower_multipliers.size() != g.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "KKT check received inconsistent sizes");
  }
  KktResiduals r;
  VecX stationarity = qp.gradient(x) + c.transpose() * equality_multipliers +
                      g.transpose() * (upper_multipliers - lower_multipliers);
  r.stationarity = stationarity.size() ? stationarity.lpNorm<Eigen::Infinity>() : 0.0;
  if (c.rows() > 0) r.primal = (c * x - qp.equality_vector()).lpNorm<Eigen::Infinity>();
  const VecX gx = g * x;
  for (int i = 0; i < g.rows(); ++i) {
    const double up = qp.inequality_upper()[i];
    const double lo = qp.inequality_lower()[i];
    r.primal = std::max({r.primal, gx[i] - up, lo - gx[i]});
    r.dual = std::max({r.dual, -upper_multipliers[i], -lower_multipliers[i]});
    auto product = [](double multiplier, double slack) {
      if (multiplier == 0.0) return 0.0;
      return std::isfinite(slack) ? std::abs(multiplier * slack) : kInf;
    };
    r.complementarity = std::max({r.complementarity, product(upper_multipliers[i], up - gx[i]),
                                  product(lower_multipliers[i], gx[i] - lo)});
  }
  return r;
}

}  // namespace closedlink
