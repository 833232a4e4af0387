#include "closedlink/closure.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "closedlink/errors.hpp"
#include "closedlink/relative.hpp"

namespace closedlink {

void ClosureSystem::require_regular() const {
  if (passive_block.rows() != passive_block.cols()) {
    throw Error(ErrorCode::kInvalidModel, "closure rows (" + std::to_string(passive_block.rows()) +
                                              ") do not match passive DOFs (" +
                                              std::to_string(passive_block.cols()) + ")");
  }
  if (singular) throw SingularLinkage(sigma_min, weakest_loop);
}

VecX ClosureSystem::solve_passive(const VecX& rhs) const {
  require_regular();
  if (passive == 0) return VecX::Zero(0);
  return lu.solve(rhs);
}

VecX ClosureSystem::solve_passive_transpose(const VecX& rhs) const {
  require_regular();
  if (passive == 0) return VecX::Zero(0);
  return lu.transpose().solve(rhs);
}

namespace {

// Fills rows [row, row + loop.rows()) of whichever outputs are non-null.
void loop_rows(const Kinematics& kin, const LoopConstraint& loop, VecX* error, MatX* jacobian,
               VecX* bias) {
  const RelativeKinematics rel = relative_kinematics(kin, loop.frame_a, loop.frame_u);
  const bool any_rotation = loop.mask[3] || loop.mask[4] || loop.mask[5];
  Vec3 phi = Vec3::Zero();
  Mat3 rate = Mat3::Identity();
  Eigen::Matrix<double, 3, Eigen::Dynamic> angular_rows;
  Vec3 angular_bias = Vec3::Zero();
  if (any_rotation) {
    phi = rotation_log(rel.rotation);
    rate = log_rate_matrix(phi);
    if (jacobian) angular_rows = rate * rel.jacobian.bottomRows<3>();
    if (bias) {
      const Vec3 phi_dot = rate * rel.angular_velocity;
      angular_bias = rate * rel.acceleration_bias.tail<3>() +
                     log_rate_matrix_derivative(phi, phi_dot) * rel.angular_velocity;
    }
  }
  int row = loop.row_offset;
  int constant = 0;
  for (int k = 0; k < 6; ++k) {
    if (!loop.mask[k]) continue;
    if (k < 3) {
      if (error) (*error)[row] = rel.position[k] - loop.constants[constant];
      if (jacobian) jacobian->row(row) = rel.jacobian.row(k);
      if (bias) (*bias)[row] = rel.acceleration_bias[k];
    } else {
      if (error) (*error)[row] = phi[k - 3] - loop.constants[constant];
      if (jacobian) jacobian->row(row) = angular_rows.row(k - 3);
      if (bias) (*bias)[row] = angular_bias[k - 3];
    }
    ++row;
    ++constant;
  }
}

const LoopConstraint& loop_of_row(const MechanismModel& model, int row) {
  for (const auto& loop : model.loops()) {
    if (row >= loop.row_offset && row < loop.row_offset + loop.rows()) return loop;
  }
  return model.loops().back();
}

struct WeakestDirection {
  double sigma_min = 0.0;
  int row = 0;  // row carrying the largest share of the weakest left singular vector
};

// Smallest singular value of a square matrix. Rows and columns that share no
// nonzero entries form independent blocks, so the matrix is block diagonal up
// to a permutation and its singular values are the union of the blocks'.
// Roundoff-level entries are dropped; by Weyl's inequality this moves every
// singular value by at most the dropped norm.
WeakestDirection weakest_direction(const MatX& a) {
  const int rows = static_cast<int>(a.rows());
  const int cols = static_cast<int>(a.cols());
  const double negligible = 1e-14 * a.cwiseAbs().maxCoeff();
  std::vector<int> parent(rows + cols);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) {
      if (std::abs(a(i, j)) > negligible) parent[find(i)] = find(rows + j);
    }
  }
  std::vector<std::vector<int>> block_rows(rows + cols), block_cols(rows + cols);
  for (int i = 0; i < rows; ++i) block_rows[find(i)].push_back(i);
  for (int j = 0; j < cols; ++j) block_cols[find(rows + j)].push_back(j);

  const auto gather = [&](int b) {
    MatX block(block_rows[b].size(), block_cols[b].size());
    for (size_t i = 0; i < block_rows[b].size(); ++i) {
      for (size_t j = 0; j < block_cols[b].size(); ++j) block(i, j) = a(block_rows[b][i], block_cols[b][j]);
    }
    return block;
  };
  double sigma_min = std::numeric_limits<double>::infinity();
  int weakest_block = -1;
  for (int b = 0; b < rows + cols; ++b) {
    const auto& r = block_rows[b];
    const auto& c = block_cols[b];
    if (r.empty() && c.empty()) continue;
    if (r.size() != c.size()) {
      // More rows than columns (or an all-zero column) in some block: rank deficient.
      return {0.0, r.empty() ? 0 : r.front()};
    }
    const MatX block = gather(b);
    // Eigenvalues of B^T B are fast and accurate unless sigma is small next to
    // ||B||; there the SVD decides.
    const Eigen::SelfAdjointEigenSolver<MatX> eig(block.transpose() * block, Eigen::EigenvaluesOnly);
    double sigma = std::sqrt(std::max(eig.eigenvalues()[0], 0.0));
    if (sigma < 1e-4 * block.norm()) sigma = Eigen::JacobiSVD<MatX>(block).singularValues().minCoeff();
    if (sigma < sigma_min) {
      sigma_min = sigma;
      weakest_block = b;
    }
  }
  if (weakest_block < 0) return {sigma_min, 0};
  Eigen::JacobiSVD<MatX> svd(gather(weakest_block), Eigen::ComputeFullU);
  int worst = 0;
  svd.matrixU().col(svd.singularValues().size() - 1).cwiseAbs().maxCoeff(&worst);
  return {sigma_min, block_rows[weakest_block][worst]};
}

}  // namespace

VecX closure_error(const Kinematics& kin) {
  const MechanismModel& model = kin.model();
  VecX e(model.constraint_rows());
  for (const auto& loop : model.loops()) loop_rows(kin, loop, &e, nullptr, nullptr);
  return e;
}

VecX closure_error(const MechanismModel& model, const GeneralizedState& state) {
  return closure_error(Kinematics(model, state));
}

ClosureSystem constraint_jacobian(const Kinematics& kin, const ClosureOptions& options) {
  const MechanismModel& model = kin.model();
  ClosureSystem cs;
  cs.passive = model.passive_count();
  cs.actuated = model.actuated_count();
  cs.base_offset = model.base_offset();
  cs.threshold = options.singular_threshold;
  const int rows = model.constraint_rows();
  cs.error.resize(rows);
  cs.jacobian.resize(rows, model.velocity_size());
  cs.bias.resize(rows);
  for (const auto& loop : model.loops()) loop_rows(kin, loop, &cs.error, &cs.jacobian, &cs.bias);
  cs.passive_block = cs.jacobian.middleCols(cs.base_offset, cs.passive);
  cs.actuated_block = cs.jacobian.middleCols(cs.base_offset + cs.passive, cs.actuated);

  if (rows != cs.passive) {
    cs.singular = true;
    cs.sigma_min = 0.0;
    return cs;
  }
  if (rows == 0) {
    cs.singular = false;
    cs.sigma_min = std::numeric_limits<double>::infinity();
    cs.mapping = MatX::Zero(0, cs.actuated);
    return cs;
  }
  const WeakestDirection weakest = weakest_direction(cs.passive_block);
  cs.sigma_min = weakest.sigma_min;
  cs.singular = !(cs.sigma_min >= options.singular_threshold);
  if (cs.singular) {
    cs.weakest_loop = loop_of_row(model, weakest.row).name;
    return cs;
  }
  cs.lu.compute(cs.passive_block);
  cs.mapping = -cs.lu.solve(cs.actuated_block);
  return cs;
}

ClosureSystem constraint_jacobian(const MechanismModel& model, const GeneralizedState& state,
                                  const ClosureOptions& options) {
  return constraint_jacobian(Kinematics(model, state), options);
}

const MatX& mapping_jacobian(const ClosureSystem& closure) {
  closure.require_regular();
  return closure.mapping;
}

VecX dfk(const ClosureSystem& closure, const VecX& actuated_velocity) {
  if (actuated_velocity.size() != closure.actuated) {
    throw Error(ErrorCode::kDimensionMismatch, "actuated velocity has wrong size");
  }
  return mapping_jacobian(closure) * actuated_velocity;
}

VecX passive_accelerations(const ClosureSystem& closure, const VecX& actuated_acceleration) {
  if (actuated_acceleration.size() != closure.actuated) {
    throw Error(ErrorCode::kDimensionMismatch, "actuated acceleration has wrong size");
  }
  return mapping_jacobian(closure) * actuated_acceleration - closure.solve_passive(closure.bias);
}

VecX forward_torque_map(const ClosureSystem& closure, const VecX& passive_torque) {
  if (passive_torque.size() != closure.passive) {
    throw Error(ErrorCode::kDimensionMismatch, "passive torque has wrong size");
  }
  return mapping_jacobian(closure).transpose() * passive_torque;
}

namespace {

Eigen::PartialPivLU<MatX> selected_map(const ClosureSystem& closure, const std::vector<int>& selection) {
  const MatX& jm = mapping_jacobian(closure);
  if (static_cast<int>(selection.size()) != closure.actuated) {
    throw Error(ErrorCode::kDimensionMismatch, "selection must pick one passive DOF per actuator");
  }
  MatX pjm(selection.size(), closure.actuated);
  for (std::size_t i = 0; i < selection.size(); ++i) {
    if (selection[i] < 0 || selection[i] >= closure.passive) {
      throw Error(ErrorCode::kInvalidArgument, "selection index out of range");
    }
    pjm.row(i) = jm.row(selection[i]);
  }
  if (pjm.size() > 0) {
    Eigen::JacobiSVD<MatX> svd(pjm);
    const double smin = svd.singularValues()[svd.singularValues().size() - 1];
    if (!(smin >= closure.threshold)) {
      throw Error(ErrorCode::kSingularTaskMap,
                  "selected task map is singular (sigma_min=" + std::to_string(smin) + ")");
    }
  }
  return Eigen::PartialPivLU<MatX>(pjm);
}

}  // namespace

VecX dik(const ClosureSystem& closure, const std::vector<int>& selection, const VecX& selected_velocity) {
  auto lu = selected_map(closure, selection);
  if (selected_velocity.size() != closure.actuated) {
    throw Error(ErrorCode::kDimensionMismatch, "selected velocity has wrong size");
  }
  if (closure.actuated == 0) return VecX::Zero(0);
  return lu.solve(selected_velocity);
}

VecX inverse_torque_map(const ClosureSystem& closure, const std::vector<int>& selection,
                        const VecX& actuated_torque) {
  auto lu = selected_map(closure, selection);
  if (actuated_torque.size() != closure.actuated) {
    throw Error(ErrorCode::kDimensionMismatch, "actuated torque has wrong size");
  }
  if (closure.actuated == 0) return VecX::Zero(0);
  return lu.transpose().solve(actuated_torque);
}

ClosedChainDynamics closed_chain_inverse_dynamics(const MechanismModel& model,
                                                  const GeneralizedState& state,
                                                  const VecX& acceleration,
                                                  const ClosureOptions& options) {
  if (model.floating_base()) {
    throw Error(ErrorCode::kInvalidArgument, "closed-chain inverse dynamics needs a fixed base");
  }
  if (acceleration.size() != model.dof_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "acceleration has wrong size");
  }
  const Kinematics kin(model, state);
  const ClosureSystem cs = constraint_jacobian(kin, options);
  cs.require_regular();
  const double inconsistency = (cs.jacobian * acceleration + cs.bias).norm();
  if (inconsistency > 1e-6) {
    throw Error(ErrorCode::kClosureInconsistent,
                "acceleration violates closure by " + std::to_string(inconsistency));
  }
  const VecX full = joint_space_inertia(kin) * acceleration + nonlinear_terms(kin);
  const int m = cs.passive;
  ClosedChainDynamics out;
  out.multipliers = cs.solve_passive_transpose(full.head(m));
  out.torque = full.tail(cs.actuated) - cs.actuated_block.transpose() * out.multipliers;
  return out;
}

AssumptionReport validate_assumptions(const MechanismModel& model,
                                      const std::vector<GeneralizedState>& samples,
                                      const ClosureOptions& options) {
  AssumptionReport report;
  report.dofs = model.dof_count();
  report.passive = model.passive_count();
  report.actuated = model.actuated_count();
  report.constraint_rows = model.constraint_rows();
  report.rows_match_passive = report.constraint_rows == report.passive;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Kinematics kin(model, samples[i]);
    const ClosureSystem cs = constraint_jacobian(kin, options);
    int rank = 0;
    double smin = std::numeric_limits<double>::infinity();
    if (cs.passive_block.size() > 0) {
      Eigen::JacobiSVD<MatX> svd(cs.passive_block);
      const VecX& s = svd.singularValues();
      for (int k = 0; k < s.size(); ++k) rank += s[k] >= options.singular_threshold ? 1 : 0;
      smin = std::min(cs.passive_block.rows(), cs.passive_block.cols()) > 0 ? s[s.size() - 1] : 0.0;
      if (cs.passive_block.rows() != cs.passive_block.cols()) smin = 0.0;
    }
    report.rank.push_back(rank);
    report.sigma_min.push_back(smin);
    if (rank < report.passive || rank < report.constraint_rows) {
      report.full_rank = false;
      report.near_singular.push_back(static_cast<int>(i));
    }
  }
  return report;
}

GeneralizedState solve_closure(const MechanismModel& model, const GeneralizedState& state,
                               const ClosureSolveOptions& options) {
  GeneralizedState s = state;
  if (model.constraint_rows() == 0) return s;
  double last = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= options.max_iterations; ++it) {
    const ClosureSystem cs = constraint_jacobian(model, s);
    const double norm = cs.error.norm();
    if (norm <= options.tolerance) return s;
    // Stagnation at round-off level counts as converged.
    if (it > 0 && norm >= last && norm < 1e3 * options.tolerance) return s;
    if (it == options.max_iterations) break;
    last = norm;
    s.theta.head(cs.passive) -= cs.solve_passive(cs.error);
  }
  throw Error(ErrorCode::kMaxIterations, "closure projection did not converge");
}

GeneralizedState pose_by_selection(const MechanismModel& model, const GeneralizedState& state,
                                   const VecX& selected_values, const ClosureSolveOptions& options) {
  const std::vector<int>& sel = model.selection();
  const int n = model.dof_count();
  if (selected_values.size() != static_cast<int>(sel.size())) {
    throw Error(ErrorCode::kDimensionMismatch, "one value per selected coordinate expected");
  }
  if (model.constraint_rows() + static_cast<int>(sel.size()) != n) {
    throw Error(ErrorCode::kSingularTaskMap, "closure rows plus selection do not form a square system");
  }
  GeneralizedState s = state;
  double last = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= options.max_iterations; ++it) {
    const ClosureSystem cs = constraint_jacobian(model, s);
    VecX residual(n);
    MatX jac = MatX::Zero(n, n);
    residual.head(cs.error.size()) = cs.error;
    jac.topRows(cs.error.size()) = cs.jacobian.rightCols(n);
    for (size_t k = 0; k < sel.size(); ++k) {
      residual[cs.error.size() + k] = s.theta[sel[k]] - selected_values[k];
      jac(cs.error.size() + k, sel[k]) = 1.0;
    }
    const double norm = residual.norm();
    if (norm <= options.tolerance) return s;
    if (it > 0 && norm >= last && norm < 1e3 * options.tolerance) return s;
    if (it == options.max_iterations) break;
    last = norm;
    Eigen::FullPivLU<MatX> lu(jac);
    if (!lu.isInvertible()) throw Error(ErrorCode::kSingularTaskMap, "selection does not determine the pose");
    s.theta -= lu.solve(residual);
  }
  throw Error(ErrorCode::kMaxIterations, "pose by selection did not converge");
}

GeneralizedState with_consistent_velocity(const MechanismModel& model, const GeneralizedState& state,
                                          const VecX& actuated_velocity) {
  GeneralizedState s = state;
  s.theta_dot.tail(model.actuated_count()) = actuated_velocity;
  s.theta_dot.head(model.passive_count()).setZero();
  const ClosureSystem cs = constraint_jacobian(model, s);
  const VecX nu = s.velocity(model);
  s.theta_dot.head(cs.passive) = -cs.solve_passive(cs.jacobian * nu);
  return s;
}

}  // namespace closedlink
