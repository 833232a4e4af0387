#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "closedlink/common.hpp"
#include "closedlink/model.hpp"
#include "closedlink/spatial.hpp"
#include "closedlink/state.hpp"

namespace closedlink {

struct ClosureOptions {
  /// J_lu counts as singular when its smallest singular value falls below this.
  double singular_threshold = 1e-8;
};

/// Stacked loop-closure quantities at one state. Rows follow loop declaration
/// order; inside a loop x, y, z come before rx, ry, rz.
struct ClosureSystem {
  int passive = 0;      // m
  int actuated = 0;     // n - m
  int base_offset = 0;  // 6 for floating models
  VecX error;           // e_l
  MatX jacobian;        // J_l, one column per generalized velocity
  MatX passive_block;   // J_lu
  MatX actuated_block;  // J_la
  VecX bias;            // J_l_dot * nu
  double sigma_min = 0.0;
  std::string weakest_loop;  // loop owning the row most involved in sigma_min
  bool singular = true;
  double threshold = 1e-8;
  Eigen::PartialPivLU<MatX> lu;  // of J_lu, valid when !singular
  MatX mapping;                  // J_m, valid when !singular

  /// Throws SingularLinkage when J_lu is below threshold.
  void require_regular() const;
  /// J_lu^{-1} rhs.
  VecX solve_passive(const VecX& rhs) const;
  /// J_lu^{-T} rhs.
  VecX solve_passive_transpose(const VecX& rhs) const;
};

VecX closure_error(const MechanismModel& model, const GeneralizedState& state);
VecX closure_error(const Kinematics& kin);

ClosureSystem constraint_jacobian(const Kinematics& kin, const ClosureOptions& options = {});
ClosureSystem constraint_jacobian(const MechanismModel& model, const GeneralizedState& state,
                                  const ClosureOptions& options = {});

/// J_m = -J_lu^{-1} J_la. Throws SingularLinkage.
const MatX& mapping_jacobian(const ClosureSystem& closure);

/// Passive velocities implied by actuated velocities.
VecX dfk(const ClosureSystem& closure, const VecX& actuated_velocity);

/// Passive accelerations that keep J_l theta_ddot + J_l_dot theta_dot = 0.
VecX passive_accelerations(const ClosureSystem& closure, const VecX& actuated_acceleration);

/// tau_a = J_m^T tau_u.
VecX forward_torque_map(const ClosureSystem& closure, const VecX& passive_torque);

/// Actuated velocities producing the selected passive velocities. Throws SingularTaskMap.
VecX dik(const ClosureSystem& closure, const std::vector<int>& selection, const VecX& selected_velocity);

/// Torques on the selected passive DOFs equivalent to the actuated torques. Throws SingularTaskMap.
VecX inverse_torque_map(const ClosureSystem& closure, const std::vector<int>& selection,
                        const VecX& actuated_torque);

struct ClosedChainDynamics {
  VecX torque;       // actuated
  VecX multipliers;  // lambda
};

/// Fixed-base inverse dynamics of the closed chain at a closure-consistent acceleration.
ClosedChainDynamics closed_chain_inverse_dynamics(const MechanismModel& model,
                                                  const GeneralizedState& state,
                                                  const VecX& acceleration,
                                                  const ClosureOptions& options = {});

struct AssumptionReport {
  int dofs = 0;
  int passive = 0;
  int actuated = 0;
  int constraint_rows = 0;
  bool rows_match_passive = false;  // one constraint row per passive DOF
  bool full_rank = true;            // J_lu full rank at every sample
  std::vector<int> rank;            // rank of J_lu per sample
  std::vector<double> sigma_min;    // per sample
  std::vector<int> near_singular;   // sample indices
  bool passed() const { return rows_match_passive && full_rank; }
};

AssumptionReport validate_assumptions(const MechanismModel& model,
                                      const std::vector<GeneralizedState>& samples,
                                      const ClosureOptions& options = {});

struct ClosureSolveOptions {
  double tolerance = 1e-12;
  int max_iterations = 50;
};

/// Newton projection of the passive coordinates onto the closure manifold with
/// the actuated coordinates held fixed. Throws SingularLinkage or MaxIterations.
GeneralizedState solve_closure(const MechanismModel& model, const GeneralizedState& state,
                               const ClosureSolveOptions& options = {});

/// Closure-consistent configuration whose selected passive coordinates take
/// the given values; all other coordinates move. Needs a square, regular
/// [J_l; selection] system. Throws SingularTaskMap or MaxIterations.
GeneralizedState pose_by_selection(const MechanismModel& model, const GeneralizedState& state,
                                   const VecX& selected_values, const ClosureSolveOptions& options = {});

/// Lifts actuated velocities to a closure-consistent theta_dot (base velocity kept).
GeneralizedState with_consistent_velocity(const MechanismModel& model, const GeneralizedState& state,
                                          const VecX& actuated_velocity);

}  // namespace closedlink
