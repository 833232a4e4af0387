#pragma once

#include <vector>

#include "closedlink/closure.hpp"
#include "closedlink/model.hpp"
#include "closedlink/qp.hpp"
#include "closedlink/spatial.hpp"
#include "closedlink/state.hpp"

namespace closedlink {

/// Full constrained equations of motion at one state. Rows and columns split
/// into base (b), passive (u) and actuated (a) blocks; b is empty for fixed-base models.
struct DynamicsComponents {
  int base = 0;
  int passive = 0;
  int actuated = 0;
  MatX mass;                           // M
  VecX nonlinear;                      // h
  std::vector<ContactPoint> contacts;
  MatX contact_jacobian;               // J_c, 3 rows per contact
  VecX contact_bias;                   // J_c_dot * nu
  std::vector<Mat3> contact_frames;    // world columns (tangent 1, tangent 2, normal)
  ClosureSystem closure;

  int velocity_size() const { return base + passive + actuated; }
  // Row blocks of M and h.
  MatX mass_base() const { return mass.topRows(base); }
  MatX mass_passive() const { return mass.middleRows(base, passive); }
  MatX mass_actuated() const { return mass.bottomRows(actuated); }
  VecX nonlinear_base() const { return nonlinear.head(base); }
  VecX nonlinear_passive() const { return nonlinear.segment(base, passive); }
  VecX nonlinear_actuated() const { return nonlinear.tail(actuated); }
  // Column blocks of J_c.
  MatX contact_base() const { return contact_jacobian.leftCols(base); }
  MatX contact_passive() const { return contact_jacobian.middleCols(base, passive); }
  MatX contact_actuated() const { return contact_jacobian.rightCols(actuated); }
};

/// Uses the model's contacts.
DynamicsComponents assemble(const MechanismModel& model, const GeneralizedState& state);
DynamicsComponents assemble(const MechanismModel& model, const GeneralizedState& state,
                            const std::vector<ContactPoint>& contacts);

/// Acceleration-level task J_t nu_dot + J_t_dot nu = a_d plus regularization weights.
struct TaskSpec {
  MatX jacobian;
  VecX bias;
  VecX desired;
  double epsilon = 1e-6;  // weight on ||nu_dot||^2
  double gamma = 1e-12;   // weight on ||F||^2
  int cone_edges = 4;     // friction pyramid faces
};

/// Task on a named frame (link or frame) with a desired [linear; angular] acceleration.
TaskSpec frame_task(const MechanismModel& model, const GeneralizedState& state, const std::string& frame,
                    const Vec6& desired);
/// Task on the floating-base link.
TaskSpec base_task(const MechanismModel& model, const GeneralizedState& state, const Vec6& desired);

/// Rows G with G F <= 0 for one contact: |F.t_k| <= mu F.n on every face, F.n >= 0.
MatX friction_cone(const Mat3& frame, double mu, int edges);

struct AccelerationAndForces {
  VecX acceleration;  // nu_dot (full) for the full QP, [base; actuated] for the projected QP
  VecX forces;
  QpSolution qp;
};

/// Step 1: accelerations and contact forces from the task QP.
AccelerationAndForces qp_inverse_dynamics(const DynamicsComponents& components, const TaskSpec& task,
                                          const QpOptions& options = {});
/// Step 2: lambda = J_lu^{-T} (M_u nu_dot + h_u - J_cu^T F).
VecX lagrange_multipliers(const DynamicsComponents& components, const VecX& acceleration, const VecX& forces);
/// Step 3: tau = M_a nu_dot + h_a - J_ca^T F - J_la^T lambda.
VecX actuated_torques(const DynamicsComponents& components, const VecX& acceleration, const VecX& forces,
                      const VecX& multipliers);

/// Dynamics rewritten in q_a = (base, actuated) accelerations.
struct ProjectedDynamics {
  DynamicsComponents full;
  int reduced = 0;            // base + actuated
  MatX lift;                  // nu_dot = lift * nu_dot_a + lift_offset
  VecX lift_offset;
  MatX mass_base, mass_passive, mass_actuated;  // M_{b,m}, M_{u,m}, M_{a,m}
  VecX nonlinear_base, nonlinear_passive, nonlinear_actuated;
  MatX mass_joint;            // M_{j,m}
  VecX nonlinear_joint;       // h_{j,m}
  MatX contact_jacobian;      // J_c * lift
  VecX contact_bias;          // J_c_dot nu + J_c * lift_offset
  MatX contact_joint;         // J_{c,m,j} = J_ca + J_cu J_m

  VecX lifted(const VecX& reduced_acceleration) const;
  /// J_{t,m} and J_{t,m}_dot nu of a full task.
  MatX task_jacobian(const TaskSpec& task) const;
  VecX task_bias(const TaskSpec& task) const;
};

ProjectedDynamics project(const DynamicsComponents& components);

/// Step 1 on the projected dynamics; `acceleration` holds (base, actuated) accelerations.
AccelerationAndForces projected_qp_inverse_dynamics(const ProjectedDynamics& projected, const TaskSpec& task,
                                                    const QpOptions& options = {});
VecX projected_lagrange_multipliers(const ProjectedDynamics& projected, const VecX& reduced_acceleration,
                                    const VecX& forces);
VecX projected_actuated_torques(const ProjectedDynamics& projected, const VecX& reduced_acceleration,
                                const VecX& forces, const VecX& multipliers);

struct InverseDynamicsResult {
  VecX acceleration;  // full nu_dot
  VecX forces;
  VecX multipliers;
  VecX torques;
  QpSolution qp;
};

/// All three steps on the full dynamics.
InverseDynamicsResult inverse_dynamics(const DynamicsComponents& components, const TaskSpec& task,
                                       const QpOptions& options = {});
/// All three steps on the projected dynamics.
InverseDynamicsResult projected_inverse_dynamics(const ProjectedDynamics& projected, const TaskSpec& task,
                                                 const QpOptions& options = {});

}  // namespace closedlink
