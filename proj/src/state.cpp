#include "closedlink/state.hpp"

#include <cmath>

#include "closedlink/errors.hpp"

namespace closedlink {

GeneralizedState GeneralizedState::zero(const MechanismModel& model) {
  GeneralizedState s;
  s.theta = VecX::Zero(model.dof_count());
  s.theta_dot = VecX::Zero(model.dof_count());
  return s;
}

VecX GeneralizedState::velocity(const MechanismModel& model) const {
  VecX nu(model.velocity_size());
  if (model.floating_base()) nu << base_linear_velocity, base_angular_velocity, theta_dot;
  else nu = theta_dot;
  return nu;
}

void GeneralizedState::set_velocity(const MechanismModel& model, const VecX& nu) {
  if (nu.size() != model.velocity_size()) {
    throw Error(ErrorCode::kDimensionMismatch, "velocity vector has wrong size");
  }
  if (model.floating_base()) {
    base_linear_velocity = nu.head<3>();
    base_angular_velocity = nu.segment<3>(3);
  }
  theta_dot = nu.tail(model.dof_count());
}

void check_state(const MechanismModel& model, const GeneralizedState& state) {
  if (state.theta.size() != model.dof_count() || state.theta_dot.size() != model.dof_count()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "state has " + std::to_string(state.theta.size()) + " DOFs, model has " +
                    std::to_string(model.dof_count()));
  }
  if (model.floating_base() && std::abs(state.base_orientation.norm() - 1.0) > 1e-10) {
    throw Error(ErrorCode::kInvalidArgument, "base orientation quaternion is not unit");
  }
}

GeneralizedState integrate(const MechanismModel& model, const GeneralizedState& state,
                           const VecX& nu, double dt) {
  if (nu.size() != model.velocity_size()) {
    throw Error(ErrorCode::kDimensionMismatch, "velocity vector has wrong size");
  }
  GeneralizedState next = state;
  if (model.floating_base()) {
    next.base_position += dt * nu.head<3>();
    const Vec3 rot = dt * nu.segment<3>(3);
    const double angle = rot.norm();
    if (angle > 0.0) {
      next.base_orientation =
          (Eigen::Quaterniond(Eigen::AngleAxisd(angle, rot / angle)) * state.base_orientation)
              .normalized();
    }
  }
  next.theta += dt * nu.tail(model.dof_count());
  return next;
}

}  // namespace closedlink
