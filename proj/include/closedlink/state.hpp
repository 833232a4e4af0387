#pragma once

#include <Eigen/Geometry>

#include "closedlink/common.hpp"
#include "closedlink/model.hpp"

namespace closedlink {

/// Configuration q = (p, rho, theta) and velocity nu = (p_dot, omega, theta_dot).
/// Base quantities are ignored for fixed-base models. The base angular
/// velocity is expressed in the world frame.
struct GeneralizedState {
  Vec3 base_position = Vec3::Zero();
  Eigen::Quaterniond base_orientation = Eigen::Quaterniond::Identity();
  Vec3 base_linear_velocity = Vec3::Zero();
  Vec3 base_angular_velocity = Vec3::Zero();
  VecX theta;
  VecX theta_dot;

  static GeneralizedState zero(const MechanismModel& model);

  VecX velocity(const MechanismModel& model) const;
  void set_velocity(const MechanismModel& model, const VecX& nu);

  auto passive(const MechanismModel& model) const { return theta.head(model.passive_count()); }
  auto actuated(const MechanismModel& model) const { return theta.tail(model.actuated_count()); }
};

/// Throws DimensionMismatch / InvalidArgument when the state does not fit the model.
void check_state(const MechanismModel& model, const GeneralizedState& state);

/// Explicit Euler step of the configuration along nu; the base orientation is
/// advanced with the exponential map of the world angular velocity.
GeneralizedState integrate(const MechanismModel& model, const GeneralizedState& state,
                           const VecX& nu, double dt);

}  // namespace closedlink
