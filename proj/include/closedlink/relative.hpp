#pragma once

#include "closedlink/common.hpp"
#include "closedlink/spatial.hpp"

namespace closedlink {

/// Motion of frame b relative to frame a, expressed in frame a.
struct RelativeKinematics {
  Mat3 rotation = Mat3::Identity();  // a <- b
  Vec3 position = Vec3::Zero();      // origin of b seen from a
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  Mat6X jacobian;  // [linear; angular], one column per generalized velocity
  Vec6 acceleration_bias = Vec6::Zero();

  Vec6 velocity() const {
    Vec6 v;
    v << linear_velocity, angular_velocity;
    return v;
  }
};

/// (linear; angular) velocity of b relative to a, in frame a.
Vec6 relative_velocity(const Kinematics& kin, const FrameRef& a, const FrameRef& b);

/// Relative Jacobian: relative_jacobian(kin, a, b) * nu == relative_velocity(kin, a, b).
Mat6X relative_jacobian(const Kinematics& kin, const FrameRef& a, const FrameRef& b);

/// Relative acceleration at zero generalized acceleration, in frame a.
Vec6 relative_acceleration_bias(const Kinematics& kin, const FrameRef& a, const FrameRef& b);

/// All of the above from one set of world quantities.
RelativeKinematics relative_kinematics(const Kinematics& kin, const FrameRef& a, const FrameRef& b);

}  // namespace closedlink
