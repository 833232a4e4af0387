#pragma once

#include <map>
#include <string>
#include <vector>

#include "closedlink/common.hpp"
#include "closedlink/model.hpp"
#include "closedlink/state.hpp"

namespace closedlink {

struct FramePose {
  Mat3 rotation = Mat3::Identity();  // world <- frame
  Vec3 position = Vec3::Zero();
};

/// World-frame quantities of one link after a forward pass.
struct LinkState {
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  Vec3 linear_velocity = Vec3::Zero();  // of the link origin
  /// Accelerations produced by the current velocity at zero generalized acceleration.
  Vec3 angular_bias = Vec3::Zero();
  Vec3 linear_bias = Vec3::Zero();
};

/// One forward sweep over the tree: poses, velocities and acceleration biases
/// of every link. Everything downstream reads from this cache.
class Kinematics {
 public:
  Kinematics(const MechanismModel& model, const GeneralizedState& state);

  const MechanismModel& model() const { return *model_; }
  const GeneralizedState& state() const { return state_; }
  const LinkState& link(int index) const { return links_[index]; }
  /// World axis and origin of a (non-floating) joint.
  const Vec3& joint_axis(int joint) const { return joint_axis_[joint]; }
  const Vec3& joint_origin(int joint) const { return joint_origin_[joint]; }

  FramePose pose(const FrameRef& frame) const;
  /// [linear; angular] world velocity of the frame origin.
  Vec6 velocity(const FrameRef& frame) const;
  /// [linear; angular] acceleration bias J_dot * nu of the frame origin.
  Vec6 acceleration_bias(const FrameRef& frame) const;
  /// 6 x nv world Jacobian [linear; angular] of the frame origin.
  Mat6X jacobian(const FrameRef& frame) const;
  /// 3 x nv linear Jacobian of a world point rigidly attached to a link.
  Mat3X point_jacobian(int link, const Vec3& world_point) const;
  Vec3 point_acceleration_bias(int link, const Vec3& world_point) const;

 private:
  const MechanismModel* model_;
  GeneralizedState state_;
  std::vector<LinkState> links_;
  std::vector<Vec3> joint_axis_;
  std::vector<Vec3> joint_origin_;
};

/// Poses of every link and named frame.
std::map<std::string, FramePose> forward_kinematics(const MechanismModel& model,
                                                    const GeneralizedState& state);

Mat6X frame_jacobian(const MechanismModel& model, const GeneralizedState& state,
                     const std::string& frame);
Vec6 frame_acceleration_bias(const MechanismModel& model, const GeneralizedState& state,
                             const std::string& frame);

/// Joint-space inertia by composite rigid bodies.
MatX joint_space_inertia(const Kinematics& kin);
MatX joint_space_inertia(const MechanismModel& model, const GeneralizedState& state);

/// Coriolis, centrifugal and gravity terms by a Newton-Euler sweep.
VecX nonlinear_terms(const Kinematics& kin);
VecX nonlinear_terms(const MechanismModel& model, const GeneralizedState& state);

VecX gravity_terms(const Kinematics& kin);
VecX gravity_terms(const MechanismModel& model, const GeneralizedState& state);

}  // namespace closedlink
