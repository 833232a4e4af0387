#include "closedlink/spatial.hpp"

#include "closedlink/errors.hpp"

namespace closedlink {

Kinematics::Kinematics(const MechanismModel& model, const GeneralizedState& state)
    : model_(&model), state_(state) {
  check_state(model, state);
  const auto& links = model.links();
  const auto& joints = model.joints();
  links_.resize(links.size());
  joint_axis_.assign(joints.size(), Vec3::Zero());
  joint_origin_.assign(joints.size(), Vec3::Zero());

  for (int li : model.link_order()) {
    LinkState& ls = links_[li];
    const int ji = links[li].parent_joint;
    if (ji < 0) {
      if (model.floating_base()) {
        ls.rotation = state.base_orientation.toRotationMatrix();
        ls.position = state.base_position;
        ls.angular_velocity = state.base_angular_velocity;
        ls.linear_velocity = state.base_linear_velocity;
      }
      continue;
    }
    const Joint& j = joints[ji];
    const LinkState& ps = links_[j.parent];
    const double q = state.theta[j.dof];
    const double qd = state.theta_dot[j.dof];
    const Mat3 joint_rot = ps.rotation * j.origin.rotation;
    const Vec3 origin = ps.position + ps.rotation * j.origin.translation;
    const Vec3 z = joint_rot * j.axis;
    joint_axis_[ji] = z;
    joint_origin_[ji] = origin;

    const Vec3& w = ps.angular_velocity;
    if (j.type == JointType::kRevolute) {
      ls.rotation = joint_rot * Eigen::AngleAxisd(q, j.axis).toRotationMatrix();
      ls.position = origin;
    } else {
      ls.rotation = joint_rot;
      ls.position = origin + z * q;
    }
    const Vec3 r = ls.position - ps.position;
    ls.angular_velocity = w;
    ls.linear_velocity = ps.linear_velocity + w.cross(r);
    ls.angular_bias = ps.angular_bias;
    ls.linear_bias = ps.linear_bias + ps.angular_bias.cross(r) + w.cross(w.cross(r));
    if (j.type == JointType::kRevolute) {
      ls.angular_velocity += z * qd;
      ls.angular_bias += w.cross(z * qd);
    } else {
      ls.linear_velocity += z * qd;
      ls.linear_bias += 2.0 * w.cross(z * qd);
    }
  }
}

FramePose Kinematics::pose(const FrameRef& frame) const {
  const LinkState& ls = links_[frame.link];
  return {ls.rotation * frame.offset.rotation, ls.position + ls.rotation * frame.offset.translation};
}

Vec6 Kinematics::velocity(const FrameRef& frame) const {
  const LinkState& ls = links_[frame.link];
  const Vec3 r = ls.rotation * frame.offset.translation;
  Vec6 v;
  v << ls.linear_velocity + ls.angular_velocity.cross(r), ls.angular_velocity;
  return v;
}

Vec6 Kinematics::acceleration_bias(const FrameRef& frame) const {
  const LinkState& ls = links_[frame.link];
  const Vec3 r = ls.rotation * frame.offset.translation;
  Vec6 a;
  a << point_acceleration_bias(frame.link, ls.position + r), ls.angular_bias;
  return a;
}

Vec3 Kinematics::point_acceleration_bias(int link, const Vec3& world_point) const {
  const LinkState& ls = links_[link];
  const Vec3 r = world_point - ls.position;
  const Vec3& w = ls.angular_velocity;
  return ls.linear_bias + ls.angular_bias.cross(r) + w.cross(w.cross(r));
}

Mat6X Kinematics::jacobian(const FrameRef& frame) const {
  const MechanismModel& m = *model_;
  const Vec3 x = pose(frame).position;
  Mat6X jac = Mat6X::Zero(6, m.velocity_size());
  const int off = m.base_offset();
  int li = frame.link;
  while (m.links()[li].parent_joint >= 0) {
    const int ji = m.links()[li].parent_joint;
    const Joint& j = m.joints()[ji];
    const Vec3& z = joint_axis_[ji];
    auto col = jac.col(off + j.dof);
    if (j.type == JointType::kRevolute) {
      col << z.cross(x - joint_origin_[ji]), z;
    } else {
      col.head<3>() = z;
    }
    li = j.parent;
  }
  if (m.floating_base()) {
    jac.block<3, 3>(0, 0).setIdentity();
    jac.block<3, 3>(0, 3) = -skew(x - state_.base_position);
    jac.block<3, 3>(3, 3).setIdentity();
  }
  return jac;
}

Mat3X Kinematics::point_jacobian(int link, const Vec3& world_point) const {
  FrameRef ref{link, Transform{Mat3::Identity(),
                               links_[link].rotation.transpose() * (world_point - links_[link].position)}};
  return jacobian(ref).topRows<3>();
}

std::map<std::string, FramePose> forward_kinematics(const MechanismModel& model,
                                                    const GeneralizedState& state) {
  Kinematics kin(model, state);
  std::map<std::string, FramePose> poses;
  for (const auto& name : model.frame_names()) poses[name] = kin.pose(model.frame(name));
  return poses;
}

Mat6X frame_jacobian(const MechanismModel& model, const GeneralizedState& state,
                     const std::string& frame) {
  const FrameRef ref = model.frame(frame);
  return Kinematics(model, state).jacobian(ref);
}

Vec6 frame_acceleration_bias(const MechanismModel& model, const GeneralizedState& state,
                             const std::string& frame) {
  const FrameRef ref = model.frame(frame);
  return Kinematics(model, state).acceleration_bias(ref);
}

namespace {

// Spatial quantities below use world Plucker coordinates at the world origin,
// ordered (angular; linear).

Mat6 link_spatial_inertia(const Link& link, const LinkState& ls) {
  const Vec3 c = ls.position + ls.rotation * link.com;
  const Mat3 ic = ls.rotation * link.inertia * ls.rotation.transpose();
  const Mat3 cx = skew(c);
  Mat6 out;
  out << ic - link.mass * cx * cx, link.mass * cx, -link.mass * cx, link.mass * Mat3::Identity();
  return out;
}

// Motion subspace column of one generalized velocity component.
Vec6 dof_motion(const Kinematics& kin, int joint) {
  const Joint& j = kin.model().joints()[joint];
  const Vec3& z = kin.joint_axis(joint);
  Vec6 s;
  if (j.type == JointType::kRevolute) s << z, kin.joint_origin(joint).cross(z);
  else s << Vec3::Zero(), z;
  return s;
}

Vec6 base_motion(const Vec3& base_position, int k) {
  Vec6 s = Vec6::Zero();
  if (k < 3) {
    s[3 + k] = 1.0;
  } else {
    const Vec3 e = Vec3::Unit(k - 3);
    s << e, base_position.cross(e);
  }
  return s;
}

// Projects subtree wrenches (moment about origin; force) onto generalized coordinates.
VecX project_wrenches(const Kinematics& kin, const std::vector<Vec6>& subtree) {
  const MechanismModel& m = kin.model();
  VecX out = VecX::Zero(m.velocity_size());
  for (int ji = 0; ji < static_cast<int>(m.joints().size()); ++ji) {
    const Joint& j = m.joints()[ji];
    if (j.dof < 0) continue;
    out[m.base_offset() + j.dof] = dof_motion(kin, ji).dot(subtree[j.child]);
  }
  if (m.floating_base()) {
    const Vec3& pb = kin.link(m.root_link()).position;
    for (int k = 0; k < 6; ++k) out[k] = base_motion(pb, k).dot(subtree[m.root_link()]);
  }
  return out;
}

std::vector<Vec6> accumulate_subtrees(const MechanismModel& m, std::vector<Vec6> per_link) {
  const auto& order = m.link_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int ji = m.links()[*it].parent_joint;
    if (ji >= 0) per_link[m.joints()[ji].parent] += per_link[*it];
  }
  return per_link;
}

}  // namespace

MatX joint_space_inertia(const Kinematics& kin) {
  const MechanismModel& m = kin.model();
  const int nv = m.velocity_size();
  const int off = m.base_offset();
  const auto& order = m.link_order();

  std::vector<Mat6> composite(m.links().size());
  for (int li : order) composite[li] = link_spatial_inertia(m.links()[li], kin.link(li));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int ji = m.links()[*it].parent_joint;
    if (ji >= 0) composite[m.joints()[ji].parent] += composite[*it];
  }

  Mat6X base(6, m.floating_base() ? 6 : 0);
  if (m.floating_base()) {
    const Vec3& pb = kin.link(m.root_link()).position;
    for (int k = 0; k < 6; ++k) base.col(k) = base_motion(pb, k);
  }

  MatX mass = MatX::Zero(nv, nv);
  for (int ji = 0; ji < static_cast<int>(m.joints().size()); ++ji) {
    const Joint& j = m.joints()[ji];
    if (j.dof < 0) continue;
    const int i = off + j.dof;
    const Vec6 force = composite[j.child] * dof_motion(kin, ji);
    // Walk to the root; every ancestor DOF (including this one) couples.
    int li = j.child;
    while (m.links()[li].parent_joint >= 0) {
      const int ai = m.links()[li].parent_joint;
      const int col = off + m.joints()[ai].dof;
      const double value = dof_motion(kin, ai).dot(force);
      mass(col, i) = value;
      mass(i, col) = value;
      li = m.joints()[ai].parent;
    }
    if (m.floating_base()) {
      const VecX coupling = base.transpose() * force;
      mass.block(0, i, 6, 1) = coupling;
      mass.block(i, 0, 1, 6) = coupling.transpose();
    }
  }
  if (m.floating_base()) {
    mass.topLeftCorner<6, 6>() = base.transpose() * composite[m.root_link()] * base;
  }
  return mass;
}

MatX joint_space_inertia(const MechanismModel& model, const GeneralizedState& state) {
  return joint_space_inertia(Kinematics(model, state));
}

VecX nonlinear_terms(const Kinematics& kin) {
  const MechanismModel& m = kin.model();
  const Vec3& g = m.gravity();
  std::vector<Vec6> wrench(m.links().size(), Vec6::Zero());
  for (int li : m.link_order()) {
    const Link& link = m.links()[li];
    const LinkState& ls = kin.link(li);
    const Vec3 c = ls.position + ls.rotation * link.com;
    const Mat3 ic = ls.rotation * link.inertia * ls.rotation.transpose();
    const Vec3& w = ls.angular_velocity;
    const Vec3 f = link.mass * (kin.point_acceleration_bias(li, c) - g);
    const Vec3 n = ic * ls.angular_bias + w.cross(ic * w);
    wrench[li] << n + c.cross(f), f;
  }
  return project_wrenches(kin, accumulate_subtrees(m, std::move(wrench)));
}

VecX nonlinear_terms(const MechanismModel& model, const GeneralizedState& state) {
  return nonlinear_terms(Kinematics(model, state));
}

VecX gravity_terms(const Kinematics& kin) {
  const MechanismModel& m = kin.model();
  std::vector<Vec6> wrench(m.links().size(), Vec6::Zero());
  for (int li : m.link_order()) {
    const Link& link = m.links()[li];
    const LinkState& ls = kin.link(li);
    const Vec3 c = ls.position + ls.rotation * link.com;
    const Vec3 f = -link.mass * m.gravity();
    wrench[li] << c.cross(f), f;
  }
  return project_wrenches(kin, accumulate_subtrees(m, std::move(wrench)));
}

VecX gravity_terms(const MechanismModel& model, const GeneralizedState& state) {
  return gravity_terms(Kinematics(model, state));
}

}  // namespace closedlink
