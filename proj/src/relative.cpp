#include "closedlink/relative.hpp"

namespace closedlink {

namespace {

struct WorldPair {
  Mat3 a_r_w;
  Vec3 p_ab;  // world
  Vec6 vel_a, vel_b;
};

WorldPair world_pair(const Kinematics& kin, const FrameRef& a, const FrameRef& b) {
  const FramePose pa = kin.pose(a);
  const FramePose pb = kin.pose(b);
  return {pa.rotation.transpose(), pb.position - pa.position, kin.velocity(a), kin.velocity(b)};
}

Vec6 velocity_from(const WorldPair& w) {
  const Vec3 wa = w.vel_a.tail<3>();
  Vec6 out;
  out << w.a_r_w * (w.vel_b.head<3>() - w.vel_a.head<3>() - wa.cross(w.p_ab)),
      w.a_r_w * (w.vel_b.tail<3>() - wa);
  return out;
}

Mat6X jacobian_from(const Kinematics& kin, const FrameRef& a, const FrameRef& b, const WorldPair& w) {
  const Mat6X ja = kin.jacobian(a);
  const Mat6X jb = kin.jacobian(b);
  Mat6X out(6, ja.cols());
  out.topRows<3>() =
      w.a_r_w * (jb.topRows<3>() - ja.topRows<3>() + skew(w.p_ab) * ja.bottomRows<3>());
  out.bottomRows<3>() = w.a_r_w * (jb.bottomRows<3>() - ja.bottomRows<3>());
  return out;
}

Vec6 bias_from(const Kinematics& kin, const FrameRef& a, const FrameRef& b, const WorldPair& w) {
  const Vec6 ba = kin.acceleration_bias(a);
  const Vec6 bb = kin.acceleration_bias(b);
  const Vec3 wa = w.vel_a.tail<3>();
  const Vec3 wb = w.vel_b.tail<3>();
  const Vec3 v_ab = w.vel_b.head<3>() - w.vel_a.head<3>();
  const Vec3 transport = -2.0 * wa.cross(v_ab) + wa.cross(wa.cross(w.p_ab));
  Vec6 out;
  out << w.a_r_w * (bb.head<3>() - ba.head<3>() - ba.tail<3>().cross(w.p_ab) + transport),
      w.a_r_w * (bb.tail<3>() - ba.tail<3>() - wa.cross(wb));
  return out;
}

}  // namespace

Vec6 relative_velocity(const Kinematics& kin, const FrameRef& a, const FrameRef& b) {
  return velocity_from(world_pair(kin, a, b));
}

Mat6X relative_jacobian(const Kinematics& kin, const FrameRef& a, const FrameRef& b) {
  return jacobian_from(kin, a, b, world_pair(kin, a, b));
}

Vec6 relative_acceleration_bias(const Kinematics& kin, const FrameRef& a, const FrameRef& b) {
  return bias_from(kin, a, b, world_pair(kin, a, b));
}

RelativeKinematics relative_kinematics(const Kinematics& kin, const FrameRef& a, const FrameRef& b) {
  const WorldPair w = world_pair(kin, a, b);
  RelativeKinematics rel;
  rel.rotation = w.a_r_w * kin.pose(b).rotation;
  rel.position = w.a_r_w * w.p_ab;
  const Vec6 v = velocity_from(w);
  rel.linear_velocity = v.head<3>();
  rel.angular_velocity = v.tail<3>();
  rel.jacobian = jacobian_from(kin, a, b, w);
  rel.acceleration_bias = bias_from(kin, a, b, w);
  return rel;
}

}  // namespace closedlink
