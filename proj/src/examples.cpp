#include "closedlink/examples.hpp"

#include <cmath>
#include <limits>

#include "closedlink/closure.hpp"
#include "closedlink/errors.hpp"
#include "closedlink/model.hpp"
#include "closedlink/spatial.hpp"

namespace closedlink::examples {

namespace {

constexpr DirectionMask kPlanarMask{true, true, false, false, false, false};
constexpr DirectionMask kSphericalPinMask{true, true, true, false, false, true};

// Stores a closed configuration (model DOF order) as the joints' home values.
void set_home(MechanismDocument& doc, const VecX& theta) {
  const MechanismModel model = MechanismModel::from_document(doc);
  for (int k = 0; k < model.dof_count(); ++k) {
    for (auto& j : doc.joints) {
      if (j.name == model.dof_name(k)) j.home = theta[k];
    }
  }
}

LinkRecord make_link(const std::string& name, double mass, const Vec3& com, const Vec3& size) {
  return {name, mass, com, box_inertia(mass, size)};
}

JointRecord revolute(const std::string& name, const std::string& parent, const std::string& child,
                     const Vec3& xyz, const Vec3& axis, const Vec3& rpy = Vec3::Zero()) {
  JointRecord j;
  j.name = name;
  j.type = JointType::kRevolute;
  j.parent = parent;
  j.child = child;
  j.xyz = xyz;
  j.rpy = rpy;
  j.axis = axis;
  return j;
}

JointRecord actuated_prismatic(const std::string& name, const std::string& parent,
                               const std::string& child, const Vec3& xyz, const Vec3& axis,
                               double limit, const Vec3& rpy = Vec3::Zero()) {
  JointRecord j = revolute(name, parent, child, xyz, axis, rpy);
  j.type = JointType::kPrismatic;
  j.actuated = true;
  j.lower = -limit;
  j.upper = limit;
  return j;
}

LoopRecord make_loop(const std::string& name, const std::string& a_link, const Vec3& a_xyz,
                     const std::string& u_link, const Vec3& u_xyz, const DirectionMask& mask) {
  LoopRecord l;
  l.name = name;
  l.a_link = a_link;
  l.a_xyz = a_xyz;
  l.u_link = u_link;
  l.u_xyz = u_xyz;
  l.mask = mask;
  for (bool b : mask) {
    if (b) l.constants.push_back(0.0);
  }
  return l;
}

double wrap_angle(double a) { return std::atan2(std::sin(a), std::cos(a)); }

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

Eigen::Vector2d planar(double angle) { return {std::cos(angle), std::sin(angle)}; }

double heading(const Eigen::Vector2d& v) { return std::atan2(v.y(), v.x()); }

// Point at distance r0 from c0 and r1 from c1 on the side where
// cross(c1 - c0, x - c0) has the sign of `branch`.
Eigen::Vector2d circle_intersection(const Eigen::Vector2d& c0, double r0, const Eigen::Vector2d& c1,
                                    double r1, double branch) {
  const Eigen::Vector2d d = c1 - c0;
  const double dist = d.norm();
  const double a = (r0 * r0 - r1 * r1 + dist * dist) / (2.0 * dist);
  const double h2 = r0 * r0 - a * a;
  if (h2 < 0.0) throw Error(ErrorCode::kOutOfRange, "linkage cannot be assembled");
  const Eigen::Vector2d perp(-d.y() / dist, d.x() / dist);
  return c0 + a * d / dist + (branch >= 0.0 ? 1.0 : -1.0) * std::sqrt(h2) * perp;
}

// Independent axis-angle route (does not use the library's log map).
Vec3 rotation_vector(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

Mat3 rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

}  // namespace

Mat3 box_inertia(double mass, const Vec3& size) {
  const Vec3 sq = size.cwiseProduct(size);
  return (mass / 12.0 * Vec3(sq.y() + sq.z(), sq.x() + sq.z(), sq.x() + sq.y())).asDiagonal();
}

void assemble_at_zero(MechanismDocument& doc) {
  const MechanismModel model = MechanismModel::from_document(doc);
  const Kinematics kin(model, GeneralizedState::zero(model));
  for (std::size_t i = 0; i < doc.loops.size(); ++i) {
    const LoopConstraint& loop = model.loops()[i];
    const FramePose a = kin.pose(loop.frame_a);
    const LinkState& u = kin.link(loop.frame_u.link);
    doc.loops[i].u_xyz = u.rotation.transpose() * (a.position - u.position);
    doc.loops[i].u_rpy = matrix_to_rpy(u.rotation.transpose() * a.rotation);
    std::fill(doc.loops[i].constants.begin(), doc.loops[i].constants.end(), 0.0);
  }
}

// ----------------------------------------------------------------- crank

MechanismDocument crank_document(const CrankGeometry& g) {
  MechanismDocument doc;
  doc.name = "crank";
  doc.gravity = Vec3(0.0, -9.81, 0.0);
  doc.links = {
      make_link("base", 0.0, Vec3::Zero(), Vec3::Zero()),
      make_link("crank", 0.5, Vec3(g.crank / 2, 0, 0), Vec3(g.crank, 0.02, 0.02)),
      make_link("rod", 0.3, Vec3(g.rod / 2, 0, 0), Vec3(g.rod, 0.02, 0.02)),
      make_link("slider", 1.0, Vec3::Zero(), Vec3(0.05, 0.04, 0.04)),
  };
  doc.joints = {
      revolute("crank", "base", "crank", Vec3::Zero(), Vec3::UnitZ()),
      revolute("rod", "crank", "rod", Vec3(g.crank, 0, 0), Vec3::UnitZ()),
      actuated_prismatic("slider", "base", "slider", Vec3(g.slider_offset, 0, 0), Vec3::UnitX(),
                         g.limit),
  };
  doc.loops = {make_loop("pin", "slider", Vec3::Zero(), "rod", Vec3(g.rod, 0, 0), kPlanarMask)};
  doc.actuators = {{"slider", 0.1, 0.95}};
  doc.selection = {"crank"};
  set_home(doc, CrankOracle(g).configuration_from_actuator(0.0));
  return doc;
}

double CrankOracle::distance(double theta) const {
  const double s = g_.crank * std::sin(theta);
  return g_.crank * std::cos(theta) + std::sqrt(g_.rod * g_.rod - s * s);
}

double CrankOracle::crank_angle(double d) const {
  const double c = (g_.crank * g_.crank + d * d - g_.rod * g_.rod) / (2.0 * g_.crank * d);
  if (!(c > -1.0 && c < 1.0)) throw Error(ErrorCode::kOutOfRange, "slider-crank cannot reach this distance");
  return std::acos(c);
}

double CrankOracle::distance_derivative(double theta) const {
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  const double root = std::sqrt(g_.rod * g_.rod - g_.crank * g_.crank * s * s);
  return -g_.crank * s - g_.crank * g_.crank * s * c / root;
}

double CrankOracle::rod_angle(double theta) const {
  return -std::asin(g_.crank * std::sin(theta) / g_.rod);
}

double CrankOracle::rod_angle_derivative(double theta) const {
  const double s = std::sin(theta);
  return -g_.crank * std::cos(theta) / std::sqrt(g_.rod * g_.rod - g_.crank * g_.crank * s * s);
}

VecX CrankOracle::configuration_from_crank(double theta) const {
  VecX q(3);
  q << theta, rod_angle(theta) - theta, distance(theta) - g_.slider_offset;
  return q;
}

VecX CrankOracle::configuration_from_actuator(double s) const {
  return configuration_from_crank(crank_angle(g_.slider_offset + s));
}

Eigen::Vector2d CrankOracle::mapping(double s) const {
  const double theta = crank_angle(g_.slider_offset + s);
  const double dd = distance_derivative(theta);
  return {1.0 / dd, (rod_angle_derivative(theta) - 1.0) / dd};
}

// ----------------------------------------------------------- differential

void add_differential(MechanismDocument& doc, const DiffGeometry& g, const DiffMount& m) {
  const Transform mount{rpy_to_matrix(m.rpy), m.xyz};
  const std::string& p = m.prefix;
  const double h = g.height;
  doc.links.push_back(make_link(p + "cross", 0.05, Vec3::Zero(), Vec3(0.03, 0.03, 0.03)));
  if (m.create_platform) {
    doc.links.push_back(make_link(m.platform, m.platform_mass, Vec3::Zero(),
                                  Vec3(2.5 * g.bx, 2.5 * g.by, 0.02)));
  }
  doc.joints.push_back(revolute(p + "pitch", m.parent, p + "cross", m.xyz, Vec3::UnitY(), m.rpy));
  doc.joints.back().lower = g.pitch_lower;
  doc.joints.back().upper = g.pitch_upper;
  doc.joints.push_back(revolute(p + "roll", p + "cross", m.platform, Vec3::Zero(), Vec3::UnitX()));
  doc.joints.back().lower = -g.roll_limit;
  doc.joints.back().upper = g.roll_limit;
  for (const auto& [side, sign] : {std::pair<std::string, double>{"left", 1.0}, {"right", -1.0}}) {
    const std::string a = p + "brace_a_" + side;
    const std::string b = p + "brace_b_" + side;
    const std::string slider = p + "slider_" + side;
    const std::string rod = p + "rod_" + side;
    const double mb = m.brace_mass;
    doc.links.push_back(make_link(a, mb, Vec3::Zero(), Vec3(0.02, 0.02, 0.02)));
    doc.links.push_back(make_link(b, mb, Vec3::Zero(), Vec3(0.02, 0.02, 0.02)));
    doc.links.push_back(make_link(slider, mb, Vec3(0, 0, -h / 4), Vec3(0.02, 0.02, h / 2)));
    doc.links.push_back(make_link(rod, mb, Vec3(0, 0, -h / 2), Vec3(0.015, 0.015, h)));
    doc.joints.push_back(revolute(p + "u1_" + side, m.parent, a,
                                  mount.apply(Vec3(g.bx, sign * g.by, h)), Vec3::UnitX(), m.rpy));
    doc.joints.push_back(revolute(p + "u2_" + side, a, b, Vec3::Zero(), Vec3::UnitY()));
    doc.joints.push_back(
        actuated_prismatic(p + "act_" + side, b, slider, Vec3::Zero(), -Vec3::UnitZ(), g.limit));
    doc.joints.push_back(revolute(p + "spin_" + side, slider, rod, Vec3::Zero(), Vec3::UnitZ()));
    doc.loops.push_back(make_loop(p + "loop_" + side, m.platform, Vec3(g.bx, sign * g.by, 0.0), rod,
                                  Vec3(0, 0, -h), kSphericalPinMask));
  }
}

MechanismDocument diff_document(const DiffGeometry& g) {
  MechanismDocument doc;
  doc.name = "diff";
  doc.links.push_back(make_link("base", 0.0, Vec3::Zero(), Vec3::Zero()));
  DiffMount mount;
  mount.parent = "base";
  mount.platform = "platform";
  add_differential(doc, g, mount);
  doc.actuators = {{"act_left", 0.05, 0.95}, {"act_right", 0.05, 0.95}};
  doc.selection = {"pitch", "roll"};
  set_home(doc, DiffOracle(g).configuration_from_platform(0.0, 0.0));
  return doc;
}

Eigen::Vector2d DiffOracle::extensions(double pitch, double roll) const {
  const Mat3 r = rot_y(pitch) * rot_x(roll);
  Eigen::Vector2d out;
  for (int i = 0; i < 2; ++i) {
    const double sign = i == 0 ? 1.0 : -1.0;
    const Vec3 anchor(g_.bx, sign * g_.by, g_.height);
    const Vec3 end = r * Vec3(g_.bx, sign * g_.by, 0.0);
    out[i] = (end - anchor).norm() - g_.height;
  }
  return out;
}

Eigen::Matrix2d DiffOracle::extension_jacobian(double pitch, double roll) const {
  const Mat3 ry = rot_y(pitch);
  const Mat3 rx = rot_x(roll);
  Eigen::Matrix2d jac;
  for (int i = 0; i < 2; ++i) {
    const double sign = i == 0 ? 1.0 : -1.0;
    const Vec3 local(g_.bx, sign * g_.by, 0.0);
    const Vec3 anchor(g_.bx, sign * g_.by, g_.height);
    const Vec3 diff = ry * rx * local - anchor;
    const Vec3 unit = diff / diff.norm();
    jac(i, 0) = unit.dot(ry * skew(Vec3::UnitY()) * rx * local);
    jac(i, 1) = unit.dot(ry * rx * skew(Vec3::UnitX()) * local);
  }
  return jac;
}

Eigen::Vector2d DiffOracle::platform(const Eigen::Vector2d& target) const {
  Eigen::Vector2d x = Eigen::Vector2d::Zero();
  for (int it = 0; it < 100; ++it) {
    const Eigen::Vector2d r = extensions(x[0], x[1]) - target;
    if (r.norm() < 1e-15) return x;
    x -= extension_jacobian(x[0], x[1]).lu().solve(r);
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1.5) break;
  }
  if ((extensions(x[0], x[1]) - target).norm() < 1e-13) return x;
  throw Error(ErrorCode::kOutOfRange, "differential cannot reach these extensions");
}

VecX DiffOracle::configuration_from_platform(double pitch, double roll) const {
  const Mat3 rp = rot_y(pitch) * rot_x(roll);
  VecX q(10);
  q[0] = pitch;
  q[1] = roll;
  for (int i = 0; i < 2; ++i) {
    const double sign = i == 0 ? 1.0 : -1.0;
    const Vec3 anchor(g_.bx, sign * g_.by, g_.height);
    const Vec3 diff = rp * Vec3(g_.bx, sign * g_.by, 0.0) - anchor;
    const Vec3 d = diff / diff.norm();
    const double u2 = std::asin(-d.x());
    const double u1 = std::atan2(d.y(), -d.z());
    const Mat3 brace = rot_x(u1) * rot_y(u2);
    // Spin zeroes the z component of the relative rotation vector.
    auto residual = [&](double s) { return rotation_vector(rp.transpose() * brace * rot_z(s)).z(); };
    double lo = -1.0;
    double hi = 1.0;
    if (residual(lo) > 0.0 || residual(hi) < 0.0) {
      throw Error(ErrorCode::kOutOfRange, "spin root not bracketed");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
      const double mid = 0.5 * (lo + hi);
      (residual(mid) < 0.0 ? lo : hi) = mid;
    }
    q[2 + 3 * i] = u1;
    q[3 + 3 * i] = u2;
    q[4 + 3 * i] = 0.5 * (lo + hi);
    q[8 + i] = diff.norm() - g_.height;
  }
  return q;
}

VecX DiffOracle::configuration_from_actuators(const Eigen::Vector2d& ext) const {
  const Eigen::Vector2d pr = platform(ext);
  return configuration_from_platform(pr[0], pr[1]);
}

// ------------------------------------------------------------------- knee

MechanismDocument knee_document(const KneeGeometry& g) {
  const KneeOracle oracle(g);
  const CrankGeometry& c = g.crank;
  MechanismDocument doc;
  doc.name = "knee";
  doc.gravity = Vec3(0.0, -9.81, 0.0);
  doc.links = {
      make_link("base", 0.0, Vec3::Zero(), Vec3::Zero()),
      make_link("k1", 0.2, Vec3::Zero(), Vec3(0.2, 0.02, 0.02)),
      make_link("rod1", 0.1, Vec3(c.rod / 2, 0, 0), Vec3(c.rod, 0.02, 0.02)),
      make_link("slider", 0.5, Vec3::Zero(), Vec3(0.05, 0.04, 0.04)),
      make_link("c2", 0.1, Vec3(oracle.coupler2() / 2, 0, 0), Vec3(oracle.coupler2(), 0.02, 0.02)),
      make_link("k2", 0.2, Vec3::Zero(), Vec3(0.1, 0.02, 0.02)),
      make_link("c3", 0.1, Vec3(oracle.coupler3() / 2, 0, 0), Vec3(oracle.coupler3(), 0.02, 0.02)),
      make_link("k3", 0.4, Vec3(g.follower3 / 2, 0, 0), Vec3(0.1, 0.02, 0.02)),
  };
  doc.joints = {
      revolute("k1", "base", "k1", Vec3::Zero(), Vec3::UnitZ()),
      revolute("rod1", "k1", "rod1", Vec3(c.crank, 0, 0), Vec3::UnitZ()),
      revolute("c2", "k1", "c2", Vec3(-g.arm2, 0, 0), Vec3::UnitZ()),
      revolute("k2", "base", "k2", Vec3(g.pivot2.x(), g.pivot2.y(), 0), Vec3::UnitZ()),
      revolute("c3", "k2", "c3", Vec3(-g.arm3, 0, 0), Vec3::UnitZ()),
      revolute("k3", "base", "k3", Vec3(g.pivot3.x(), g.pivot3.y(), 0), Vec3::UnitZ()),
      actuated_prismatic("slider", "base", "slider", Vec3(c.slider_offset, 0, 0), Vec3::UnitX(), c.limit),
  };
  doc.loops = {
      make_loop("crank_pin", "slider", Vec3::Zero(), "rod1", Vec3(c.rod, 0, 0), kPlanarMask),
      make_loop("loop2", "k2", Vec3(g.follower2, 0, 0), "c2", Vec3(oracle.coupler2(), 0, 0), kPlanarMask),
      make_loop("loop3", "k3", Vec3(g.follower3, 0, 0), "c3", Vec3(oracle.coupler3(), 0, 0), kPlanarMask),
  };
  doc.actuators = {{"slider", 0.1, 0.95}};
  doc.selection = {"k3"};
  set_home(doc, oracle.configuration_from_actuator(0.0));
  return doc;
}

KneeOracle::KneeOracle(const KneeGeometry& g) : g_(g) {
  const CrankOracle crank(g.crank);
  const double t1 = crank.crank_angle(g.crank.slider_offset);
  const Eigen::Vector2d p2 = -g.arm2 * planar(t1);
  const Eigen::Vector2d q2 = g.pivot2 + g.follower2 * planar(g.nominal2);
  coupler2_ = (q2 - p2).norm();
  branch2_ = cross2(g.pivot2 - p2, q2 - p2);
  const Eigen::Vector2d p3 = g.pivot2 - g.arm3 * planar(g.nominal2);
  const Eigen::Vector2d q3 = g.pivot3 + g.follower3 * planar(g.nominal3);
  coupler3_ = (q3 - p3).norm();
  branch3_ = cross2(g.pivot3 - p3, q3 - p3);
}

VecX KneeOracle::configuration_from_actuator(double s) const {
  const CrankOracle crank(g_.crank);
  const double t1 = crank.crank_angle(g_.crank.slider_offset + s);
  const Eigen::Vector2d p2 = -g_.arm2 * planar(t1);
  const Eigen::Vector2d q2 = circle_intersection(p2, coupler2_, g_.pivot2, g_.follower2, branch2_);
  const double t2 = heading(q2 - g_.pivot2);
  const Eigen::Vector2d p3 = g_.pivot2 - g_.arm3 * planar(t2);
  const Eigen::Vector2d q3 = circle_intersection(p3, coupler3_, g_.pivot3, g_.follower3, branch3_);
  const double t3 = heading(q3 - g_.pivot3);
  VecX q(7);
  q << t1, wrap_angle(crank.rod_angle(t1) - t1), wrap_angle(heading(q2 - p2) - t1), t2,
      wrap_angle(heading(q3 - p3) - t2), t3, s;
  return q;
}

// --------------------------------------------------------------- minileg

namespace {

// Slider-crank acting on `lever_link` about its own pivot: a rod pinned to the
// lever at `lever` (lever-link coordinates, rod pointing along the lever
// link's +y at theta = 0) and an actuated slider on `slider_parent`.
void add_lever_drive(MechanismDocument& doc, const std::string& prefix, const std::string& lever_link,
                     const Vec3& lever, const std::string& slider_parent, const Vec3& slider_xyz,
                     const Vec3& slider_rpy, double rod_length, double limit, double rod_mass,
                     double slider_mass) {
  doc.links.push_back(make_link(prefix + "rod", rod_mass, Vec3(rod_length / 2, 0, 0),
                                Vec3(rod_length, 0.02, 0.02)));
  doc.links.push_back(make_link(prefix + "slider", slider_mass, Vec3::Zero(), Vec3(0.04, 0.06, 0.04)));
  doc.joints.push_back(revolute(prefix + "rod", lever_link, prefix + "rod", lever, Vec3::UnitZ(),
                                Vec3(0, 0, M_PI / 2)));
  doc.joints.push_back(actuated_prismatic(prefix + "act", slider_parent, prefix + "slider", slider_xyz,
                                          Vec3::UnitY(), limit, slider_rpy));
  doc.loops.push_back(make_loop(prefix + "loop", prefix + "slider", Vec3::Zero(), prefix + "rod",
                                Vec3(rod_length, 0, 0), kPlanarMask));
}

void add_foot_contacts(MechanismDocument& doc, const std::string& foot, const std::string& group,
                       const Vec3& down, const Vec3& normal, const Vec3& lateral_axis) {
  int k = 0;
  for (double x : {-0.05, 0.12}) {
    for (double w : {-0.04, 0.04}) {
      ContactRecord c;
      c.name = group + "_" + std::to_string(k++);
      c.link = foot;
      c.point = Vec3(x, 0, 0) + down + w * lateral_axis;
      c.normal = normal;
      c.mu = 0.8;
      c.group = group;
      doc.contacts.push_back(c);
    }
  }
}

JointRecord floating_base(const std::string& child) {
  JointRecord j;
  j.name = "base";
  j.type = JointType::kFloating;
  j.parent = "world";
  j.child = child;
  return j;
}

}  // namespace

double minileg_standing_height() { return 0.75; }

MechanismDocument minileg_document() {
  MechanismDocument doc;
  doc.name = "minileg";
  doc.links.push_back(make_link("pelvis", 12.5, Vec3::Zero(), Vec3(0.2, 0.3, 0.2)));
  doc.joints.push_back(floating_base("pelvis"));
  const Vec3 plane_rpy(M_PI / 2, 0, 0);
  const Mat3 plane = rpy_to_matrix(plane_rpy);
  for (const auto& [side, sign] : {std::pair<std::string, double>{"l_", 1.0}, {"r_", -1.0}}) {
    const Vec3 hip(0, sign * 0.1, 0);
    doc.links.push_back(make_link(side + "thigh", 5.0, Vec3(0, -0.175, 0), Vec3(0.06, 0.35, 0.06)));
    doc.links.push_back(make_link(side + "shank", 3.0, Vec3(0, -0.175, 0), Vec3(0.05, 0.35, 0.05)));
    doc.links.push_back(make_link(side + "foot", 1.5, Vec3(0.035, -0.03, 0), Vec3(0.2, 0.05, 0.1)));
    doc.joints.push_back(revolute(side + "hip", "pelvis", side + "thigh", hip, Vec3::UnitZ(), plane_rpy));
    doc.joints.push_back(revolute(side + "knee", side + "thigh", side + "shank", Vec3(0, -0.35, 0), Vec3::UnitZ()));
    doc.joints.push_back(revolute(side + "ankle", side + "shank", side + "foot", Vec3(0, -0.35, 0), Vec3::UnitZ()));
    add_lever_drive(doc, side + "hip_", side + "thigh", Vec3(0.06, 0, 0), "pelvis",
                    hip + plane * Vec3(0.06, 0.15, 0), plane_rpy, 0.15, 0.03, 0.25, 0.5);
    add_lever_drive(doc, side + "knee_", side + "shank", Vec3(0.06, 0, 0), side + "thigh",
                    Vec3(0.06, -0.20, 0), Vec3::Zero(), 0.15, 0.03, 0.25, 0.5);
    add_lever_drive(doc, side + "ankle_", side + "foot", Vec3(0.06, 0, 0), side + "shank",
                    Vec3(0.06, -0.20, 0), Vec3::Zero(), 0.15, 0.03, 0.25, 0.5);
    add_foot_contacts(doc, side + "foot", side + "foot", Vec3(0, -0.05, 0), Vec3::UnitY(), Vec3::UnitZ());
    doc.actuators.push_back({side + "hip_act", 0.05, 0.95});
    doc.actuators.push_back({side + "knee_act", 0.1, 0.95});
    doc.actuators.push_back({side + "ankle_act", 0.05, 0.95});
    for (const char* j : {"hip", "knee", "ankle"}) doc.selection.push_back(side + j);
  }
  assemble_at_zero(doc);
  return doc;
}

GeneralizedState minileg_crouched_state(const MechanismModel& model, double bend) {
  return crouched_state(model, bend);
}

GeneralizedState crouched_state(const MechanismModel& model, double bend) {
  // Knee axes may point either way along the pitch axis; keep the knee sign
  // that leaves the soles level.
  GeneralizedState best;
  double best_spread = std::numeric_limits<double>::infinity();
  for (double knee_sign : {-1.0, 1.0}) {
    VecX targets(model.selection().size());
    for (size_t k = 0; k < model.selection().size(); ++k) {
      const std::string& name = model.dof_name(model.selection()[k]);
      const auto has = [&](const char* part) { return name.find(part) != std::string::npos; };
      targets[k] = has("knee") ? 2.0 * knee_sign * bend : (has("yaw") || has("roll")) ? 0.0 : bend;
    }
    GeneralizedState s = pose_by_selection(model, GeneralizedState::zero(model), targets);
    const Kinematics kin(model, s);
    double lowest = std::numeric_limits<double>::infinity();
    double highest = -lowest;
    for (const ContactPoint& c : model.contacts()) {
      const double z = (kin.link(c.link).position + kin.link(c.link).rotation * c.position).z();
      lowest = std::min(lowest, z);
      highest = std::max(highest, z);
    }
    // Lower the base until the lowest contact touches the ground.
    s.base_position.z() = -lowest;
    if (highest - lowest < best_spread) {
      best_spread = highest - lowest;
      best = s;
    }
  }
  return best;
}

// ------------------------------------------------------------- synthetic

double synthetic_standing_height() { return 0.88; }

MechanismDocument synthetic_document() {
  MechanismDocument doc;
  doc.name = "synthetic76";
  doc.links.push_back(make_link("pelvis", 10.0, Vec3::Zero(), Vec3(0.2, 0.3, 0.2)));
  doc.joints.push_back(floating_base("pelvis"));
  const Vec3 plane_rpy(M_PI / 2, 0, 0);
  const Mat3 plane = rpy_to_matrix(plane_rpy);
  for (const auto& [side, sign] : {std::pair<std::string, double>{"l_", 1.0}, {"r_", -1.0}}) {
    // Hip yaw, driven in the horizontal plane.
    const Vec3 hip(0, sign * 0.1, -0.05);
    doc.links.push_back(make_link(side + "yaw", 1.0, Vec3(0, 0, -0.04), Vec3(0.08, 0.08, 0.08)));
    doc.joints.push_back(revolute(side + "yaw", "pelvis", side + "yaw", hip, Vec3::UnitZ()));
    add_lever_drive(doc, side + "yaw_", side + "yaw", Vec3(0.05, 0, 0), "pelvis",
                    hip + Vec3(0.05, 0.1, 0), Vec3::Zero(), 0.1, 0.02, 0.05, 0.1);

    // Hip pitch/roll differential carrying the thigh.
    doc.links.push_back(make_link(side + "thigh", 4.0, Vec3(0, 0, -0.175), Vec3(0.06, 0.06, 0.35)));
    DiffGeometry hip_geometry;
    hip_geometry.height = 0.2;
    hip_geometry.bx = 0.06;
    hip_geometry.by = 0.05;
    DiffMount hip_mount;
    hip_mount.prefix = side + "hip_";
    hip_mount.parent = side + "yaw";
    hip_mount.platform = side + "thigh";
    hip_mount.xyz = Vec3(0, 0, -0.08);
    hip_mount.create_platform = false;
    add_differential(doc, hip_geometry, hip_mount);

    // Planar knee: slider-crank on k1 followed by six four-bars ending at the shank.
    const std::string s = side + "knee_";
    auto leg = [&](double x, double y) { return Vec3(plane * Vec3(x, y, 0)); };
    doc.links.push_back(make_link(side + "shank", 2.5, Vec3(0, -0.175, 0), Vec3(0.05, 0.35, 0.05)));
    doc.joints.push_back(revolute(side + "knee", side + "thigh", side + "shank", leg(0, -0.35),
                                  Vec3::UnitZ(), plane_rpy));
    const int followers = 6;
    for (int i = 1; i <= followers; ++i) {
      const std::string k = s + "k" + std::to_string(i);
      doc.links.push_back(make_link(k, 0.05, Vec3::Zero(), Vec3(0.02, 0.06, 0.02)));
      doc.joints.push_back(revolute(k, side + "thigh", k, leg(-0.26 + 0.04 * (i - 1), -0.29),
                                    Vec3::UnitZ(), plane_rpy));
    }
    add_lever_drive(doc, s, s + "k1", Vec3(0.03, 0, 0), side + "thigh", leg(-0.23, -0.19), plane_rpy,
                    0.1, 0.02, 0.05, 0.1);
    for (int i = 1; i <= followers; ++i) {
      const std::string k = s + "k" + std::to_string(i);
      const std::string c = s + "c" + std::to_string(i);
      const bool last = i == followers;
      const std::string next = last ? side + "shank" : s + "k" + std::to_string(i + 1);
      doc.links.push_back(make_link(c, 0.05, Vec3(0.02, 0, 0), Vec3(0.04, 0.01, 0.01)));
      doc.joints.push_back(revolute(c, k, c, Vec3(0, -0.03, 0), Vec3::UnitZ()));
      doc.loops.push_back(make_loop(c + "_loop", next, Vec3(0, last ? 0.03 : -0.03, 0), c, Vec3::Zero(),
                                    kPlanarMask));
    }

    // Ankle differential back to a level foot.
    doc.links.push_back(make_link(side + "foot", 1.0, Vec3(0.035, 0, -0.03), Vec3(0.2, 0.1, 0.05)));
    DiffGeometry ankle_geometry;
    ankle_geometry.height = 0.15;
    ankle_geometry.bx = 0.05;
    ankle_geometry.by = 0.04;
    DiffMount ankle_mount;
    ankle_mount.prefix = side + "ankle_";
    ankle_mount.parent = side + "shank";
    ankle_mount.platform = side + "foot";
    ankle_mount.xyz = Vec3(0, -0.35, 0);
    ankle_mount.rpy = Vec3(-M_PI / 2, 0, 0);
    ankle_mount.create_platform = false;
    add_differential(doc, ankle_geometry, ankle_mount);
    add_foot_contacts(doc, side + "foot", side + "foot", Vec3(0, 0, -0.05), Vec3::UnitZ(), Vec3::UnitY());

    for (const char* a : {"yaw_act", "hip_act_left", "hip_act_right", "knee_act", "ankle_act_left",
                          "ankle_act_right"}) {
      doc.actuators.push_back({side + a, 0.05, 0.95});
    }
    for (const char* j : {"yaw", "hip_pitch", "hip_roll", "knee", "ankle_pitch", "ankle_roll"}) {
      doc.selection.push_back(side + j);
    }
  }
  assemble_at_zero(doc);
  return doc;
}

}  // namespace closedlink::examples
