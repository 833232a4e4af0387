#pragma once

#include <array>
#include <string>
#include <vector>

#include "closedlink/common.hpp"

namespace closedlink {

enum class JointType { kRevolute, kPrismatic, kFloating };

/// Constrained directions of a loop, in frame a: x, y, z, rx, ry, rz.
using DirectionMask = std::array<bool, 6>;

struct LinkRecord {
  std::string name;
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  /// Rotational inertia about the COM, link frame.
  Mat3 inertia = Mat3::Zero();

  bool operator==(const LinkRecord&) const = default;
};

struct JointRecord {
  std::string name;
  JointType type = JointType::kRevolute;
  std::string parent;  // "world" for the floating joint
  std::string child;
  Vec3 xyz = Vec3::Zero();
  Vec3 rpy = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
  bool actuated = false;
  double lower = -1e30;
  double upper = 1e30;
  /// Assembly seed: starting value when solving the closure (selects the branch).
  double home = 0.0;

  bool operator==(const JointRecord&) const = default;
};

struct FrameRecord {
  std::string name;
  std::string link;
  Vec3 xyz = Vec3::Zero();
  Vec3 rpy = Vec3::Zero();

  bool operator==(const FrameRecord&) const = default;
};

struct LoopRecord {
  std::string name;
  std::string a_link;
  Vec3 a_xyz = Vec3::Zero();
  Vec3 a_rpy = Vec3::Zero();
  std::string u_link;
  Vec3 u_xyz = Vec3::Zero();
  Vec3 u_rpy = Vec3::Zero();
  DirectionMask mask{};
  /// One constant per constrained direction, in mask order.
  std::vector<double> constants;

  bool operator==(const LoopRecord&) const = default;
};

struct ContactRecord {
  std::string name;
  std::string link;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double mu = 1.0;
  std::string group;

  bool operator==(const ContactRecord&) const = default;
};

struct ActuatorRecord {
  std::string joint;
  double lead = 0.0;
  double efficiency = 1.0;

  bool operator==(const ActuatorRecord&) const = default;
};

/// Text-level description of a mechanism, as read from a `.mech` file.
struct MechanismDocument {
  int format = 1;
  std::string name;
  Vec3 gravity{0.0, 0.0, -9.81};
  std::vector<LinkRecord> links;
  std::vector<JointRecord> joints;
  std::vector<FrameRecord> frames;
  std::vector<LoopRecord> loops;
  std::vector<ContactRecord> contacts;
  std::vector<ActuatorRecord> actuators;
  /// Passive joints reported through the selection matrix P.
  std::vector<std::string> selection;

  bool operator==(const MechanismDocument&) const = default;
};

}  // namespace closedlink
