#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "closedlink/common.hpp"
#include "closedlink/document.hpp"

namespace closedlink {

struct Link {
  std::string name;
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();
  int parent_joint = -1;  // -1 for the root
};

struct Joint {
  std::string name;
  JointType type = JointType::kRevolute;
  int parent = -1;
  int child = -1;
  Transform origin;
  Vec3 axis = Vec3::UnitZ();
  bool actuated = false;
  double lower = -1e30;
  double upper = 1e30;
  double home = 0.0;
  int dof = -1;  // -1 for the floating joint
};

/// A frame rigidly attached to a link.
struct FrameRef {
  int link = 0;
  Transform offset;
};

struct LoopConstraint {
  std::string name;
  FrameRef frame_a;
  FrameRef frame_u;
  DirectionMask mask{};
  VecX constants;
  int row_offset = 0;  // first row of this loop in the stacked closure system

  int rows() const;
};

struct ContactPoint {
  std::string name;
  int link = 0;
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double mu = 1.0;
  std::string group;
};

struct ActuatorSpec {
  int dof = 0;
  /// Ball-screw lead [m].
  double lead = 0.0;
  double efficiency = 1.0;
};

/// Immutable kinematic tree plus loop constraints. DOFs are ordered passive
/// first (0..m-1) then actuated (m..n-1), each group in declaration order.
class MechanismModel {
 public:
  static MechanismModel from_document(const MechanismDocument& doc);

  const std::string& name() const { return name_; }
  const MechanismDocument& document() const { return document_; }
  const Vec3& gravity() const { return gravity_; }
  bool floating_base() const { return floating_; }

  int dof_count() const { return static_cast<int>(dof_joint_.size()); }
  int passive_count() const { return passive_count_; }
  int actuated_count() const { return dof_count() - passive_count_; }
  /// Offset of the DOF block inside generalized velocities (6 when floating).
  int base_offset() const { return floating_ ? 6 : 0; }
  int velocity_size() const { return base_offset() + dof_count(); }
  int constraint_rows() const { return constraint_rows_; }

  const std::vector<Link>& links() const { return links_; }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<LoopConstraint>& loops() const { return loops_; }
  const std::vector<ContactPoint>& contacts() const { return contacts_; }
  const std::vector<ActuatorSpec>& actuators() const { return actuators_; }
  /// Links in topological order, root first.
  const std::vector<int>& link_order() const { return link_order_; }
  int root_link() const { return link_order_.front(); }

  const Joint& dof_joint(int dof) const { return joints_[dof_joint_[dof]]; }
  const std::string& dof_name(int dof) const { return dof_joint(dof).name; }
  std::optional<int> find_dof(const std::string& joint_name) const;
  int dof_index(const std::string& joint_name) const;  // throws
  std::optional<int> find_link(const std::string& name) const;

  /// Link or named frame; throws UnknownFrame.
  FrameRef frame(const std::string& name) const;
  std::vector<std::string> frame_names() const;

  /// Passive DOF indices picked by the selection matrix P.
  const std::vector<int>& selection() const { return selection_; }

  double total_mass() const;
  VecX lower_limits() const;
  /// Joint home values in DOF order (assembly seed).
  VecX home_configuration() const;
  VecX upper_limits() const;

 private:
  std::string name_;
  MechanismDocument document_;
  Vec3 gravity_ = Vec3::Zero();
  bool floating_ = false;
  int passive_count_ = 0;
  int constraint_rows_ = 0;
  std::vector<Link> links_;
  std::vector<Joint> joints_;
  std::vector<LoopConstraint> loops_;
  std::vector<ContactPoint> contacts_;
  std::vector<ActuatorSpec> actuators_;
  std::vector<int> link_order_;
  std::vector<int> dof_joint_;
  std::vector<int> selection_;
  std::unordered_map<std::string, int> link_index_;
  std::unordered_map<std::string, int> dof_index_;
  std::vector<std::pair<std::string, FrameRef>> named_frames_;
};

}  // namespace closedlink
