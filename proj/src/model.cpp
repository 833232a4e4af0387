#include "closedlink/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "closedlink/errors.hpp"

namespace closedlink {

int LoopConstraint::rows() const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::kInvalidModel, what); }

Transform make_transform(const Vec3& xyz, const Vec3& rpy) {
  return {rpy_to_matrix(rpy), xyz};
}

}  // namespace

MechanismModel MechanismModel::from_document(const MechanismDocument& doc) {
  MechanismModel model;
  model.name_ = doc.name;
  model.document_ = doc;
  model.gravity_ = doc.gravity;

  for (const auto& rec : doc.links) {
    if (model.link_index_.count(rec.name)) {
      throw Error(ErrorCode::kDuplicateName, "duplicate link '" + rec.name + "'");
    }
    if (!(rec.mass >= 0.0)) invalid("negative mass on link '" + rec.name + "'");
    if ((rec.inertia - rec.inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      invalid("asymmetric inertia on link '" + rec.name + "'");
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(rec.inertia, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-12) {
      invalid("inertia of link '" + rec.name + "' is not positive semidefinite");
    }
    model.link_index_[rec.name] = static_cast<int>(model.links_.size());
    model.links_.push_back({rec.name, rec.mass, rec.com, rec.inertia, -1});
  }
  if (model.links_.empty()) invalid("mechanism has no links");

  auto link_of = [&](const std::string& name, const std::string& who) {
    auto it = model.link_index_.find(name);
    if (it == model.link_index_.end()) {
      throw Error(ErrorCode::kUnknownReference, who + " references unknown link '" + name + "'");
    }
    return it->second;
  };

  std::set<std::string> joint_names;
  int floating_joints = 0;
  for (const auto& rec : doc.joints) {
    if (!joint_names.insert(rec.name).second) {
      throw Error(ErrorCode::kDuplicateName, "duplicate joint '" + rec.name + "'");
    }
    Joint j;
    j.name = rec.name;
    j.type = rec.type;
    j.child = link_of(rec.child, "joint '" + rec.name + "'");
    if (rec.type == JointType::kFloating) {
      if (rec.parent != "world") invalid("floating joint '" + rec.name + "' must have parent world");
      ++floating_joints;
    } else {
      j.parent = link_of(rec.parent, "joint '" + rec.name + "'");
      const double norm = rec.axis.norm();
      if (std::abs(norm - 1.0) > 1e-12) invalid("axis of joint '" + rec.name + "' is not unit");
      if (rec.lower > rec.upper) {
        throw Error(ErrorCode::kBadLimits, "joint '" + rec.name + "' has lower > upper");
      }
    }
    j.origin = make_transform(rec.xyz, rec.rpy);
    j.axis = rec.axis;
    j.actuated = rec.actuated && rec.type != JointType::kFloating;
    j.lower = rec.lower;
    j.upper = rec.upper;
    j.home = rec.home;
    const int index = static_cast<int>(model.joints_.size());
    if (rec.type != JointType::kFloating) {
      if (model.links_[j.child].parent_joint >= 0) {
        invalid("link '" + rec.child + "' has more than one parent joint");
      }
      model.links_[j.child].parent_joint = index;
    }
    model.joints_.push_back(j);
  }
  if (floating_joints > 1) invalid("at most one floating joint is allowed");
  model.floating_ = floating_joints == 1;

  // Tree: exactly one root, reachable ordering, no cycles.
  std::vector<int> roots;
  for (int i = 0; i < static_cast<int>(model.links_.size()); ++i) {
    if (model.links_[i].parent_joint < 0) roots.push_back(i);
  }
  if (roots.size() != 1) invalid("kinematic tree must have exactly one root link");
  if (model.floating_) {
    for (const auto& j : model.joints_) {
      if (j.type == JointType::kFloating && j.child != roots.front()) {
        invalid("floating joint must attach the root link");
      }
    }
  }
  std::vector<std::vector<int>> children(model.links_.size());
  for (int ji = 0; ji < static_cast<int>(model.joints_.size()); ++ji) {
    const auto& j = model.joints_[ji];
    if (j.type != JointType::kFloating) children[j.parent].push_back(j.child);
  }
  model.link_order_.push_back(roots.front());
  for (std::size_t k = 0; k < model.link_order_.size(); ++k) {
    for (int c : children[model.link_order_[k]]) model.link_order_.push_back(c);
  }
  if (model.link_order_.size() != model.links_.size()) invalid("joint graph contains a cycle");

  // Passive-first DOF ordering, stable in declaration order.
  for (int pass = 0; pass < 2; ++pass) {
    for (int ji = 0; ji < static_cast<int>(model.joints_.size()); ++ji) {
      auto& j = model.joints_[ji];
      if (j.type == JointType::kFloating || j.actuated != (pass == 1)) continue;
      j.dof = static_cast<int>(model.dof_joint_.size());
      model.dof_joint_.push_back(ji);
      model.dof_index_[j.name] = j.dof;
    }
    if (pass == 0) model.passive_count_ = static_cast<int>(model.dof_joint_.size());
  }

  std::set<std::string> frame_names;
  for (const auto& rec : doc.frames) {
    if (model.link_index_.count(rec.name) || !frame_names.insert(rec.name).second) {
      throw Error(ErrorCode::kDuplicateName, "duplicate frame '" + rec.name + "'");
    }
    model.named_frames_.push_back(
        {rec.name, FrameRef{link_of(rec.link, "frame '" + rec.name + "'"),
                            make_transform(rec.xyz, rec.rpy)}});
  }

  std::set<std::string> loop_names;
  for (const auto& rec : doc.loops) {
    if (!loop_names.insert(rec.name).second) {
      throw Error(ErrorCode::kDuplicateName, "duplicate loop '" + rec.name + "'");
    }
    LoopConstraint loop;
    loop.name = rec.name;
    loop.frame_a = {link_of(rec.a_link, "loop '" + rec.name + "'"), make_transform(rec.a_xyz, rec.a_rpy)};
    loop.frame_u = {link_of(rec.u_link, "loop '" + rec.name + "'"), make_transform(rec.u_xyz, rec.u_rpy)};
    loop.mask = rec.mask;
    const int rows = loop.rows();
    if (rows < 1) throw Error(ErrorCode::kBadMask, "loop '" + rec.name + "' constrains no direction");
    if (static_cast<int>(rec.constants.size()) != rows) {
      throw Error(ErrorCode::kBadMask, "loop '" + rec.name + "' needs one constant per direction");
    }
    loop.constants = Eigen::Map<const VecX>(rec.constants.data(), rows);
    loop.row_offset = model.constraint_rows_;
    model.constraint_rows_ += rows;
    model.loops_.push_back(loop);
  }

  std::set<std::string> contact_names;
  for (const auto& rec : doc.contacts) {
    if (!contact_names.insert(rec.name).second) {
      throw Error(ErrorCode::kDuplicateName, "duplicate contact '" + rec.name + "'");
    }
    if (!(rec.mu > 0.0)) invalid("contact '" + rec.name + "' needs mu > 0");
    if (std::abs(rec.normal.norm() - 1.0) > 1e-9) invalid("contact '" + rec.name + "' normal is not unit");
    model.contacts_.push_back({rec.name, link_of(rec.link, "contact '" + rec.name + "'"), rec.point,
                               rec.normal, rec.mu, rec.group});
  }

  for (const auto& rec : doc.actuators) {
    auto it = model.dof_index_.find(rec.joint);
    if (it == model.dof_index_.end() || !model.dof_joint(it->second).actuated) {
      throw Error(ErrorCode::kUnknownReference,
                  "actuator references unknown actuated joint '" + rec.joint + "'");
    }
    if (!(rec.lead > 0.0) || !(rec.efficiency > 0.0 && rec.efficiency <= 1.0)) {
      invalid("actuator '" + rec.joint + "' needs lead > 0 and 0 < efficiency <= 1");
    }
    model.actuators_.push_back({it->second, rec.lead, rec.efficiency});
  }

  std::set<int> selected;
  for (const auto& name : doc.selection) {
    auto it = model.dof_index_.find(name);
    if (it == model.dof_index_.end() || it->second >= model.passive_count_) {
      throw Error(ErrorCode::kUnknownReference, "selection references unknown passive joint '" + name + "'");
    }
    if (!selected.insert(it->second).second) {
      throw Error(ErrorCode::kDuplicateName, "joint '" + name + "' selected twice");
    }
    model.selection_.push_back(it->second);
  }

  if (model.passive_count_ >= model.dof_count() && model.dof_count() > 0) {
    invalid("mechanism needs at least one actuated DOF (m < n)");
  }
  return model;
}

std::optional<int> MechanismModel::find_dof(const std::string& joint_name) const {
  auto it = dof_index_.find(joint_name);
  if (it == dof_index_.end()) return std::nullopt;
  return it->second;
}

int MechanismModel::dof_index(const std::string& joint_name) const {
  auto dof = find_dof(joint_name);
  if (!dof) throw Error(ErrorCode::kUnknownReference, "unknown joint '" + joint_name + "'");
  return *dof;
}

std::optional<int> MechanismModel::find_link(const std::string& name) const {
  auto it = link_index_.find(name);
  if (it == link_index_.end()) return std::nullopt;
  return it->second;
}

FrameRef MechanismModel::frame(const std::string& name) const {
  if (auto link = find_link(name)) return FrameRef{*link, Transform{}};
  for (const auto& [frame_name, ref] : named_frames_) {
    if (frame_name == name) return ref;
  }
  throw Error(ErrorCode::kUnknownFrame, "unknown frame '" + name + "'");
}

std::vector<std::string> MechanismModel::frame_names() const {
  std::vector<std::string> names;
  for (const auto& l : links_) names.push_back(l.name);
  for (const auto& f : named_frames_) names.push_back(f.first);
  return names;
}

double MechanismModel::total_mass() const {
  double total = 0.0;
  for (const auto& l : links_) total += l.mass;
  return total;
}

VecX MechanismModel::lower_limits() const {
  VecX lo(dof_count());
  for (int i = 0; i < dof_count(); ++i) lo[i] = dof_joint(i).lower;
  return lo;
}

VecX MechanismModel::home_configuration() const {
  VecX home(dof_count());
  for (int i = 0; i < dof_count(); ++i) home[i] = dof_joint(i).home;
  return home;
}

VecX MechanismModel::upper_limits() const {
  VecX hi(dof_count());
  for (int i = 0; i < dof_count(); ++i) hi[i] = dof_joint(i).upper;
  return hi;
}

}  // namespace closedlink
