#pragma once

#include <cmath>
#include <string>

#include "closedlink/common.hpp"
#include "closedlink/document.hpp"
#include "closedlink/model.hpp"
#include "closedlink/state.hpp"

namespace closedlink::examples {

/// Sets the cut-frame offsets on the u side of every loop so that all loops
/// are closed at theta = 0 (identity base pose). Loop constants become zero.
void assemble_at_zero(MechanismDocument& doc);

/// Inertia of a solid box about its center.
Mat3 box_inertia(double mass, const Vec3& size);

// ---------------------------------------------------------------------------
// Slider-crank: crank pivot at the origin, rod pinned at the crank tip, slider
// along x. The actuator coordinate is s = d - slider_offset where d is the
// pivot-to-pin distance. DOFs: crank, rod (relative), slider.

struct CrankGeometry {
  double crank = 0.1;
  double rod = 0.2;
  double slider_offset = 0.2;
  double limit = 0.02;
};

MechanismDocument crank_document(const CrankGeometry& g = {});

class CrankOracle {
 public:
  explicit CrankOracle(const CrankGeometry& g = {}) : g_(g) {}
  const CrankGeometry& geometry() const { return g_; }

  /// Pin distance for a crank angle.
  double distance(double crank_angle) const;
  /// Crank angle in (0, pi) for a pin distance. Throws OutOfRange.
  double crank_angle(double distance) const;
  double distance_derivative(double crank_angle) const;
  /// Absolute rod angle (rod tip stays on the slider axis, rod pointing +x).
  double rod_angle(double crank_angle) const;
  double rod_angle_derivative(double crank_angle) const;

  /// Full theta = (crank, rod, s) from the crank angle.
  VecX configuration_from_crank(double crank_angle) const;
  /// Full theta = (crank, rod, s) from the actuator coordinate.
  VecX configuration_from_actuator(double s) const;
  /// d(crank, rod)/ds.
  Eigen::Vector2d mapping(double s) const;

 private:
  CrankGeometry g_;
};

// ---------------------------------------------------------------------------
// Two-actuator differential: a platform hung on a universal joint (pitch about
// y, then roll about x) at the origin, driven by two extensible braces from
// anchors at (bx, +-by, height) to platform points (bx, +-by, 0). Each brace is
// a 2R universal joint, an actuated prismatic joint along -z and a spin joint;
// its end is bound to the platform in x, y, z and rz.

struct DiffGeometry {
  double height = 0.3;
  double bx = 0.08;
  double by = 0.08;
  double limit = 0.04;
  double roll_limit = 27.0 * M_PI / 180.0;
  double pitch_lower = -40.0 * M_PI / 180.0;
  double pitch_upper = 42.0 * M_PI / 180.0;
};

/// Placement of a differential inside a larger document.
struct DiffMount {
  std::string prefix;
  std::string parent;
  std::string platform;  // child link of the roll joint (created by the caller or here)
  Vec3 xyz = Vec3::Zero();
  Vec3 rpy = Vec3::Zero();
  bool create_platform = true;
  double platform_mass = 1.0;
  double brace_mass = 0.1;
};

void add_differential(MechanismDocument& doc, const DiffGeometry& g, const DiffMount& mount);

MechanismDocument diff_document(const DiffGeometry& g = {});

class DiffOracle {
 public:
  explicit DiffOracle(const DiffGeometry& g = {}) : g_(g) {}
  const DiffGeometry& geometry() const { return g_; }

  /// Brace extensions (left, right) for a platform pitch/roll.
  Eigen::Vector2d extensions(double pitch, double roll) const;
  /// d(extensions)/d(pitch, roll).
  Eigen::Matrix2d extension_jacobian(double pitch, double roll) const;
  /// Platform (pitch, roll) for brace extensions; Newton from level. Throws OutOfRange.
  Eigen::Vector2d platform(const Eigen::Vector2d& extensions) const;
  /// Full theta (10 DOFs, model order) for a platform pose.
  VecX configuration_from_platform(double pitch, double roll) const;
  VecX configuration_from_actuators(const Eigen::Vector2d& extensions) const;

 private:
  DiffGeometry g_;
};

// ---------------------------------------------------------------------------
// Planar knee: a slider-crank driving link k1, which drives k2 through a
// four-bar, which drives k3 through a second four-bar. One actuator, six
// passive DOFs, three loops. Output DOF: k3.

struct KneeGeometry {
  CrankGeometry crank;
  double arm2 = 0.08;   // k1 point driving the second loop (behind the pivot)
  Eigen::Vector2d pivot2{-0.12, -0.10};
  double follower2 = 0.06;
  double nominal2 = M_PI / 2.0;
  double arm3 = 0.05;
  Eigen::Vector2d pivot3{-0.25, -0.20};
  double follower3 = 0.07;
  double nominal3 = M_PI / 3.0;
};

MechanismDocument knee_document(const KneeGeometry& g = {});

class KneeOracle {
 public:
  explicit KneeOracle(const KneeGeometry& g = {});
  /// Full theta (k1, rod1, c2, k2, c3, k3, s) for an actuator coordinate.
  VecX configuration_from_actuator(double s) const;
  double coupler2() const { return coupler2_; }
  double coupler3() const { return coupler3_; }

 private:
  KneeGeometry g_;
  double coupler2_ = 0.0;
  double coupler3_ = 0.0;
  double branch2_ = 1.0;
  double branch3_ = 1.0;
};

// ---------------------------------------------------------------------------
// Floating-base biped: each sagittal leg has hip, knee and ankle pitch joints,
// each driven by a slider-crank loop; four contacts per foot. Closed at
// theta = 0 with straight legs and soles on z = 0 when the base is at
// standing_height().

MechanismDocument minileg_document();
double minileg_standing_height();
/// Static double-support pose with hip, knee and ankle at (bend, -2 bend,
/// bend), soles flat on z = 0. Zero bend is the straight-leg singular stance.
GeneralizedState minileg_crouched_state(const MechanismModel& model, double bend = 0.2);

/// Double-support pose for any biped whose selected DOFs are named after hip,
/// knee and ankle joints: knees at +-2 bend (the sign that keeps the soles
/// level), yaw and roll at 0, everything else at bend; the base is lowered
/// until the lowest contact touches z = 0.
GeneralizedState crouched_state(const MechanismModel& model, double bend = 0.2);

/// 76-DOF two-leg model (64 passive, 12 actuated, 8 contacts) per leg: hip
/// yaw slider-crank, hip differential, seven-loop planar knee, ankle
/// differential. Closed at theta = 0; soles on z = 0 at synthetic_standing_height().
MechanismDocument synthetic_document();
double synthetic_standing_height();

}  // namespace closedlink::examples
