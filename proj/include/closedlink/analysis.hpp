#pragma once

#include <string>
#include <vector>

#include "closedlink/closure.hpp"
#include "closedlink/model.hpp"
#include "closedlink/state.hpp"

namespace closedlink {

// ------------------------------------------------------------------ workspace

struct WorkspaceOptions {
  int directions = 64;        // commanded actuated-velocity directions (2 for one actuator)
  double dt = 1e-2;           // integration step [s]
  double stall_speed = 1e-6;  // ||theta_dot|| below which motion has stalled
  int max_steps = 5000;
  /// Commanded speed per actuator as a fraction of its range per step.
  double speed_fraction = 0.05;
  /// Reported DOF indices (P); empty means the model selection, or the
  /// actuated DOFs when the model selects none.
  std::vector<int> selection;
  int threads = 1;
};

struct BindingLimit {
  int dof = 0;
  bool upper = false;
};

struct WorkspaceSample {
  int direction = 0;
  VecX command;     // commanded actuated-velocity direction
  VecX actuated;    // theta_a at the stall point
  VecX selected;    // P theta
  VecX theta;
  bool feasible = false;  // every DOF within its limits and the sweep stalled
  bool stalled = false;
  int steps = 0;
  std::vector<BindingLimit> binding;
  std::string error;  // non-empty when a QP failed and the sample was skipped
};

/// Traces the reachable boundary by integrating
///   min ||theta_dot_a,d - theta_dot_a||^2  s.t.  J_l theta_dot = -e_l / dt,
///   (lo - theta)/dt <= theta_dot <= (hi - theta)/dt
/// from `start` along each commanded direction until motion stalls.
std::vector<WorkspaceSample> workspace_explore(const MechanismModel& model, const GeneralizedState& start,
                                               const WorkspaceOptions& options = {});

/// Commanded unit directions used by workspace_explore.
std::vector<VecX> workspace_directions(int actuated, int count);

// ------------------------------------------------------------ manipulability

/// J_t,m = J_ta + J_tu J_m of a frame (actuated columns, base held fixed).
MatX projected_frame_jacobian(const MechanismModel& model, const GeneralizedState& state, const FrameRef& frame);

/// Yoshikawa measure generalized to non-square J: product of the min(rows, cols)
/// singular values, i.e. sqrt(det(J J^T)) or sqrt(det(J^T J)).
double yoshikawa(const MatX& jacobian);

struct ManipulabilitySample {
  std::vector<int> index;  // grid index per actuator
  VecX actuated;
  double linear = 0.0;      // raw measures
  double angular = 0.0;
  double linear_normalized = 0.0;
  double angular_normalized = 0.0;
  bool singular = false;    // closure could not be solved or J_lu singular
};

struct ManipulabilityOptions {
  int grid = 21;  // points per actuator, spanning its limits
  ClosureOptions closure;
};

/// Samples a uniform grid over the actuator limits (last actuator fastest),
/// solving the closure by continuation from `seed`.
std::vector<ManipulabilitySample> manipulability_map(const MechanismModel& model, const GeneralizedState& seed,
                                                     const std::string& frame,
                                                     const ManipulabilityOptions& options = {});

// ------------------------------------------------------------------- inertia

struct InertiaOptions {
  double epsilon = 1e-5;
  /// Keep the floating-base columns (world-fixed view) instead of holding the base.
  bool include_base = false;
};

struct InertiaAnalysis {
  Mat6 lambda = Mat6::Zero();
  double epsilon = 0.0;
  Vec6 column_norms = Vec6::Zero();
};

/// Lambda = (J M^-1 J^T + eps I)^-1 on the projected Jacobian and inertia
/// (J L and L^T M L with the closure lift L). Throws InvalidModel for singular M.
InertiaAnalysis cartesian_inertia(const MechanismModel& model, const GeneralizedState& state,
                                  const std::string& frame, const InertiaOptions& options = {});

/// chi_j = ||lambda_ref,j|| / ||lambda_test,j||. Throws InvalidArgument on a zero test column.
Vec6 inertia_ratio(const Mat6& reference, const Mat6& test);

// ---------------------------------------------------------------- centroidal

struct CentroidalQuantities {
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  MatX system_jacobian;  // J_S: per link [v_com; omega] rows (6 per link)
  MatX system_inertia;   // B_S: blockdiag(m I, I_com world)
  MatX system_momentum;  // A_S = B_S J_S
  MatX centroid_map;     // X_G: 6N x 6, centroid motion -> link COM motion
  MatX cmm;              // A_G = X_G^T A_S, 6 x nv, rows [linear; angular]
  Vec6 momentum = Vec6::Zero();  // h = A_G nu
  MatX projected_cmm;    // A_G L: base and actuated columns (closure-consistent motion)

  MatX camm() const { return cmm.bottomRows(3); }
  MatX projected_camm() const { return projected_cmm.bottomRows(3); }
};

CentroidalQuantities centroidal_momentum(const MechanismModel& model, const GeneralizedState& state);

/// gamma_r = ||row r of ref|| / ||row r of test|| for the three CAMM rows
/// restricted to their DOF columns (base columns dropped when `base_columns` > 0).
Vec3 camm_ratio(const MatX& reference, const MatX& test, int base_columns = 0);

// -------------------------------------------------------------- transmission

struct TransmissionSample {
  double actuator = 0.0;
  double output = 0.0;       // DOF value, or frame displacement along the output direction
  double ratio = 0.0;        // d output / d actuator
  double output_force = 0.0; // input_force / ratio (virtual work)
  bool singular = false;
};

struct TransmissionOptions {
  double input_force = 1.0;  // applied actuator force/torque
  /// Output direction (world) for frame outputs.
  Vec3 direction = Vec3::UnitZ();
  ClosureOptions closure;
};

/// Sweeps one actuator over [lo, hi] in `samples` points (others held at the
/// seed), following the closure with a DFK predictor and Newton corrector.
/// `output` names a DOF or a frame.
std::vector<TransmissionSample> transmission_curve(const MechanismModel& model, const GeneralizedState& seed,
                                                   const std::string& actuator, const std::string& output,
                                                   double lo, double hi, int samples,
                                                   const TransmissionOptions& options = {});

}  // namespace closedlink
