#pragma once

#include <string>
#include <utility>
#include <vector>

#include "closedlink/closure.hpp"
#include "closedlink/model.hpp"
#include "closedlink/state.hpp"

namespace closedlink {

struct EstimatorConfig {
  double alpha = 1.0;     // closure-error gain [1/s]
  double beta = 1000.0;   // actuated tracking gain [1/s]
  double dt = 1e-3;       // step [s]

  /// Throws InvalidArgument unless alpha, beta, dt > 0 and alpha dt, beta dt < 2.
  void validate() const;
};

struct EstimatorState {
  VecX theta;
  VecX theta_dot;
  double closure_error_norm = 0.0;  // of theta
  long iteration = 0;

  static EstimatorState from(const MechanismModel& model, const VecX& theta);
};

struct MeasurementSet {
  VecX actuated_position;
  VecX actuated_velocity;
  /// Absolute passive measurements (passive DOF index, value).
  std::vector<std::pair<int, double>> absolute;
};

/// One estimator update: actuated rates track the measurements, passive rates
/// follow the closure with exponential correction of the closure error.
EstimatorState estimator_step(const MechanismModel& model, const EstimatorState& state,
                              const MeasurementSet& measurements, const EstimatorConfig& config);

struct CalibrationConfig {
  double alpha = 1.0;
  double dt = 1.0;
  double tolerance = 1e-4;  // stop when ||e|| < tolerance
  int max_iterations = 100;
};

struct CalibrationResult {
  VecX theta;
  int iterations = 0;
  std::vector<double> error_norms;  // ||e|| before every iteration and at the end
  /// theta_a(calibrated) - theta_a(initial): offsets to add to relative encoders.
  VecX actuator_offsets;
};

/// Solves [J_l; E] theta_dot = alpha e iteratively with e = [closure correction; measurement error].
/// Throws SingularAugmentedSystem or MaxIterations.
CalibrationResult calibrate(const MechanismModel& model, const VecX& initial_theta,
                            const std::vector<std::pair<int, double>>& absolute,
                            const CalibrationConfig& config = {});

struct ContactWrench {
  std::string name;
  std::string group;
  Vec3 position = Vec3::Zero();  // world
  Vec3 force = Vec3::Zero();     // world
};

struct WrenchSet {
  std::vector<ContactWrench> contacts;
  VecX forces;
  /// ||J^T F - rhs|| of the static balance that was inverted.
  double residual = 0.0;
  int rank = 0;
  bool rank_deficient = false;
};

struct WrenchOptions {
  /// Also enforce the floating-base equilibrium rows g_b = J_cb^T F (floating models only).
  bool include_base_rows = true;
  /// Throw RankDeficientContactMap instead of returning the minimum-norm solution.
  bool require_full_rank = false;
};

/// Quasi-static contact forces from measured actuated forces/torques.
WrenchSet static_wrench_estimate(const MechanismModel& model, const GeneralizedState& state,
                                 const std::vector<ContactPoint>& contacts, const VecX& measured_torque,
                                 const WrenchOptions& options = {});

/// Axial ball-screw force tau_m 2 pi eta / L.
double ballscrew_force(double motor_torque, double lead, double efficiency);
double ballscrew_force(double motor_torque, const ActuatorSpec& spec);

struct ZmpResult {
  Vec3 zmp = Vec3::Zero();
  std::vector<std::pair<std::string, Vec3>> cop;  // per contact group, sorted by name
  double normal_force = 0.0;
};

/// ZMP and per-group COPs on the horizontal plane z = ground_height.
/// Throws NoSupport when the total normal force is below threshold.
ZmpResult zmp_cop(const std::vector<ContactWrench>& wrenches, double ground_height = 0.0,
                  double force_threshold = 1.0);

/// Second-order Butterworth low-pass filter (bilinear transform, prewarped).
class ButterworthLowpass {
 public:
  ButterworthLowpass(double cutoff_hz, double rate_hz);
  /// Starts from steady state at `value`.
  void reset(double value);
  double step(double x);

 private:
  double b0_, b1_, b2_, a1_, a2_;
  double x1_ = 0.0, x2_ = 0.0, y1_ = 0.0, y2_ = 0.0;
  bool primed_ = false;
};

/// Causal filtering of a whole signal, starting from steady state at the first sample.
std::vector<double> lowpass_filter(const std::vector<double>& signal, double cutoff_hz, double rate_hz);

}  // namespace closedlink
