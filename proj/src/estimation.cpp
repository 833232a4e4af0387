#include "closedlink/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <Eigen/QR>

#include "closedlink/errors.hpp"
#include "closedlink/spatial.hpp"

namespace closedlink {

namespace {

GeneralizedState configuration(const MechanismModel& model, const VecX& theta) {
  GeneralizedState s = GeneralizedState::zero(model);
  if (theta.size() != model.dof_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "theta has " + std::to_string(theta.size()) + " entries, model has " +
                                                   std::to_string(model.dof_count()) + " DOFs");
  }
  s.theta = theta;
  return s;
}

// Closure Jacobian restricted to the DOF columns.
MatX dof_columns(const ClosureSystem& closure) {
  return closure.jacobian.rightCols(closure.passive + closure.actuated);
}

}  // namespace

void EstimatorConfig::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0) || !(dt > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "estimator gains and step must be positive");
  }
  if (alpha * dt >= 2.0 || beta * dt >= 2.0) {
    throw Error(ErrorCode::kInvalidArgument, "estimator gains too large for the step (need alpha*dt, beta*dt < 2)");
  }
}

EstimatorState EstimatorState::from(const MechanismModel& model, const VecX& theta) {
  EstimatorState est;
  est.theta = theta;
  est.theta_dot = VecX::Zero(model.dof_count());
  est.closure_error_norm = closure_error(model, configuration(model, theta)).norm();
  return est;
}

EstimatorState estimator_step(const MechanismModel& model, const EstimatorState& state,
                              const MeasurementSet& measurements, const EstimatorConfig& config) {
  config.validate();
  const int m = model.passive_count();
  const int na = model.actuated_count();
  if (measurements.actuated_position.size() != na || measurements.actuated_velocity.size() != na) {
    throw Error(ErrorCode::kDimensionMismatch, "measurement vectors must have one entry per actuated DOF");
  }
  const ClosureSystem closure = constraint_jacobian(model, configuration(model, state.theta));

  VecX theta_dot(model.dof_count());
  const VecX actuated_rate = measurements.actuated_velocity +
                             config.beta * (measurements.actuated_position - state.theta.tail(na));
  theta_dot.tail(na) = actuated_rate;
  if (m > 0) {
    // e_l = f - c, so -alpha J_lu^{-1} e_l drives the error to zero at rate alpha.
    theta_dot.head(m) = dfk(closure, actuated_rate) - config.alpha * closure.solve_passive(closure.error);
  }

  EstimatorState next;
  next.theta = state.theta + config.dt * theta_dot;
  next.theta_dot = theta_dot;
  next.closure_error_norm = closure_error(model, configuration(model, next.theta)).norm();
  next.iteration = state.iteration + 1;
  return next;
}

CalibrationResult calibrate(const MechanismModel& model, const VecX& initial_theta,
                            const std::vector<std::pair<int, double>>& absolute, const CalibrationConfig& config) {
  if (!(config.alpha > 0.0) || !(config.dt > 0.0) || !(config.tolerance > 0.0) || config.max_iterations < 0) {
    throw Error(ErrorCode::kInvalidArgument, "calibration gains, step and tolerance must be positive");
  }
  const int n = model.dof_count();
  const int m = model.passive_count();
  const int l = static_cast<int>(absolute.size());
  for (const auto& [index, value] : absolute) {
    if (index < 0 || index >= m) {
      throw Error(ErrorCode::kInvalidArgument, "absolute measurement index " + std::to_string(index) +
                                                   " is not a passive DOF");
    }
  }
  if (model.constraint_rows() + l < n) {
    throw Error(ErrorCode::kSingularAugmentedSystem,
                "augmented system has " + std::to_string(model.constraint_rows() + l) + " rows for " +
                    std::to_string(n) + " unknowns");
  }
  const int rows = model.constraint_rows() + l;

  CalibrationResult result;
  result.theta = initial_theta;
  for (int iter = 0;; ++iter) {
    const ClosureSystem closure = constraint_jacobian(model, configuration(model, result.theta));
    VecX e(rows);
    MatX j = MatX::Zero(rows, n);
    e.head(closure.error.size()) = -closure.error;
    j.topRows(closure.error.size()) = dof_columns(closure);
    for (int k = 0; k < l; ++k) {
      const auto [index, value] = absolute[k];
      e[closure.error.size() + k] = value - result.theta[index];
      j(closure.error.size() + k, index) = 1.0;
    }
    const double norm = e.norm();
    result.error_norms.push_back(norm);
    if (norm < config.tolerance) {
      result.iterations = iter;
      break;
    }
    if (iter == config.max_iterations) {
      throw Error(ErrorCode::kMaxIterations, "calibration did not reach ||e|| < " + std::to_string(config.tolerance) +
                                                 " in " + std::to_string(iter) + " iterations (||e|| = " +
                                                 std::to_string(norm) + ")");
    }
    VecX step;
    if (rows == n) {
      Eigen::FullPivLU<MatX> lu(j);
      if (!lu.isInvertible() || lu.rcond() < 1e-12) {
        throw Error(ErrorCode::kSingularAugmentedSystem,
                    "augmented system [J_l; E] is singular at iteration " + std::to_string(iter));
      }
      step = lu.solve(e);
    } else {
      // Redundant measurements: least-squares step.
      Eigen::CompleteOrthogonalDecomposition<MatX> cod(j);
      cod.setThreshold(1e-10);
      if (cod.rank() < n) {
        throw Error(ErrorCode::kSingularAugmentedSystem,
                    "augmented system [J_l; E] is rank deficient at iteration " + std::to_string(iter));
      }
      step = cod.solve(e);
    }
    result.theta += config.dt * config.alpha * step;
  }
  result.actuator_offsets = result.theta.tail(model.actuated_count()) - initial_theta.tail(model.actuated_count());
  return result;
}

WrenchSet static_wrench_estimate(const MechanismModel& model, const GeneralizedState& state,
                                 const std::vector<ContactPoint>& contacts, const VecX& measured_torque,
                                 const WrenchOptions& options) {
  check_state(model, state);
  const int nb = model.base_offset();
  const int m = model.passive_count();
  const int na = model.actuated_count();
  if (measured_torque.size() != na) {
    throw Error(ErrorCode::kDimensionMismatch, "measured torque needs one entry per actuated DOF");
  }
  // Quasi-static: velocities are ignored.
  GeneralizedState s = state;
  s.base_linear_velocity.setZero();
  s.base_angular_velocity.setZero();
  s.theta_dot = VecX::Zero(model.dof_count());
  const Kinematics kin(model, s);
  const VecX g = gravity_terms(kin);
  const ClosureSystem closure = constraint_jacobian(kin);
  MatX jm = MatX::Zero(m, na);
  if (m > 0) jm = mapping_jacobian(closure);

  const int nc = static_cast<int>(contacts.size());
  MatX jc(3 * nc, model.velocity_size());
  WrenchSet out;
  for (int i = 0; i < nc; ++i) {
    const ContactPoint& cp = contacts[i];
    if (cp.link < 0 || cp.link >= static_cast<int>(model.links().size())) {
      throw Error(ErrorCode::kUnknownFrame, "contact '" + cp.name + "' refers to an unknown link");
    }
    const LinkState& ls = kin.link(cp.link);
    const Vec3 point = ls.position + ls.rotation * cp.position;
    jc.middleRows(3 * i, 3) = kin.point_jacobian(cp.link, point);
    out.contacts.push_back({cp.name, cp.group, point, Vec3::Zero()});
  }

  // Joint rows: tau - g_a - J_m^T g_u = J_cm^T F with J_cm = -(J_ca + J_cu J_m).
  const MatX jcm = -(jc.rightCols(na) + jc.middleCols(nb, m) * jm);
  const VecX joint_rhs = measured_torque - g.tail(na) - jm.transpose() * g.segment(nb, m);
  const int base_rows = (options.include_base_rows && nb > 0) ? nb : 0;
  MatX a(base_rows + na, 3 * nc);
  VecX b(base_rows + na);
  if (base_rows > 0) {
    a.topRows(nb) = jc.leftCols(nb).transpose();
    b.head(nb) = g.head(nb);
  }
  a.bottomRows(na) = jcm.transpose();
  b.tail(na) = joint_rhs;

  if (nc == 0) {
    out.forces = VecX(0);
    out.residual = b.norm();
    return out;
  }
  Eigen::CompleteOrthogonalDecomposition<MatX> cod(a);
  cod.setThreshold(1e-10);
  out.rank = static_cast<int>(cod.rank());
  out.rank_deficient = out.rank < 3 * nc;
  if (out.rank_deficient && options.require_full_rank) {
    throw Error(ErrorCode::kRankDeficientContactMap,
                "contact map has rank " + std::to_string(out.rank) + " for " + std::to_string(3 * nc) + " force components");
  }
  out.forces = cod.solve(b);
  out.residual = (a * out.forces - b).norm();
  for (int i = 0; i < nc; ++i) out.contacts[i].force = out.forces.segment<3>(3 * i);
  return out;
}

double ballscrew_force(double motor_torque, double lead, double efficiency) {
  if (!(lead > 0.0)) throw Error(ErrorCode::kInvalidArgument, "ball-screw lead must be positive");
  if (!(efficiency > 0.0) || efficiency > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "ball-screw efficiency must lie in (0, 1]");
  }
  return motor_torque * 2.0 * std::numbers::pi * efficiency / lead;
}

double ballscrew_force(double motor_torque, const ActuatorSpec& spec) {
  return ballscrew_force(motor_torque, spec.lead, spec.efficiency);
}

ZmpResult zmp_cop(const std::vector<ContactWrench>& wrenches, double ground_height, double force_threshold) {
  // Point on z = h where the horizontal moment components vanish:
  // x = sum(p_x F_z - (p_z - h) F_x) / sum F_z, likewise for y.
  struct Sum {
    double fz = 0.0, mx = 0.0, my = 0.0;
    void add(const ContactWrench& w, double h) {
      fz += w.force.z();
      mx += w.position.x() * w.force.z() - (w.position.z() - h) * w.force.x();
      my += w.position.y() * w.force.z() - (w.position.z() - h) * w.force.y();
    }
    Vec3 point(double h) const { return {mx / fz, my / fz, h}; }
  };
  Sum total;
  std::map<std::string, Sum> groups;
  for (const ContactWrench& w : wrenches) {
    total.add(w, ground_height);
    groups[w.group].add(w, ground_height);
  }
  if (!(total.fz >= force_threshold)) {
    throw Error(ErrorCode::kNoSupport, "total normal force " + std::to_string(total.fz) + " N is below " +
                                           std::to_string(force_threshold) + " N");
  }
  ZmpResult out;
  out.normal_force = total.fz;
  out.zmp = total.point(ground_height);
  for (const auto& [name, sum] : groups) {
    if (sum.fz >= force_threshold) out.cop.emplace_back(name, sum.point(ground_height));
  }
  return out;
}

ButterworthLowpass::ButterworthLowpass(double cutoff_hz, double rate_hz) {
  if (!(rate_hz > 0.0) || !(cutoff_hz > 0.0) || !(cutoff_hz < rate_hz / 2.0)) {
    throw Error(ErrorCode::kInvalidArgument, "filter cutoff must lie in (0, rate/2)");
  }
  const double k = std::tan(std::numbers::pi * cutoff_hz / rate_hz);
  const double k2 = k * k;
  const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k2);
  b0_ = k2 * norm;
  b1_ = 2.0 * b0_;
  b2_ = b0_;
  a1_ = 2.0 * (k2 - 1.0) * norm;
  a2_ = (1.0 - std::numbers::sqrt2 * k + k2) * norm;
}

void ButterworthLowpass::reset(double value) {
  x1_ = x2_ = y1_ = y2_ = value;
  primed_ = true;
}

double ButterworthLowpass::step(double x) {
  if (!primed_) reset(x);
  const double y = b0_ * x + b1_ * x1_ + b2_ * x2_ - a1_ * y1_ - a2_ * y2_;
  x2_ = x1_;
  x1_ = x;
  y2_ = y1_;
  y1_ = y;
  return y;
}

std::vector<double> lowpass_filter(const std::vector<double>& signal, double cutoff_hz, double rate_hz) {
  ButterworthLowpass filter(cutoff_hz, rate_hz);
  std::vector<double> out;
  out.reserve(signal.size());
  for (double x : signal) out.push_back(filter.step(x));
  return out;
}

}  // namespace closedlink
