#include "closedlink/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "closedlink/errors.hpp"
#include "closedlink/parallel.hpp"
#include "closedlink/qp.hpp"
#include "closedlink/spatial.hpp"

namespace closedlink {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double finite_or_inf(double limit) { return std::abs(limit) >= 1e29 ? std::copysign(kInf, limit) : limit; }

// Lift from (base, actuated) or actuated-only velocities to the full velocity
// vector along the closure: passive rows -J_lu^{-1} (J_lb v_b + J_la v_a).
MatX closure_lift(const MechanismModel& model, const ClosureSystem& closure, bool include_base) {
  const int nb = model.base_offset();
  const int m = model.passive_count();
  const int na = model.actuated_count();
  const int base_cols = include_base ? nb : 0;
  MatX lift = MatX::Zero(model.velocity_size(), base_cols + na);
  lift.topLeftCorner(base_cols, base_cols).setIdentity();
  lift.bottomRightCorner(na, na).setIdentity();
  if (m > 0) {
    lift.block(nb, base_cols, m, na) = mapping_jacobian(closure);
    for (int k = 0; k < base_cols; ++k) lift.block(nb, k, m, 1) = -closure.solve_passive(closure.jacobian.col(k));
  }
  return lift;
}

std::vector<int> reported_dofs(const MechanismModel& model, const std::vector<int>& requested) {
  if (!requested.empty()) {
    for (int dof : requested) {
      if (dof < 0 || dof >= model.dof_count()) throw Error(ErrorCode::kInvalidArgument, "selection index out of range");
    }
    return requested;
  }
  if (!model.selection().empty()) return model.selection();
  std::vector<int> actuated(model.actuated_count());
  for (int k = 0; k < model.actuated_count(); ++k) actuated[k] = model.passive_count() + k;
  return actuated;
}

VecX pick(const VecX& v, const std::vector<int>& indices) {
  VecX out(indices.size());
  for (size_t k = 0; k < indices.size(); ++k) out[k] = v[indices[k]];
  return out;
}

// Closure-consistent state with the given actuated values, Newton from `seed`.
GeneralizedState closed_at(const MechanismModel& model, const GeneralizedState& seed, const VecX& actuated) {
  GeneralizedState s = seed;
  s.theta.tail(model.actuated_count()) = actuated;
  return solve_closure(model, s);
}

WorkspaceSample sweep(const MechanismModel& model, const GeneralizedState& start, const VecX& direction, int index,
                      const std::vector<int>& selection, const WorkspaceOptions& options) {
  const int n = model.dof_count();
  const int m = model.passive_count();
  const int na = model.actuated_count();
  VecX lo = model.lower_limits().unaryExpr(&finite_or_inf);
  VecX hi = model.upper_limits().unaryExpr(&finite_or_inf);
  const VecX range = (hi - lo).tail(na);
  WorkspaceSample sample;
  sample.direction = index;
  sample.command = direction;
  const VecX command = direction.cwiseProduct(range) * (options.speed_fraction / options.dt);
  MatX actuated_rows = MatX::Zero(na, n);
  actuated_rows.rightCols(na).setIdentity();
  const MatX identity = MatX::Identity(n, n);

  GeneralizedState s = start;
  QpSolution last;
  try {
    for (int step = 0; step < options.max_steps; ++step) {
      const ClosureSystem closure = constraint_jacobian(model, s);
      QuadraticProgram qp(n);
      qp.add_term(actuated_rows, command);
      if (closure.error.size() > 0) {
        qp.add_equality(closure.jacobian.rightCols(n), -closure.error / options.dt);
      }
      qp.add_inequality(identity, (hi - s.theta) / options.dt, (lo - s.theta) / options.dt);
      last = solve(qp);
      s.theta += options.dt * last.x;
      sample.steps = step + 1;
      if (last.x.norm() < options.stall_speed) {
        sample.stalled = true;
        break;
      }
    }
  } catch (const Error& e) {
    sample.error = e.what();
  }
  for (const ActiveBound& b : last.active_set) sample.binding.push_back({b.row, !b.lower});
  std::sort(sample.binding.begin(), sample.binding.end(),
            [](const BindingLimit& a, const BindingLimit& b) { return a.dof < b.dof || (a.dof == b.dof && a.upper < b.upper); });
  sample.theta = s.theta;
  sample.actuated = s.theta.tail(na);
  sample.selected = pick(s.theta, selection);
  const double slack = 1e-9;
  const bool inside = ((s.theta - lo).array() >= -slack).all() && ((hi - s.theta).array() >= -slack).all();
  const bool closed = m == 0 || closure_error(model, s).norm() <= 1e-6;
  sample.feasible = sample.error.empty() && sample.stalled && inside && closed;
  return sample;
}

}  // namespace

std::vector<VecX> workspace_directions(int actuated, int count) {
  std::vector<VecX> dirs;
  if (actuated == 1) {
    dirs = {VecX::Constant(1, 1.0), VecX::Constant(1, -1.0)};
  } else if (actuated == 2) {
    for (int k = 0; k < count; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / count;
      dirs.push_back((VecX(2) << std::cos(phi), std::sin(phi)).finished());
    }
  } else if (actuated > 2) {
    // Spherical Fibonacci points on the first three actuators' sphere, spread
    // over the rest by a fixed low-discrepancy rotation.
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
      VecX d = VecX::Zero(actuated);
      const double z = 1.0 - 2.0 * (k + 0.5) / count;
      const double r = std::sqrt(1.0 - z * z);
      const double phi = golden * k;
      for (int j = 0; j < actuated; ++j) {
        const double angle = phi * (j + 1) + 0.5 * j;
        d[j] = j == 0 ? z : r * std::cos(angle);
      }
      dirs.push_back(d.normalized());
    }
  }
  return dirs;
}

std::vector<WorkspaceSample> workspace_explore(const MechanismModel& model, const GeneralizedState& start,
                                               const WorkspaceOptions& options) {
  if (!(options.dt > 0.0) || options.directions < 1 || options.max_steps < 1 || !(options.speed_fraction > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "workspace options need dt > 0, directions >= 1 and steps >= 1");
  }
  const int na = model.actuated_count();
  if (na == 0) throw Error(ErrorCode::kInvalidArgument, "model has no actuated DOF");
  const VecX range = (model.upper_limits() - model.lower_limits()).tail(na);
  if ((range.array() >= 1e29).any()) {
    throw Error(ErrorCode::kBadLimits, "workspace exploration needs finite actuator limits");
  }
  check_state(model, start);
  const std::vector<int> selection = reported_dofs(model, options.selection);
  const GeneralizedState closed = model.passive_count() > 0 ? solve_closure(model, start) : start;
  const std::vector<VecX> dirs = workspace_directions(na, options.directions);
  std::vector<WorkspaceSample> samples(dirs.size());
  parallel_for(static_cast<int>(dirs.size()), options.threads,
               [&](int d) { samples[d] = sweep(model, closed, dirs[d], d, selection, options); });
  return samples;
}

MatX projected_frame_jacobian(const MechanismModel& model, const GeneralizedState& state, const FrameRef& frame) {
  const Kinematics kin(model, state);
  const ClosureSystem closure = constraint_jacobian(kin);
  return kin.jacobian(frame) * closure_lift(model, closure, false);
}

double yoshikawa(const MatX& jacobian) {
  if (jacobian.size() == 0) return 0.0;
  const VecX sv = Eigen::JacobiSVD<MatX>(jacobian).singularValues();
  return sv.prod();
}

std::vector<ManipulabilitySample> manipulability_map(const MechanismModel& model, const GeneralizedState& seed,
                                                     const std::string& frame, const ManipulabilityOptions& options) {
  const int na = model.actuated_count();
  if (na == 0) throw Error(ErrorCode::kInvalidArgument, "model has no actuated DOF");
  if (options.grid < 1) throw Error(ErrorCode::kInvalidArgument, "grid needs at least one point per actuator");
  const VecX lo = model.lower_limits().tail(na);
  const VecX hi = model.upper_limits().tail(na);
  if ((lo.array() <= -1e29).any() || (hi.array() >= 1e29).any()) {
    throw Error(ErrorCode::kBadLimits, "manipulability grid needs finite actuator limits");
  }
  check_state(model, seed);
  const FrameRef ref = model.frame(frame);
  long total = 1;
  for (int k = 0; k < na; ++k) total *= options.grid;
  std::vector<ManipulabilitySample> samples(total);
  std::vector<GeneralizedState> solved(total);
  std::vector<bool> ok(total, false);
  const auto value = [&](int k, int i) {
    return options.grid == 1 ? 0.5 * (lo[k] + hi[k]) : lo[k] + (hi[k] - lo[k]) * i / (options.grid - 1);
  };
  for (long flat = 0; flat < total; ++flat) {
    ManipulabilitySample& sample = samples[flat];
    sample.index.assign(na, 0);
    long rest = flat;
    for (int k = na - 1; k >= 0; --k) {
      sample.index[k] = static_cast<int>(rest % options.grid);
      rest /= options.grid;
    }
    sample.actuated.resize(na);
    for (int k = 0; k < na; ++k) sample.actuated[k] = value(k, sample.index[k]);
    // Continuation: start from the grid neighbour one step back along the fastest axis that allows it.
    const GeneralizedState* start = &seed;
    long stride = 1;
    for (int k = na - 1; k >= 0; --k) {
      if (sample.index[k] > 0) {
        if (ok[flat - stride]) start = &solved[flat - stride];
        break;
      }
      stride *= options.grid;
    }
    try {
      solved[flat] = closed_at(model, *start, sample.actuated);
      const Kinematics kin(model, solved[flat]);
      const ClosureSystem closure = constraint_jacobian(kin, options.closure);
      const MatX jp = kin.jacobian(ref) * closure_lift(model, closure, false);
      sample.linear = yoshikawa(jp.topRows(3));
      sample.angular = yoshikawa(jp.bottomRows(3));
      ok[flat] = true;
    } catch (const Error&) {
      sample.singular = true;
    }
  }
  double max_linear = 0.0, max_angular = 0.0;
  for (const auto& s : samples) {
    max_linear = std::max(max_linear, s.linear);
    max_angular = std::max(max_angular, s.angular);
  }
  for (auto& s : samples) {
    s.linear_normalized = max_linear > 0.0 ? s.linear / max_linear : 0.0;
    s.angular_normalized = max_angular > 0.0 ? s.angular / max_angular : 0.0;
  }
  return samples;
}

InertiaAnalysis cartesian_inertia(const MechanismModel& model, const GeneralizedState& state,
                                  const std::string& frame, const InertiaOptions& options) {
  if (!(options.epsilon >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "epsilon must be non-negative");
  check_state(model, state);
  const Kinematics kin(model, state);
  const ClosureSystem closure = constraint_jacobian(kin);
  const MatX lift = closure_lift(model, closure, options.include_base && model.floating_base());
  const MatX mass = lift.transpose() * joint_space_inertia(kin) * lift;
  const MatX jac = kin.jacobian(model.frame(frame)) * lift;
  const Eigen::LLT<MatX> mass_llt(mass);
  if (mass.rows() == 0 || mass_llt.info() != Eigen::Success || mass_llt.rcond() < 1e-14) {
    throw Error(ErrorCode::kInvalidModel, "projected joint-space inertia is singular");
  }
  Mat6 mobility = jac * mass_llt.solve(jac.transpose());
  mobility = 0.5 * (mobility + mobility.transpose()) + options.epsilon * Mat6::Identity();
  const Eigen::SelfAdjointEigenSolver<Mat6> eig(mobility);
  if (!(eig.eigenvalues()[0] > 1e-12 * std::max(eig.eigenvalues()[5], 1e-300))) {
    throw Error(ErrorCode::kSingularTaskMap, "Cartesian mobility is singular at frame '" + frame +
                                                 "'; use a positive epsilon");
  }
  InertiaAnalysis out;
  out.epsilon = options.epsilon;
  out.lambda = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  out.lambda = 0.5 * (out.lambda + out.lambda.transpose()).eval();
  out.column_norms = out.lambda.colwise().norm().transpose();
  return out;
}

Vec6 inertia_ratio(const Mat6& reference, const Mat6& test) {
  Vec6 chi;
  for (int j = 0; j < 6; ++j) {
    const double denominator = test.col(j).norm();
    if (!(denominator > 0.0)) throw Error(ErrorCode::kInvalidArgument, "test inertia has a zero column");
    chi[j] = reference.col(j).norm() / denominator;
  }
  return chi;
}

CentroidalQuantities centroidal_momentum(const MechanismModel& model, const GeneralizedState& state) {
  check_state(model, state);
  const Kinematics kin(model, state);
  const int links = static_cast<int>(model.links().size());
  const int nv = model.velocity_size();
  CentroidalQuantities out;
  out.mass = model.total_mass();
  if (!(out.mass > 0.0)) throw Error(ErrorCode::kInvalidModel, "centroidal momentum needs positive total mass");

  std::vector<Vec3> com(links);
  for (int i = 0; i < links; ++i) {
    const LinkState& ls = kin.link(i);
    com[i] = ls.position + ls.rotation * model.links()[i].com;
    out.com += model.links()[i].mass * com[i];
  }
  out.com /= out.mass;

  out.system_jacobian.resize(6 * links, nv);
  out.system_inertia = MatX::Zero(6 * links, 6 * links);
  out.centroid_map = MatX::Zero(6 * links, 6);
  for (int i = 0; i < links; ++i) {
    const Link& link = model.links()[i];
    const Mat3& r = kin.link(i).rotation;
    out.system_jacobian.middleRows(6 * i, 6) = kin.jacobian(FrameRef{i, Transform{Mat3::Identity(), link.com}});
    out.system_inertia.block(6 * i, 6 * i, 3, 3) = link.mass * Mat3::Identity();
    out.system_inertia.block(6 * i + 3, 6 * i + 3, 3, 3) = r * link.inertia * r.transpose();
    // Motion at the centroid seen at the link COM: v_i = v_G - [r_i]x w.
    out.centroid_map.block(6 * i, 0, 3, 3) = Mat3::Identity();
    out.centroid_map.block(6 * i, 3, 3, 3) = -skew(com[i] - out.com);
    out.centroid_map.block(6 * i + 3, 3, 3, 3) = Mat3::Identity();
  }
  out.system_momentum = out.system_inertia * out.system_jacobian;
  out.cmm = out.centroid_map.transpose() * out.system_momentum;
  out.momentum = out.cmm * state.velocity(model);
  const ClosureSystem closure = constraint_jacobian(kin);
  if (!closure.singular) out.projected_cmm = out.cmm * closure_lift(model, closure, true);
  return out;
}

Vec3 camm_ratio(const MatX& reference, const MatX& test, int base_columns) {
  if (reference.rows() != 3 || test.rows() != 3 || reference.cols() != test.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "CAMM comparison needs two 3-row matrices with matching columns");
  }
  if (base_columns < 0 || base_columns > reference.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "base column count out of range");
  }
  const int cols = static_cast<int>(reference.cols()) - base_columns;
  Vec3 gamma;
  for (int r = 0; r < 3; ++r) {
    const double denominator = test.row(r).tail(cols).norm();
    if (!(denominator > 0.0)) throw Error(ErrorCode::kInvalidArgument, "test CAMM has a zero row");
    gamma[r] = reference.row(r).tail(cols).norm() / denominator;
  }
  return gamma;
}

std::vector<TransmissionSample> transmission_curve(const MechanismModel& model, const GeneralizedState& seed,
                                                   const std::string& actuator, const std::string& output,
                                                   double lo, double hi, int samples,
                                                   const TransmissionOptions& options) {
  if (samples < 2) throw Error(ErrorCode::kInvalidArgument, "transmission sweep needs at least two samples");
  check_state(model, seed);
  const int dof = model.dof_index(actuator);
  if (dof < model.passive_count()) throw Error(ErrorCode::kInvalidArgument, "'" + actuator + "' is not actuated");
  const int column = dof - model.passive_count();
  const double lower = model.lower_limits()[dof], upper = model.upper_limits()[dof];
  if (lo < lower - 1e-12 || hi > upper + 1e-12) {
    throw Error(ErrorCode::kOutOfRange, "sweep leaves the limits of '" + actuator + "'");
  }
  const std::optional<int> output_dof = model.find_dof(output);
  const std::optional<FrameRef> output_frame =
      output_dof ? std::nullopt : std::optional<FrameRef>(model.frame(output));
  const Vec3 direction = options.direction.normalized();

  std::vector<TransmissionSample> curve(samples);
  GeneralizedState s = seed;
  std::optional<Vec3> origin;
  for (int k = 0; k < samples; ++k) {
    TransmissionSample& sample = curve[k];
    sample.actuator = lo + (hi - lo) * k / (samples - 1);
    try {
      GeneralizedState next = s;
      if (k > 0 && model.passive_count() > 0) {
        // DFK predictor from the previous sample.
        const ClosureSystem previous = constraint_jacobian(model, s, options.closure);
        next.theta.head(model.passive_count()) +=
            mapping_jacobian(previous).col(column) * (sample.actuator - curve[k - 1].actuator);
      }
      next.theta[dof] = sample.actuator;
      if (model.passive_count() > 0) next = solve_closure(model, next);
      const Kinematics kin(model, next);
      const ClosureSystem closure = constraint_jacobian(kin, options.closure);
      const VecX lift = closure_lift(model, closure, false).col(column);
      if (output_dof) {
        sample.output = next.theta[*output_dof];
        sample.ratio = lift[model.base_offset() + *output_dof];
      } else {
        const Vec3 p = kin.pose(*output_frame).position;
        if (!origin) origin = p;
        sample.output = direction.dot(p - *origin);
        sample.ratio = direction.dot(kin.jacobian(*output_frame).topRows(3) * lift);
      }
      if (std::abs(sample.ratio) > 1e-12) {
        sample.output_force = options.input_force / sample.ratio;
      } else {
        sample.singular = true;
      }
      s = next;
    } catch (const Error&) {
      sample.singular = true;
    }
  }
  return curve;
}

}  // namespace closedlink
