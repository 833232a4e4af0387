#include "closedlink/dynamics.hpp"

#include <cmath>

#include "closedlink/errors.hpp"

namespace closedlink {

namespace {

// Local tangent basis: the coordinate axis least aligned with the normal,
// made orthogonal to it.
Mat3 local_contact_frame(const Vec3& normal) {
  const Vec3 n = normal.normalized();
  int axis = 0;
  for (int k = 1; k < 3; ++k) {
    if (std::abs(n[k]) < std::abs(n[axis])) axis = k;
  }
  const Vec3 t1 = (Vec3::Unit(axis) - n[axis] * n).normalized();
  Mat3 frame;
  frame << t1, n.cross(t1), n;
  return frame;
}

void require_components(const DynamicsComponents& c, const VecX& acceleration, const VecX& forces) {
  if (acceleration.size() != c.velocity_size() || forces.size() != c.contact_jacobian.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "acceleration or force vector has wrong size");
  }
}

void check_task(const TaskSpec& task, int velocity_size) {
  if (task.jacobian.cols() != velocity_size || task.jacobian.rows() != task.desired.size() ||
      task.bias.size() != task.desired.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "task dimensions do not match the model");
  }
  if (task.epsilon < 0.0 || task.gamma < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "task regularization weights must be non-negative");
  }
  if (task.cone_edges < 3) throw Error(ErrorCode::kInvalidArgument, "friction cone needs at least 3 faces");
}

MatX stacked_cones(const DynamicsComponents& c, int edges) {
  const int nc = static_cast<int>(c.contacts.size());
  MatX g = MatX::Zero(nc * (edges + 1), 3 * nc);
  for (int i = 0; i < nc; ++i) {
    g.block(i * (edges + 1), 3 * i, edges + 1, 3) = friction_cone(c.contact_frames[i], c.contacts[i].mu, edges);
  }
  return g;
}

// Shared QP layout: x = [acceleration (na); forces (3c)].
AccelerationAndForces solve_task_qp(const DynamicsComponents& c, int na, const MatX& task_jacobian,
                                    const VecX& task_rhs, const MatX& accel_reg, const VecX& accel_reg_rhs,
                                    const MatX& base_rows, const VecX& base_rhs, const MatX& contact_rows,
                                    const VecX& contact_rhs, const MatX& loop_rows, const VecX& loop_rhs,
                                    const TaskSpec& task, const QpOptions& options) {
  const int nf = static_cast<int>(c.contact_jacobian.rows());
  QuadraticProgram qp(na + nf);
  MatX a = MatX::Zero(task_jacobian.rows(), na + nf);
  a.leftCols(na) = task_jacobian;
  qp.add_term(a, task_rhs);
  MatX reg = MatX::Zero(accel_reg.rows(), na + nf);
  reg.leftCols(na) = accel_reg;
  qp.add_term(reg, accel_reg_rhs, task.epsilon);
  qp.add_regularization(na, nf, task.gamma);

  if (base_rows.rows() > 0) {
    MatX eq(base_rows.rows(), na + nf);
    eq << base_rows, -c.contact_base().transpose();
    qp.add_equality(eq, base_rhs);
  }
  if (nf > 0) {
    MatX eq = MatX::Zero(nf, na + nf);
    eq.leftCols(na) = contact_rows;
    qp.add_equality(eq, contact_rhs);
    MatX g = MatX::Zero(0, na + nf);
    const MatX cones = stacked_cones(c, task.cone_edges);
    g.resize(cones.rows(), na + nf);
    g << MatX::Zero(cones.rows(), na), cones;
    qp.add_inequality(g, VecX::Zero(cones.rows()));
  }
  if (loop_rows.rows() > 0) {
    MatX eq = MatX::Zero(loop_rows.rows(), na + nf);
    eq.leftCols(na) = loop_rows;
    qp.add_equality(eq, loop_rhs);
  }
  AccelerationAndForces out;
  out.qp = solve(qp, options);
  out.acceleration = out.qp.x.head(na);
  out.forces = out.qp.x.tail(nf);
  return out;
}

}  // namespace

DynamicsComponents assemble(const MechanismModel& model, const GeneralizedState& state) {
  return assemble(model, state, model.contacts());
}

DynamicsComponents assemble(const MechanismModel& model, const GeneralizedState& state,
                            const std::vector<ContactPoint>& contacts) {
  const Kinematics kin(model, state);
  DynamicsComponents c;
  c.base = model.base_offset();
  c.passive = model.passive_count();
  c.actuated = model.actuated_count();
  c.mass = joint_space_inertia(kin);
  c.nonlinear = nonlinear_terms(kin);
  c.contacts = contacts;
  const int nc = static_cast<int>(contacts.size());
  c.contact_jacobian.resize(3 * nc, model.velocity_size());
  c.contact_bias.resize(3 * nc);
  for (int i = 0; i < nc; ++i) {
    const ContactPoint& cp = contacts[i];
    if (cp.link < 0 || cp.link >= static_cast<int>(model.links().size())) {
      throw Error(ErrorCode::kUnknownFrame, "contact '" + cp.name + "' refers to an unknown link");
    }
    if (!(cp.mu > 0.0)) throw Error(ErrorCode::kInvalidArgument, "contact '" + cp.name + "' needs mu > 0");
    const LinkState& ls = kin.link(cp.link);
    const Vec3 point = ls.position + ls.rotation * cp.position;
    c.contact_jacobian.middleRows(3 * i, 3) = kin.point_jacobian(cp.link, point);
    c.contact_bias.segment<3>(3 * i) = kin.point_acceleration_bias(cp.link, point);
    c.contact_frames.push_back(ls.rotation * local_contact_frame(cp.normal));
  }
  c.closure = constraint_jacobian(kin);
  return c;
}

TaskSpec frame_task(const MechanismModel& model, const GeneralizedState& state, const std::string& frame,
                    const Vec6& desired) {
  const Kinematics kin(model, state);
  const FrameRef ref = model.frame(frame);
  TaskSpec task;
  task.jacobian = kin.jacobian(ref);
  task.bias = kin.acceleration_bias(ref);
  task.desired = desired;
  return task;
}

TaskSpec base_task(const MechanismModel& model, const GeneralizedState& state, const Vec6& desired) {
  if (!model.floating_base()) throw Error(ErrorCode::kInvalidArgument, "model has no floating base");
  return frame_task(model, state, model.links()[model.root_link()].name, desired);
}

MatX friction_cone(const Mat3& frame, double mu, int edges) {
  const Vec3 t1 = frame.col(0);
  const Vec3 t2 = frame.col(1);
  const Vec3 n = frame.col(2);
  MatX g(edges + 1, 3);
  for (int k = 0; k < edges; ++k) {
    const double angle = 2.0 * M_PI * k / edges;
    const Vec3 face = std::cos(angle) * t1 + std::sin(angle) * t2;
    // Exact zeros on the axis-aligned faces keep the default pyramid symmetric.
    const Vec3 clean = face.unaryExpr([](double v) { return std::abs(v) < 1e-15 ? 0.0 : v; });
    g.row(k) = (clean - mu * n).transpose();
  }
  g.row(edges) = -n.transpose();
  return g;
}

AccelerationAndForces qp_inverse_dynamics(const DynamicsComponents& c, const TaskSpec& task,
                                          const QpOptions& options) {
  const int nv = c.velocity_size();
  check_task(task, nv);
  if (c.passive > 0) c.closure.require_regular();
  return solve_task_qp(c, nv, task.jacobian, task.desired - task.bias, MatX::Identity(nv, nv), VecX::Zero(nv),
                       c.mass_base(), -c.nonlinear_base(), c.contact_jacobian, -c.contact_bias,
                       c.closure.jacobian, -c.closure.bias, task, options);
}

VecX lagrange_multipliers(const DynamicsComponents& c, const VecX& acceleration, const VecX& forces) {
  require_components(c, acceleration, forces);
  if (c.passive == 0) return VecX::Zero(0);
  c.closure.require_regular();
  return c.closure.solve_passive_transpose(c.mass_passive() * acceleration + c.nonlinear_passive() -
                                           c.contact_passive().transpose() * forces);
}

VecX actuated_torques(const DynamicsComponents& c, const VecX& acceleration, const VecX& forces,
                      const VecX& multipliers) {
  require_components(c, acceleration, forces);
  if (multipliers.size() != c.passive) throw Error(ErrorCode::kDimensionMismatch, "multiplier vector has wrong size");
  VecX tau = c.mass_actuated() * acceleration + c.nonlinear_actuated() - c.contact_actuated().transpose() * forces;
  if (c.passive > 0) tau -= c.closure.actuated_block.transpose() * multipliers;
  return tau;
}

VecX ProjectedDynamics::lifted(const VecX& reduced_acceleration) const {
  if (reduced_acceleration.size() != reduced) {
    throw Error(ErrorCode::kDimensionMismatch, "reduced acceleration has wrong size");
  }
  return lift * reduced_acceleration + lift_offset;
}

MatX ProjectedDynamics::task_jacobian(const TaskSpec& task) const {
  check_task(task, full.velocity_size());
  return task.jacobian * lift;
}

VecX ProjectedDynamics::task_bias(const TaskSpec& task) const {
  check_task(task, full.velocity_size());
  return task.bias + task.jacobian * lift_offset;
}

ProjectedDynamics project(const DynamicsComponents& c) {
  ProjectedDynamics p;
  p.full = c;
  const int nb = c.base;
  const int m = c.passive;
  const int na = c.actuated;
  const int nv = c.velocity_size();
  p.reduced = nb + na;
  p.lift = MatX::Zero(nv, p.reduced);
  p.lift_offset = VecX::Zero(nv);
  p.lift.topLeftCorner(nb, nb).setIdentity();
  p.lift.bottomRightCorner(na, na).setIdentity();
  MatX jm = MatX::Zero(m, na);
  if (m > 0) {
    c.closure.require_regular();
    jm = c.closure.mapping;
    // Passive rows: theta_ddot_u = -J_lu^{-1} (J_lb nu_dot_b + J_la theta_ddot_a + bias).
    const MatX jlb = c.closure.jacobian.leftCols(nb);
    for (int k = 0; k < nb; ++k) p.lift.block(nb, k, m, 1) = -c.closure.solve_passive(jlb.col(k));
    p.lift.block(nb, nb, m, na) = jm;
    p.lift_offset.segment(nb, m) = -c.closure.solve_passive(c.closure.bias);
  }
  const MatX mb = c.mass_base(), mu = c.mass_passive(), ma = c.mass_actuated();
  p.mass_base = mb * p.lift;
  p.mass_passive = mu * p.lift;
  p.mass_actuated = ma * p.lift;
  p.nonlinear_base = c.nonlinear_base() + mb * p.lift_offset;
  p.nonlinear_passive = c.nonlinear_passive() + mu * p.lift_offset;
  p.nonlinear_actuated = c.nonlinear_actuated() + ma * p.lift_offset;
  p.mass_joint = p.mass_actuated + jm.transpose() * p.mass_passive;
  p.nonlinear_joint = p.nonlinear_actuated + jm.transpose() * p.nonlinear_passive;
  p.contact_jacobian = c.contact_jacobian * p.lift;
  p.contact_bias = c.contact_bias + c.contact_jacobian * p.lift_offset;
  p.contact_joint = c.contact_actuated() + c.contact_passive() * jm;
  return p;
}

AccelerationAndForces projected_qp_inverse_dynamics(const ProjectedDynamics& p, const TaskSpec& task,
                                                    const QpOptions& options) {
  const DynamicsComponents& c = p.full;
  check_task(task, c.velocity_size());
  // The loop constraint holds by construction of the lift; ||nu_dot||^2 is
  // regularized on the lifted accelerations so both formulations share one objective.
  return solve_task_qp(c, p.reduced, p.task_jacobian(task), task.desired - p.task_bias(task), p.lift,
                       -p.lift_offset, p.mass_base, -p.nonlinear_base, p.contact_jacobian, -p.contact_bias,
                       MatX(0, p.reduced), VecX(0), task, options);
}

VecX projected_lagrange_multipliers(const ProjectedDynamics& p, const VecX& reduced_acceleration,
                                    const VecX& forces) {
  const DynamicsComponents& c = p.full;
  if (reduced_acceleration.size() != p.reduced || forces.size() != c.contact_jacobian.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "acceleration or force vector has wrong size");
  }
  if (c.passive == 0) return VecX::Zero(0);
  return c.closure.solve_passive_transpose(p.mass_passive * reduced_acceleration + p.nonlinear_passive -
                                           c.contact_passive().transpose() * forces);
}

VecX projected_actuated_torques(const ProjectedDynamics& p, const VecX& reduced_acceleration, const VecX& forces,
                                const VecX& multipliers) {
  const DynamicsComponents& c = p.full;
  if (reduced_acceleration.size() != p.reduced || forces.size() != c.contact_jacobian.rows() ||
      multipliers.size() != c.passive) {
    throw Error(ErrorCode::kDimensionMismatch, "acceleration, force or multiplier vector has wrong size");
  }
  VecX tau = p.mass_actuated * reduced_acceleration + p.nonlinear_actuated - c.contact_actuated().transpose() * forces;
  if (c.passive > 0) tau -= c.closure.actuated_block.transpose() * multipliers;
  return tau;
}

InverseDynamicsResult inverse_dynamics(const DynamicsComponents& c, const TaskSpec& task, const QpOptions& options) {
  AccelerationAndForces step = qp_inverse_dynamics(c, task, options);
  InverseDynamicsResult r;
  r.acceleration = step.acceleration;
  r.forces = step.forces;
  r.multipliers = lagrange_multipliers(c, r.acceleration, r.forces);
  r.torques = actuated_torques(c, r.acceleration, r.forces, r.multipliers);
  r.qp = std::move(step.qp);
  return r;
}

InverseDynamicsResult projected_inverse_dynamics(const ProjectedDynamics& p, const TaskSpec& task,
                                                 const QpOptions& options) {
  AccelerationAndForces step = projected_qp_inverse_dynamics(p, task, options);
  InverseDynamicsResult r;
  r.acceleration = p.lifted(step.acceleration);
  r.forces = step.forces;
  r.multipliers = projected_lagrange_multipliers(p, step.acceleration, r.forces);
  r.torques = projected_actuated_torques(p, step.acceleration, r.forces, r.multipliers);
  r.qp = std::move(step.qp);
  return r;
}

}  // namespace closedlink
