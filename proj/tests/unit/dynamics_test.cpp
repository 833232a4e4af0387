#include <gtest/gtest.h>

#include "closedlink/dynamics.hpp"
#include "closedlink/examples.hpp"
#include "test_models.hpp"

using namespace closedlink;
using namespace testing_support;

namespace {

const MechanismModel& minileg() {
  static const MechanismModel model = MechanismModel::from_document(examples::minileg_document());
  return model;
}

// Random crouched stance with small base tilt; velocities keep both feet and
// all loops still.
GeneralizedState random_stance(std::mt19937& rng, double velocity_scale = 0.2) {
  GeneralizedState st = examples::minileg_crouched_state(minileg(), uniform(rng, 0.1, 0.3));
  st.base_orientation = Eigen::Quaterniond(rotation_exp(random_vector(rng, 3, 0.05)));
  const DynamicsComponents c = assemble(minileg(), st);
  MatX constraints(c.contact_jacobian.rows() + c.closure.jacobian.rows(), c.velocity_size());
  constraints << c.contact_jacobian, c.closure.jacobian;
  Eigen::FullPivLU<MatX> lu(constraints);
  const MatX free = lu.kernel();
  st.set_velocity(minileg(), free * random_vector(rng, static_cast<int>(free.cols()), velocity_scale));
  return st;
}

VecX equation_of_motion_residual(const DynamicsComponents& c, const VecX& acc, const VecX& f, const VecX& lambda,
                                 const VecX& tau) {
  VecX s_tau = VecX::Zero(c.velocity_size());
  s_tau.tail(c.actuated) = tau;
  return c.mass * acc + c.nonlinear - s_tau - c.contact_jacobian.transpose() * f -
         c.closure.jacobian.transpose() * lambda;
}

double normal_force_sum(const DynamicsComponents& c, const VecX& f) {
  double sum = 0.0;
  for (size_t i = 0; i < c.contacts.size(); ++i) sum += c.contact_frames[i].col(2).dot(f.segment<3>(3 * i));
  return sum;
}

}  // namespace

TEST(Assemble, WithoutContactsOrLoopsIsPlainFloatingDynamics) {
  std::mt19937 rng(21);
  const MechanismModel model = MechanismModel::from_document(random_tree(rng, 5, true));
  const GeneralizedState st = random_state(rng, model);
  const DynamicsComponents c = assemble(model, st, {});
  EXPECT_EQ(c.contact_jacobian.rows(), 0);
  EXPECT_EQ(c.closure.jacobian.rows(), 0);
  EXPECT_EQ((c.mass - joint_space_inertia(model, st)).norm(), 0.0);
  EXPECT_EQ((c.nonlinear - nonlinear_terms(model, st)).norm(), 0.0);
}

TEST(Assemble, BlockSplitsReconcatenateExactly) {
  const DynamicsComponents c = assemble(minileg(), examples::minileg_crouched_state(minileg()));
  MatX m(c.mass.rows(), c.mass.cols());
  m << c.mass_base(), c.mass_passive(), c.mass_actuated();
  VecX h(c.nonlinear.size());
  h << c.nonlinear_base(), c.nonlinear_passive(), c.nonlinear_actuated();
  MatX jc(c.contact_jacobian.rows(), c.contact_jacobian.cols());
  jc << c.contact_base(), c.contact_passive(), c.contact_actuated();
  EXPECT_EQ((m - c.mass).norm(), 0.0);
  EXPECT_EQ((h - c.nonlinear).norm(), 0.0);
  EXPECT_EQ((jc - c.contact_jacobian).norm(), 0.0);
  EXPECT_EQ(c.base, 6);
  EXPECT_EQ(c.passive, 12);
  EXPECT_EQ(c.actuated, 6);
  EXPECT_EQ(c.contact_jacobian.rows(), 24);
}

TEST(FrictionCone, DefaultPyramidBoundsEachTangentialComponent) {
  const MatX g = friction_cone(Mat3::Identity(), 0.5, 4);
  EXPECT_EQ(g.rows(), 5);
  EXPECT_LE((g * Vec3(0.5, 0.0, 1.0)).maxCoeff(), 1e-15);
  EXPECT_LE((g * Vec3(0.5, -0.5, 1.0)).maxCoeff(), 1e-15);
  EXPECT_GT((g * Vec3(0.51, 0.0, 1.0)).maxCoeff(), 0.0);
  EXPECT_GT((g * Vec3(0.0, 0.0, -1.0)).maxCoeff(), 0.0);
  EXPECT_EQ(friction_cone(Mat3::Identity(), 0.5, 8).rows(), 9);
}

TEST(QpInverseDynamics, StaticStanceCarriesTheWeight) {
  const GeneralizedState st = examples::minileg_crouched_state(minileg());
  const DynamicsComponents c = assemble(minileg(), st);
  const auto out = qp_inverse_dynamics(c, base_task(minileg(), st, Vec6::Zero()));
  const double weight = minileg().total_mass() * 9.81;
  EXPECT_LE(out.acceleration.norm(), 1e-6);
  EXPECT_NEAR(normal_force_sum(c, out.forces) / weight, 1.0, 1e-6);
  EXPECT_LE(out.qp.residuals.max(), 1e-8);
}

TEST(QpInverseDynamics, ZeroGravityAtRestGivesZeros) {
  MechanismDocument doc = examples::minileg_document();
  doc.gravity = Vec3::Zero();
  const MechanismModel model = MechanismModel::from_document(doc);
  const GeneralizedState st = examples::minileg_crouched_state(model);
  const auto out = inverse_dynamics(assemble(model, st), base_task(model, st, Vec6::Zero()));
  EXPECT_LE(out.acceleration.norm(), 1e-12);
  EXPECT_LE(out.forces.norm(), 1e-12);
  EXPECT_LE(out.torques.norm(), 1e-12);
}

TEST(QpInverseDynamics, SaturatedFrictionLiesOnConeBoundary) {
  // A body sliding on an actuated rail over a pad; every mass sits at contact
  // height so the contact force produces no moment.
  MechanismDocument doc;
  doc.name = "slider";
  doc.links = {{"body", 1.0, Vec3::Zero(), examples::box_inertia(1.0, Vec3(0.2, 0.2, 0.2))},
               {"pad", 0.1, Vec3::Zero(), examples::box_inertia(0.1, Vec3(0.05, 0.05, 0.05))}};
  JointRecord base{"base", JointType::kFloating, "world", "body"};
  JointRecord rail{"rail", JointType::kPrismatic, "body", "pad"};
  rail.axis = Vec3::UnitX();
  rail.actuated = true;
  doc.joints = {base, rail};
  ContactRecord contact;
  contact.name = "pad";
  contact.link = "pad";
  contact.normal = Vec3::UnitZ();
  contact.mu = 0.5;
  doc.contacts = {contact};
  const MechanismModel model = MechanismModel::from_document(doc);
  const GeneralizedState st = GeneralizedState::zero(model);
  const DynamicsComponents c = assemble(model, st);
  Vec6 desired = Vec6::Zero();
  desired[0] = 0.6 * 1.1 * 9.81;  // needs tangential force 0.6 F_n
  const auto out = qp_inverse_dynamics(c, base_task(model, st, desired));
  const Vec3 f = out.forces;
  EXPECT_NEAR(f.z(), 1.1 * 9.81, 1e-8);
  EXPECT_NEAR(std::abs(f.x()), 0.5 * f.z(), 1e-8);
  EXPECT_LE(out.qp.residuals.max(), 1e-8);
}

TEST(QpInverseDynamics, ReturnedForcesRespectFrictionAndBaseBalance) {
  std::mt19937 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const GeneralizedState st = random_stance(rng);
    const DynamicsComponents c = assemble(minileg(), st);
    const auto out = qp_inverse_dynamics(c, base_task(minileg(), st, random_vector(rng, 6, 0.5)));
    for (size_t i = 0; i < c.contacts.size(); ++i) {
      const Vec3 local = c.contact_frames[i].transpose() * out.forces.segment<3>(3 * i);
      EXPECT_GE(local.z(), -1e-10);
      EXPECT_LE(std::abs(local.x()), c.contacts[i].mu * local.z() + 1e-8);
      EXPECT_LE(std::abs(local.y()), c.contacts[i].mu * local.z() + 1e-8);
    }
    const VecX base = c.mass_base() * out.acceleration + c.nonlinear_base() - c.contact_base().transpose() * out.forces;
    EXPECT_LE(base.lpNorm<Eigen::Infinity>(), 1e-9);
    EXPECT_LE(out.qp.residuals.max(), 1e-8);
  }
}

TEST(LagrangeMultipliers, EmptyWithoutLoops) {
  std::mt19937 rng(23);
  const MechanismModel model = MechanismModel::from_document(random_tree(rng, 3, true));
  const DynamicsComponents c = assemble(model, random_state(rng, model), {});
  EXPECT_EQ(lagrange_multipliers(c, VecX::Zero(c.velocity_size()), VecX(0)).size(), 0);
}

TEST(LagrangeMultipliers, FixedBaseCrankMatchesClosedChainInverseDynamics) {
  const MechanismModel crank = MechanismModel::from_document(examples::crank_document());
  GeneralizedState st = GeneralizedState::zero(crank);
  st.theta = examples::CrankOracle().configuration_from_actuator(0.007);
  const DynamicsComponents c = assemble(crank, st, {});
  const VecX acc = VecX::Zero(3);
  const VecX lambda = lagrange_multipliers(c, acc, VecX(0));
  const auto reference = closed_chain_inverse_dynamics(crank, st, acc);
  EXPECT_LE((lambda - reference.multipliers).norm(), 1e-10);
  EXPECT_LE((actuated_torques(c, acc, VecX(0), lambda) - reference.torque).norm(), 1e-10);
}

TEST(ThreeStepScheme, SatisfiesFullEquationsOfMotion) {
  std::mt19937 rng(24);
  for (int trial = 0; trial < 20; ++trial) {
    const GeneralizedState st = random_stance(rng);
    const DynamicsComponents c = assemble(minileg(), st);
    const auto out = inverse_dynamics(c, base_task(minileg(), st, random_vector(rng, 6, 0.5)));
    const VecX passive_rows = c.mass_passive() * out.acceleration + c.nonlinear_passive() -
                              c.contact_passive().transpose() * out.forces -
                              c.closure.passive_block.transpose() * out.multipliers;
    EXPECT_LE(passive_rows.lpNorm<Eigen::Infinity>(), 1e-9);
    EXPECT_LE(equation_of_motion_residual(c, out.acceleration, out.forces, out.multipliers, out.torques)
                  .lpNorm<Eigen::Infinity>(), 1e-8);
  }
}

TEST(ActuatedTorques, FreeFallNeedsNoTorque) {
  const GeneralizedState st = examples::minileg_crouched_state(minileg());
  const DynamicsComponents c = assemble(minileg(), st, {});
  VecX acc = VecX::Zero(c.velocity_size());
  acc.head<3>() = minileg().gravity();
  const VecX lambda = lagrange_multipliers(c, acc, VecX(0));
  EXPECT_LE(lambda.norm(), 1e-10);
  EXPECT_LE(actuated_torques(c, acc, VecX(0), lambda).norm(), 1e-10);
}

TEST(Project, WithoutLoopsIsIdentity) {
  std::mt19937 rng(25);
  const MechanismModel model = MechanismModel::from_document(random_tree(rng, 4, true));
  const DynamicsComponents c = assemble(model, random_state(rng, model), {});
  const ProjectedDynamics p = project(c);
  EXPECT_EQ((p.lift - MatX::Identity(c.velocity_size(), c.velocity_size())).norm(), 0.0);
  EXPECT_EQ(p.lift_offset.norm(), 0.0);
  EXPECT_EQ((p.mass_base - c.mass_base()).norm(), 0.0);
}

TEST(Project, LiftedAccelerationsSatisfyClosure) {
  std::mt19937 rng(26);
  const GeneralizedState st = random_stance(rng);
  const DynamicsComponents c = assemble(minileg(), st);
  const ProjectedDynamics p = project(c);
  const VecX acc = p.lifted(random_vector(rng, p.reduced, 1.0));
  EXPECT_LE((c.closure.jacobian * acc + c.closure.bias).norm(), 1e-10);
}

TEST(Project, ProjectedEquationsMatchFullOnLiftedAccelerations) {
  std::mt19937 rng(27);
  for (int trial = 0; trial < 20; ++trial) {
    const GeneralizedState st = random_stance(rng);
    const DynamicsComponents c = assemble(minileg(), st);
    const ProjectedDynamics p = project(c);
    const VecX reduced = random_vector(rng, p.reduced, 1.0);
    const VecX f = random_vector(rng, 24, 50.0);
    const VecX acc = p.lifted(reduced);
    const VecX lambda_full = lagrange_multipliers(c, acc, f);
    const VecX lambda_proj = projected_lagrange_multipliers(p, reduced, f);
    EXPECT_LE((lambda_full - lambda_proj).lpNorm<Eigen::Infinity>(), 1e-9);
    const VecX tau_full = actuated_torques(c, acc, f, lambda_full);
    EXPECT_LE((tau_full - projected_actuated_torques(p, reduced, f, lambda_proj)).lpNorm<Eigen::Infinity>(), 1e-9);
    // Joint-space form without multipliers.
    const VecX tau_joint = p.mass_joint * reduced + p.nonlinear_joint - p.contact_joint.transpose() * f;
    EXPECT_LE((tau_full - tau_joint).lpNorm<Eigen::Infinity>(), 1e-9);
    const VecX base_full = c.mass_base() * acc + c.nonlinear_base();
    EXPECT_LE((base_full - (p.mass_base * reduced + p.nonlinear_base)).lpNorm<Eigen::Infinity>(), 1e-9);

    const TaskSpec task = frame_task(minileg(), st, "l_foot", Vec6::Zero());
    EXPECT_LE((task.jacobian * acc + task.bias - (p.task_jacobian(task) * reduced + p.task_bias(task))).norm(),
              1e-10);
  }
}

TEST(ProjectedQp, HasFewerDecisionVariables) {
  const GeneralizedState st = examples::minileg_crouched_state(minileg());
  const ProjectedDynamics p = project(assemble(minileg(), st));
  const auto out = projected_qp_inverse_dynamics(p, base_task(minileg(), st, Vec6::Zero()));
  EXPECT_EQ(out.qp.x.size(), 6 + 6 + 24);
  EXPECT_LT(out.qp.x.size(), 6 + 18 + 24);
}

TEST(ProjectedQp, MatchesFullPipeline) {
  std::mt19937 rng(28);
  for (int trial = 0; trial < 20; ++trial) {
    const GeneralizedState st = trial == 0 ? examples::minileg_crouched_state(minileg()) : random_stance(rng);
    const DynamicsComponents c = assemble(minileg(), st);
    const TaskSpec task = base_task(minileg(), st, trial == 0 ? Vec6::Zero() : Vec6(random_vector(rng, 6, 0.5)));
    const auto full = inverse_dynamics(c, task);
    const auto proj = projected_inverse_dynamics(project(c), task);
    EXPECT_LE((full.forces - proj.forces).lpNorm<Eigen::Infinity>(), 1e-6);
    EXPECT_LE((full.acceleration - proj.acceleration).lpNorm<Eigen::Infinity>(), 1e-6);
    EXPECT_LE((full.torques - proj.torques).lpNorm<Eigen::Infinity>(), 1e-6);
    EXPECT_LE((full.multipliers - proj.multipliers).lpNorm<Eigen::Infinity>(), 1e-6);
  }
}

TEST(ProjectedQp, ZeroGravityAtRestGivesZeros) {
  MechanismDocument doc = examples::minileg_document();
  doc.gravity = Vec3::Zero();
  const MechanismModel model = MechanismModel::from_document(doc);
  const GeneralizedState st = examples::minileg_crouched_state(model);
  const auto out = projected_inverse_dynamics(project(assemble(model, st)), base_task(model, st, Vec6::Zero()));
  EXPECT_LE(out.acceleration.norm() + out.forces.norm() + out.torques.norm(), 1e-12);
}

TEST(ProjectedQp, RejectsMismatchedTask) {
  const GeneralizedState st = examples::minileg_crouched_state(minileg());
  const ProjectedDynamics p = project(assemble(minileg(), st));
  TaskSpec task;
  task.jacobian = MatX::Zero(6, 3);
  task.bias = VecX::Zero(6);
  task.desired = VecX::Zero(6);
  EXPECT_THROW(projected_qp_inverse_dynamics(p, task), Error);
}

TEST(ProjectedQp, ManyActiveFrictionFacesOnTheLargeModel) {
  // Aggressive base accelerations saturate friction and unload whole contacts,
  // which makes the cone rows degenerate at zero force.
  static const MechanismModel model = MechanismModel::from_document(examples::synthetic_document());
  std::mt19937 rng(31);
  int saturated = 0;
  for (int trial = 0; trial < 8; ++trial) {
    const GeneralizedState st = examples::crouched_state(model, uniform(rng, 0.0, 0.3));
    const DynamicsComponents c = assemble(model, st);
    const TaskSpec task = base_task(model, st, Vec6(random_vector(rng, 6, 30.0)));
    const auto full = inverse_dynamics(c, task);
    const auto proj = projected_inverse_dynamics(project(c), task);
    EXPECT_LE(full.qp.residuals.max(), 1e-8);
    EXPECT_LE(proj.qp.residuals.max(), 1e-8);
    // Most force directions are fixed only by the 1e-12 force weight, so the two
    // formulations agree relative to the force and torque scale.
    EXPECT_LE((full.forces - proj.forces).lpNorm<Eigen::Infinity>(), 1e-5 * full.forces.lpNorm<Eigen::Infinity>());
    EXPECT_LE((full.torques - proj.torques).lpNorm<Eigen::Infinity>(), 1e-5 * full.torques.lpNorm<Eigen::Infinity>());
    saturated += full.qp.active_set.size() >= 4 ? 1 : 0;
  }
  EXPECT_GE(saturated, 4);
}

TEST(CrouchedState, SolesStayLevelOnBothExampleBipeds) {
  static const MechanismModel synthetic = MechanismModel::from_document(examples::synthetic_document());
  for (const MechanismModel* model : {&minileg(), &synthetic}) {
    const GeneralizedState st = examples::crouched_state(*model, 0.2);
    const Kinematics kin(*model, st);
    for (const ContactPoint& c : model->contacts()) {
      EXPECT_NEAR((kin.link(c.link).position + kin.link(c.link).rotation * c.position).z(), 0.0, 1e-12);
    }
    const DynamicsComponents comp = assemble(*model, st);
    const auto out = qp_inverse_dynamics(comp, base_task(*model, st, Vec6::Zero()));
    EXPECT_NEAR(normal_force_sum(comp, out.forces) / (model->total_mass() * 9.81), 1.0, 1e-6);
    EXPECT_LE(out.acceleration.norm(), 1e-6);
  }
}
