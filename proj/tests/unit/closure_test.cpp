#include <gtest/gtest.h>

#include <cmath>

#include <Eigen/SVD>

#include "closedlink/closure.hpp"
#include "closedlink/errors.hpp"
#include "closedlink/examples.hpp"
#include "test_models.hpp"

using namespace closedlink;
using namespace testing_support;

namespace {

const MechanismModel& crank_model() {
  static const MechanismModel model = MechanismModel::from_document(examples::crank_document());
  return model;
}

const MechanismModel& diff_model() {
  static const MechanismModel model = MechanismModel::from_document(examples::diff_document());
  return model;
}

const MechanismModel& knee_model() {
  static const MechanismModel model = MechanismModel::from_document(examples::knee_document());
  return model;
}

GeneralizedState crank_state(double s, double s_dot = 0.0) {
  const examples::CrankOracle oracle;
  GeneralizedState st = GeneralizedState::zero(crank_model());
  st.theta = oracle.configuration_from_actuator(s);
  const Eigen::Vector2d jm = oracle.mapping(s);
  st.theta_dot << jm * s_dot, s_dot;
  return st;
}

// A closed configuration on the working branch of each example.
GeneralizedState assembled(const MechanismModel& model) {
  GeneralizedState st = GeneralizedState::zero(model);
  if (&model == &crank_model()) st.theta = examples::CrankOracle().configuration_from_actuator(0.0);
  if (&model == &knee_model()) st.theta = examples::KneeOracle().configuration_from_actuator(0.0);
  return st;
}

template <typename Fn>
void expect_error(ErrorCode code, Fn&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(ClosureError, VanishesAtOracleConfigurations) {
  for (double s : {-0.02, -0.01, 0.0, 0.015, 0.02}) {
    EXPECT_LE(closure_error(crank_model(), crank_state(s)).norm(), 1e-10);
  }
  const examples::DiffOracle diff;
  GeneralizedState st = GeneralizedState::zero(diff_model());
  for (auto [p, r] : {std::pair{0.0, 0.0}, {0.3, -0.2}, {-0.4, 0.35}}) {
    st.theta = diff.configuration_from_platform(p, r);
    EXPECT_LE(closure_error(diff_model(), st).norm(), 1e-10);
  }
  const examples::KneeOracle knee;
  GeneralizedState ks = GeneralizedState::zero(knee_model());
  for (double s : {-0.02, 0.0, 0.02}) {
    ks.theta = knee.configuration_from_actuator(s);
    EXPECT_LE(closure_error(knee_model(), ks).norm(), 1e-10);
  }
}

TEST(ClosureError, PassivePerturbationIsFirstOrderBounded) {
  GeneralizedState st = crank_state(0.005);
  const ClosureSystem cs = constraint_jacobian(crank_model(), st);
  st.theta[0] += 1e-3;
  const double e = closure_error(crank_model(), st).norm();
  EXPECT_GT(e, 0.0);
  EXPECT_LE(e, cs.jacobian.norm() * 1e-3 * 1.1);
}

TEST(ConstraintJacobian, OracleVelocitiesAreAnnihilated) {
  for (double s : {-0.015, 0.0, 0.01}) {
    const GeneralizedState st = crank_state(s, 0.7);
    const ClosureSystem cs = constraint_jacobian(crank_model(), st);
    EXPECT_LE((cs.jacobian * st.theta_dot).norm(), 1e-12);
  }
}

TEST(ConstraintJacobian, PassiveBlockActsOnPassiveVelocities) {
  const ClosureSystem cs = constraint_jacobian(diff_model(), GeneralizedState::zero(diff_model()));
  std::mt19937 rng(1);
  const VecX v = random_vector(rng, cs.passive);
  VecX full = VecX::Zero(cs.passive + cs.actuated);
  full.head(cs.passive) = v;
  EXPECT_LT((cs.passive_block * v - cs.jacobian * full).norm(), 1e-15);
  EXPECT_EQ(cs.jacobian.rows(), 8);
  EXPECT_EQ(cs.passive_block.cols(), 8);
  EXPECT_EQ(cs.actuated_block.cols(), 2);
}

// Arbitrary, not necessarily closed, states exercise the orientation rows away
// from the identity.
TEST(ConstraintJacobian, MatchesFiniteDifferencesOfClosureError) {
  std::mt19937 rng(2);
  const double delta = 1e-6;
  for (const MechanismModel* model : {&crank_model(), &diff_model(), &knee_model()}) {
    for (int trial = 0; trial < 100; ++trial) {
      GeneralizedState st = random_state(rng, *model, 0.5);
      const VecX nu = st.velocity(*model);
      const ClosureSystem cs = constraint_jacobian(*model, st);
      const VecX fd = (closure_error(*model, displaced(*model, st, nu, delta)) -
                       closure_error(*model, displaced(*model, st, nu, -delta))) / (2 * delta);
      EXPECT_LE((fd - cs.jacobian * nu).norm(), 10 * delta) << model->name() << " " << trial;
      const ClosureSystem cp = constraint_jacobian(*model, displaced(*model, st, nu, delta));
      const ClosureSystem cm = constraint_jacobian(*model, displaced(*model, st, nu, -delta));
      const VecX bias_fd = (cp.jacobian - cm.jacobian) * nu / (2 * delta);
      EXPECT_LE((bias_fd - cs.bias).norm(), 10 * delta) << model->name() << " " << trial;
    }
  }
}

TEST(MappingJacobian, CrankMatchesAnalyticDerivative) {
  const examples::CrankOracle oracle;
  for (double s : {-0.02, -0.005, 0.0, 0.012, 0.02}) {
    const ClosureSystem cs = constraint_jacobian(crank_model(), crank_state(s));
    const MatX& jm = mapping_jacobian(cs);
    EXPECT_LT((jm.col(0) - oracle.mapping(s)).norm(), 1e-10);
    EXPECT_LE((cs.passive_block * jm + cs.actuated_block).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(MappingJacobian, DifferentialCommonModeIsPurePitch) {
  const ClosureSystem cs = constraint_jacobian(diff_model(), GeneralizedState::zero(diff_model()));
  const VecX rates = mapping_jacobian(cs) * Eigen::Vector2d(1.0, 1.0);
  EXPECT_GT(std::abs(rates[0]), 1.0);
  EXPECT_LT(std::abs(rates[1]), 1e-12);
  const VecX diff_rates = mapping_jacobian(cs) * Eigen::Vector2d(1.0, -1.0);
  EXPECT_LT(std::abs(diff_rates[0]), 1e-12);
  EXPECT_GT(std::abs(diff_rates[1]), 1.0);
}

TEST(MappingJacobian, DecoupledActuatorMapsToZero) {
  // A rigid passive triangle plus an actuator on a separate branch.
  MechanismDocument doc;
  doc.links = {{"base", 0, Vec3::Zero(), Mat3::Zero()}, {"a", 1, Vec3::Zero(), Mat3::Identity()},
               {"b", 1, Vec3::Zero(), Mat3::Identity()}, {"c", 1, Vec3::Zero(), Mat3::Identity()}};
  JointRecord j1{"j1", JointType::kRevolute, "base", "a"};
  JointRecord j2{"j2", JointType::kRevolute, "a", "b", Vec3(1, 0, 0)};
  JointRecord j3{"j3", JointType::kRevolute, "base", "c", Vec3(0, 0, 1), Vec3::Zero(), Vec3::UnitZ(), true};
  j1.axis = j2.axis = Vec3::UnitZ();
  doc.joints = {j1, j2, j3};
  LoopRecord loop;
  loop.name = "pin";
  loop.a_link = "base";
  loop.a_xyz = Vec3(1, 1, 0);
  loop.u_link = "b";
  loop.u_xyz = Vec3(0, 1, 0);
  loop.mask = {true, true, false, false, false, false};
  loop.constants = {0, 0};
  doc.loops = {loop};
  const MechanismModel model = MechanismModel::from_document(doc);
  const ClosureSystem cs = constraint_jacobian(model, GeneralizedState::zero(model));
  EXPECT_EQ(cs.actuated_block.norm(), 0.0);
  EXPECT_EQ(mapping_jacobian(cs).norm(), 0.0);
}

TEST(MappingJacobian, SingularConfigurationThrowsWithLoopName) {
  const examples::CrankOracle oracle;
  GeneralizedState st = GeneralizedState::zero(crank_model());
  st.theta = oracle.configuration_from_crank(0.0);  // crank and rod collinear
  const ClosureSystem cs = constraint_jacobian(crank_model(), st);
  EXPECT_TRUE(cs.singular);
  try {
    mapping_jacobian(cs);
    FAIL();
  } catch (const SingularLinkage& e) {
    EXPECT_EQ(e.loop(), "pin");
    EXPECT_LT(e.sigma_min(), 1e-8);
  }
}

TEST(Dfk, ZeroActuatorRateGivesZero) {
  const ClosureSystem cs = constraint_jacobian(crank_model(), crank_state(0.0));
  EXPECT_EQ(dfk(cs, VecX::Zero(1)).norm(), 0.0);
}

TEST(Dfk, CrankUnitRateMatchesOracle) {
  const examples::CrankOracle oracle;
  const ClosureSystem cs = constraint_jacobian(crank_model(), crank_state(0.01));
  EXPECT_LT((dfk(cs, VecX::Ones(1)) - oracle.mapping(0.01)).norm(), 1e-10);
}

TEST(Dfk, IntegratedMotionStaysOnClosureManifold) {
  std::mt19937 rng(3);
  for (const MechanismModel* model : {&diff_model(), &knee_model()}) {
    GeneralizedState st = random_closed_state(rng, *model, assembled(*model), 0.5);
    const VecX rate = random_vector(rng, model->actuated_count(), 0.1);
    const double dt = 1e-5;
    for (int step = 0; step < 1000; ++step) {
      const ClosureSystem cs = constraint_jacobian(*model, st);
      VecX theta_dot(model->dof_count());
      theta_dot << dfk(cs, rate), rate;
      st.theta += dt * theta_dot;
    }
    EXPECT_LE(closure_error(*model, st).norm(), 1e-6) << model->name();
  }
}

TEST(PassiveAccelerations, RestGivesZero) {
  const ClosureSystem cs = constraint_jacobian(crank_model(), crank_state(0.0));
  EXPECT_LT(passive_accelerations(cs, VecX::Zero(1)).norm(), 1e-15);
}

TEST(PassiveAccelerations, CrankConstantRateMatchesAnalyticSecondDerivative) {
  const examples::CrankOracle oracle;
  const double s_dot = 0.3;
  const double delta = 1e-6;
  for (double s : {-0.015, 0.0, 0.01}) {
    const ClosureSystem cs = constraint_jacobian(crank_model(), crank_state(s, s_dot));
    const Eigen::Vector2d second = (oracle.mapping(s + delta) - oracle.mapping(s - delta)) / (2 * delta);
    EXPECT_LT((passive_accelerations(cs, VecX::Zero(1)) - second * s_dot * s_dot).norm(), 1e-6);
  }
}

TEST(PassiveAccelerations, SatisfiesAccelerationLevelClosure) {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const GeneralizedState st = random_closed_state(rng, diff_model(), GeneralizedState::zero(diff_model()));
    const ClosureSystem cs = constraint_jacobian(diff_model(), st);
    const VecX acc_a = random_vector(rng, 2, 1.0);
    VecX acc(10);
    acc << passive_accelerations(cs, acc_a), acc_a;
    EXPECT_LE((cs.jacobian * acc + cs.bias).norm(), 1e-9);
  }
}

TEST(TorqueMaps, ZeroInputsGiveZero) {
  const ClosureSystem cs = constraint_jacobian(crank_model(), crank_state(0.0));
  EXPECT_EQ(forward_torque_map(cs, VecX::Zero(2)).norm(), 0.0);
  EXPECT_EQ(inverse_torque_map(cs, {0}, VecX::Zero(1)).norm(), 0.0);
  EXPECT_EQ(dik(cs, {0}, VecX::Zero(1)).norm(), 0.0);
}

TEST(TorqueMaps, CrankVirtualWork) {
  const examples::CrankOracle oracle;
  const double s = 0.008;
  const double theta = oracle.crank_angle(oracle.geometry().slider_offset + s);
  const double dd = oracle.distance_derivative(theta);
  const ClosureSystem cs = constraint_jacobian(crank_model(), crank_state(s));
  EXPECT_NEAR(forward_torque_map(cs, Eigen::Vector2d(1.0, 0.0))[0], 1.0 / dd, 1e-10);
  EXPECT_NEAR(inverse_torque_map(cs, {0}, VecX::Ones(1))[0], dd, 1e-10);
  EXPECT_NEAR(dik(cs, {0}, VecX::Ones(1))[0], dd, 1e-10);
}

TEST(TorqueMaps, PowerBalanceAndRoundTrips) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const GeneralizedState st = random_closed_state(rng, diff_model(), GeneralizedState::zero(diff_model()));
    const ClosureSystem cs = constraint_jacobian(diff_model(), st);
    const VecX tau_u = random_vector(rng, 8, 1.0);
    const VecX rate_a = random_vector(rng, 2, 1.0);
    EXPECT_NEAR(forward_torque_map(cs, tau_u).dot(rate_a), tau_u.dot(dfk(cs, rate_a)), 1e-13);

    const std::vector<int> sel = diff_model().selection();
    VecX q_dot(2);
    for (int i = 0; i < 2; ++i) q_dot[i] = dfk(cs, rate_a)[sel[i]];
    EXPECT_LT((dik(cs, sel, q_dot) - rate_a).norm(), 1e-10);

    const VecX tau_sel = random_vector(rng, 2, 1.0);
    VecX tau_full = VecX::Zero(8);
    for (int i = 0; i < 2; ++i) tau_full[sel[i]] = tau_sel[i];
    EXPECT_LT((inverse_torque_map(cs, sel, forward_torque_map(cs, tau_full)) - tau_sel).norm(), 1e-10);
  }
}

TEST(TorqueMaps, SingularSelectionIsReported) {
  // At zero pose, u2 of both braces do not move with roll-free pitch changes
  // in a way independent of pitch: select two DOFs that move identically.
  const ClosureSystem cs = constraint_jacobian(diff_model(), GeneralizedState::zero(diff_model()));
  const int u1_left = diff_model().dof_index("u1_left");
  expect_error(ErrorCode::kSingularTaskMap, [&] { dik(cs, {u1_left, u1_left}, VecX::Ones(2)); });
}

TEST(ClosedChainInverseDynamics, StaticZeroGravityIsZero) {
  MechanismDocument doc = examples::crank_document();
  doc.gravity = Vec3::Zero();
  const MechanismModel model = MechanismModel::from_document(doc);
  GeneralizedState st = GeneralizedState::zero(model);
  st.theta = crank_state(0.0).theta;
  const auto out = closed_chain_inverse_dynamics(model, st, VecX::Zero(3));
  EXPECT_LT(out.torque.norm(), 1e-14);
  EXPECT_LT(out.multipliers.norm(), 1e-14);
}

TEST(ClosedChainInverseDynamics, StaticCrankBalancesPotentialGradient) {
  const examples::CrankOracle oracle;
  auto potential = [&](double s) {
    GeneralizedState st = GeneralizedState::zero(crank_model());
    st.theta = oracle.configuration_from_actuator(s);
    const Kinematics kin(crank_model(), st);
    double v = 0;
    for (int i = 0; i < 4; ++i) {
      const Link& l = crank_model().links()[i];
      v -= l.mass * crank_model().gravity().dot(kin.link(i).position + kin.link(i).rotation * l.com);
    }
    return v;
  };
  for (double s : {-0.01, 0.0, 0.017}) {
    const GeneralizedState st = crank_state(s);
    const auto out = closed_chain_inverse_dynamics(crank_model(), st, VecX::Zero(3));
    const double grad = (potential(s + 1e-6) - potential(s - 1e-6)) / 2e-6;
    EXPECT_NEAR(out.torque[0], grad, 1e-6);
    const ClosureSystem cs = constraint_jacobian(crank_model(), st);
    const VecX g = gravity_terms(crank_model(), st);
    EXPECT_NEAR(out.torque[0], (mapping_jacobian(cs).transpose() * g.head(2))[0] + g[2], 1e-10);
  }
}

TEST(ClosedChainInverseDynamics, SatisfiesConstrainedEquationsOfMotion) {
  std::mt19937 rng(6);
  for (const MechanismModel* model : {&crank_model(), &diff_model(), &knee_model()}) {
    for (int trial = 0; trial < 30; ++trial) {
      const GeneralizedState st = random_closed_state(rng, *model, assembled(*model));
      const ClosureSystem cs = constraint_jacobian(*model, st);
      const VecX acc_a = random_vector(rng, model->actuated_count(), 2.0);
      VecX acc(model->dof_count());
      acc << passive_accelerations(cs, acc_a), acc_a;
      const auto out = closed_chain_inverse_dynamics(*model, st, acc);
      VecX s_tau = VecX::Zero(model->dof_count());
      s_tau.tail(model->actuated_count()) = out.torque;
      const VecX residual = joint_space_inertia(*model, st) * acc + nonlinear_terms(*model, st) - s_tau -
                            cs.jacobian.transpose() * out.multipliers;
      EXPECT_LE(residual.cwiseAbs().maxCoeff(), 1e-8) << model->name();
    }
  }
}

TEST(ClosedChainInverseDynamics, RejectsInconsistentAcceleration) {
  expect_error(ErrorCode::kClosureInconsistent, [] {
    closed_chain_inverse_dynamics(crank_model(), crank_state(0.0), Eigen::Vector3d(1.0, 0.0, 0.0));
  });
}

TEST(ValidateAssumptions, ExampleMechanismsPass) {
  std::mt19937 rng(7);
  for (const MechanismModel* model : {&crank_model(), &diff_model(), &knee_model()}) {
    std::vector<GeneralizedState> samples;
    for (int i = 0; i < 20; ++i) samples.push_back(random_closed_state(rng, *model, assembled(*model)));
    const AssumptionReport report = validate_assumptions(*model, samples);
    EXPECT_TRUE(report.passed()) << model->name();
  }
  const AssumptionReport crank = validate_assumptions(crank_model(), {crank_state(0.0)});
  EXPECT_EQ(crank.dofs, 3);
  EXPECT_EQ(crank.passive, 2);
  const AssumptionReport diff = validate_assumptions(diff_model(), {GeneralizedState::zero(diff_model())});
  EXPECT_EQ(diff.dofs, 10);
  EXPECT_EQ(diff.constraint_rows, 8);
}

TEST(ValidateAssumptions, DuplicateConstraintIsRankDeficient) {
  MechanismDocument doc = examples::crank_document();
  // A dangling passive joint plus a repeated x row keeps the row count equal
  // to the passive count while losing rank.
  doc.links.push_back({"flag", 0.1, Vec3::Zero(), Mat3::Identity() * 1e-3});
  doc.joints.insert(doc.joints.begin(), JointRecord{"flag", JointType::kRevolute, "base", "flag"});
  LoopRecord dup = doc.loops[0];
  dup.name = "pin_again";
  dup.mask = {true, false, false, false, false, false};
  dup.constants = {0.0};
  doc.loops.push_back(dup);
  const MechanismModel model = MechanismModel::from_document(doc);
  GeneralizedState st = GeneralizedState::zero(model);
  st.theta << 0.0, crank_state(0.0).theta;
  const AssumptionReport report = validate_assumptions(model, {st});
  EXPECT_TRUE(report.rows_match_passive);
  EXPECT_FALSE(report.full_rank);
  EXPECT_EQ(report.near_singular.size(), 1u);
  EXPECT_FALSE(report.passed());
}

TEST(SolveClosure, ProjectsPerturbedStateBack) {
  GeneralizedState st = crank_state(0.01);
  const VecX expected = st.theta;
  st.theta[0] += 0.05;
  st.theta[1] -= 0.05;
  const GeneralizedState solved = solve_closure(crank_model(), st);
  EXPECT_LT((solved.theta - expected).norm(), 1e-10);
}

TEST(ConstraintJacobian, SigmaMinMatchesDenseSvdOnBlockStructuredModel) {
  std::mt19937 rng(41);
  const MechanismModel model = MechanismModel::from_document(examples::synthetic_document());
  for (double bend : {0.05, 0.15, 0.3}) {
    GeneralizedState st = examples::crouched_state(model, bend);
    st.base_orientation = Eigen::Quaterniond(rotation_exp(random_vector(rng, 3, 0.3)));
    const ClosureSystem cs = constraint_jacobian(model, st);
    const double dense = Eigen::JacobiSVD<MatX>(cs.passive_block).singularValues().minCoeff();
    EXPECT_NEAR(cs.sigma_min / dense, 1.0, 1e-8);
  }
}

TEST(ConstraintJacobian, NearSingularSigmaMinMatchesDenseSvd) {
  const examples::CrankOracle oracle;
  GeneralizedState st = GeneralizedState::zero(crank_model());
  for (double angle : {1e-3, 1e-6}) {
    st.theta = oracle.configuration_from_crank(angle);
    const ClosureSystem cs = constraint_jacobian(crank_model(), st);
    const double dense = Eigen::JacobiSVD<MatX>(cs.passive_block).singularValues().minCoeff();
    EXPECT_NEAR(cs.sigma_min / dense, 1.0, 1e-8);
  }
}
