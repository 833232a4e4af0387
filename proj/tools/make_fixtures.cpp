// Regenerates the fixture files: make_fixtures [output-dir] (default: fixtures).
#include <cmath>
#include <iostream>
#include <string>

#include "cli.hpp"
#include "closedlink/dynamics.hpp"
#include "closedlink/errors.hpp"
#include "closedlink/examples.hpp"
#include "closedlink/model_io.hpp"

using namespace closedlink;

namespace {

void save(const std::string& dir, const std::string& name, const std::string& text) {
  write_text_file(dir + "/" + name, text);
  std::cout << "wrote " << dir << "/" << name << "\n";
}

MeasurementLog constant_log(const MechanismModel& model, const VecX& position,
                            const VecX& torque, int rows) {
  MeasurementLog log;
  for (int k = 0; k < model.actuated_count(); ++k) log.actuators.push_back(model.dof_name(model.passive_count() + k));
  log.has_torque = torque.size() > 0;
  for (int r = 0; r < rows; ++r) {
    LogSample s;
    s.time = r * 1e-3;
    s.measurement.actuated_position = position;
    s.measurement.actuated_velocity = VecX::Zero(position.size());
    s.torque = torque;
    log.samples.push_back(s);
  }
  return log;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "fixtures";
  try {
    const MechanismDocument crank_doc = examples::crank_document();
    const MechanismDocument minileg_doc = examples::minileg_document();
    save(dir, "crank.mech", serialize_mechanism(crank_doc));
    save(dir, "diff.mech", serialize_mechanism(examples::diff_document()));
    save(dir, "knee.mech", serialize_mechanism(examples::knee_document()));
    save(dir, "minileg.mech", serialize_mechanism(minileg_doc));
    save(dir, "synthetic.mech", serialize_mechanism(examples::synthetic_document()));

    // 10 s, 1 kHz sinusoid on the crank slider.
    MeasurementLog sine;
    sine.actuators = {"slider"};
    for (int k = 0; k <= 10000; ++k) {
      const double t = k * 1e-3;
      LogSample s;
      s.time = t;
      s.measurement.actuated_position = VecX::Constant(1, 0.015 * std::sin(2 * M_PI * t));
      s.measurement.actuated_velocity = VecX::Constant(1, 0.015 * 2 * M_PI * std::cos(2 * M_PI * t));
      sine.samples.push_back(s);
    }
    save(dir, "sin1khz.csv", serialize_log(sine));

    // Short crank trajectory with accelerations for inverse dynamics.
    MeasurementLog traj = sine;
    traj.has_acceleration = true;
    traj.samples.clear();
    for (int k = 0; k < 5; ++k) {
      const double t = k * 0.1;
      const double w = 2 * M_PI;
      LogSample s;
      s.time = t;
      s.measurement.actuated_position = VecX::Constant(1, 0.015 * std::sin(w * t));
      s.measurement.actuated_velocity = VecX::Constant(1, 0.015 * w * std::cos(w * t));
      s.acceleration = VecX::Constant(1, -0.015 * w * w * std::sin(w * t));
      traj.samples.push_back(s);
    }
    save(dir, "crank_traj.csv", serialize_log(traj));

    // Closed-form crank and differential oracles.
    const examples::CrankOracle crank_oracle;
    ResultTable crank_table;
    crank_table.columns = {"s", "crank", "rod", "slider", "dcrank_ds", "drod_ds"};
    for (int k = 0; k <= 20; ++k) {
      const double s = -0.02 + 0.002 * k;
      const VecX theta = crank_oracle.configuration_from_actuator(s);
      const Eigen::Vector2d d = crank_oracle.mapping(s);
      crank_table.add_row({s, theta[0], theta[1], theta[2], d[0], d[1]});
    }
    save(dir, "crank_oracle.csv", emit_csv(crank_table));

    const examples::DiffOracle diff_oracle;
    ResultTable diff_table;
    diff_table.columns = {"ext_left", "ext_right", "pitch", "roll"};
    for (int i = 0; i <= 8; ++i) {
      for (int j = 0; j <= 8; ++j) {
        const Eigen::Vector2d ext(-0.04 + 0.01 * i, -0.04 + 0.01 * j);
        try {
          const Eigen::Vector2d p = diff_oracle.platform(ext);
          diff_table.add_row({ext[0], ext[1], p[0], p[1]});
        } catch (const Error&) {
          // No real assembly for this extension pair.
        }
      }
    }
    save(dir, "diff_oracle.csv", emit_csv(diff_table));

    // Calibration: the slider encoder reads 5 mm short; the crank angle is measured absolutely.
    const MechanismModel crank = MechanismModel::from_document(crank_doc);
    const double true_s = 0.01, offset = 0.005;
    save(dir, "crank_calibration_log.csv",
         serialize_log(constant_log(crank, VecX::Constant(1, true_s - offset), VecX(), 1)));
    save(dir, "crank_absolute.csv",
         "# format: 1\njoint,value\ncrank," + format_double(crank_oracle.configuration_from_actuator(true_s)[0]) + "\n");

    // Static double support on the biped: actuator forces holding the crouched stance.
    const MechanismModel minileg = MechanismModel::from_document(minileg_doc);
    const VecX stance = examples::minileg_crouched_state(minileg).actuated(minileg);
    const GeneralizedState st = cli::stance_state(minileg, stance);
    const DynamicsComponents c = assemble(minileg, st);
    const auto qp = qp_inverse_dynamics(c, base_task(minileg, st, Vec6::Zero()));
    const VecX zero = VecX::Zero(c.velocity_size());
    const VecX tau = actuated_torques(c, zero, qp.forces, lagrange_multipliers(c, zero, qp.forces));
    save(dir, "minileg_static.csv", serialize_log(constant_log(minileg, stance, tau, 5)));
    save(dir, "minileg_traj.csv", serialize_log(constant_log(minileg, stance, VecX(), 3)));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
