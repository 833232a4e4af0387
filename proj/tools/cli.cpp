#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "closedlink/analysis.hpp"
#include "closedlink/closure.hpp"
#include "closedlink/dynamics.hpp"
#include "closedlink/errors.hpp"
#include "closedlink/estimation.hpp"
#include "closedlink/model_io.hpp"
#include "closedlink/parallel.hpp"
#include "closedlink/spatial.hpp"

namespace closedlink::cli {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

struct Output {
  bool json = false;
  std::string path;
};

void add_output_options(CLI::App* sub, Output& o) {
  sub->add_flag("--json", o.json, "Machine-readable JSON instead of CSV/text");
  sub->add_option("-o,--out", o.path, "Write the result to a file instead of stdout");
}

void write(const std::string& text, const Output& o, std::ostream& out) {
  if (o.path.empty()) {
    out << text;
  } else {
    write_text_file(o.path, text);
  }
}

void emit(const ResultTable& table, const Output& o, std::ostream& out) {
  write(o.json ? emit_json(table) : emit_csv(table), o, out);
}

VecX to_vec(const std::vector<double>& v) { return Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size())); }

std::vector<std::string> actuator_names(const MechanismModel& model) {
  std::vector<std::string> names;
  for (int k = 0; k < model.actuated_count(); ++k) names.push_back(model.dof_name(model.passive_count() + k));
  return names;
}

ResultTable read_table(const std::string& path, bool labeled) {
  const std::string text = read_text_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  return first != std::string::npos && text[first] == '{' ? parse_json_table(text) : parse_csv_table(text, labeled);
}

const std::array<const char*, 6> kAxes = {"vx", "vy", "vz", "wx", "wy", "wz"};

Mat6 lambda_from_table(const ResultTable& t) {
  Mat6 lambda;
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) lambda(r, c) = t.at(kAxes[r], kAxes[c]);
  }
  return lambda;
}

// CAMM table -> matrix and number of leading base columns.
std::pair<MatX, int> camm_from_table(const ResultTable& t) {
  MatX a(3, t.columns.size());
  const char* rows[] = {"x", "y", "z"};
  for (int r = 0; r < 3; ++r) {
    for (size_t c = 0; c < t.columns.size(); ++c) a(r, c) = t.at(rows[r], t.columns[c]);
  }
  const int base = static_cast<int>(
      std::count_if(t.columns.begin(), t.columns.end(), [](const std::string& c) { return c.rfind("base_", 0) == 0; }));
  return {a, base};
}

// ----------------------------------------------------------------- commands

struct StateArgs {
  std::vector<double> position;
  std::vector<double> velocity;
};

void add_state_options(CLI::App* sub, StateArgs& s, bool velocity) {
  sub->add_option("--state", s.position, "Actuated positions, comma separated (default zeros)")->delimiter(',');
  if (velocity) sub->add_option("--velocity", s.velocity, "Actuated velocities, comma separated (default zeros)")->delimiter(',');
}

int cmd_validate(const std::string& path, const Output& o, std::ostream& out) {
  const MechanismDocument doc = parse_mechanism(read_text_file(path));
  const MechanismModel model = MechanismModel::from_document(doc);
  const int na = model.actuated_count();
  // Samples spread along the diagonal of the actuator box.
  std::vector<GeneralizedState> samples;
  std::string failure;
  const int count = 5;
  for (int j = 0; j < count; ++j) {
    VecX a = VecX::Zero(na);
    for (int k = 0; k < na; ++k) {
      const double lo = model.lower_limits()[model.passive_count() + k];
      const double hi = model.upper_limits()[model.passive_count() + k];
      if (std::isfinite(lo) && std::isfinite(hi) && hi - lo < 1e20) a[k] = lo + (hi - lo) * (j + 0.5) / count;
    }
    try {
      samples.push_back(stance_state(model, a));
    } catch (const Error& e) {
      failure = "closure solve failed at sample " + std::to_string(j) + ": " + e.what();
    }
  }
  const AssumptionReport report = validate_assumptions(model, samples);
  const bool passed = report.passed() && failure.empty();
  double sigma = std::numeric_limits<double>::infinity();
  for (double s : report.sigma_min) sigma = std::min(sigma, s);
  if (report.sigma_min.empty()) sigma = kNan;

  nlohmann::ordered_json j;
  j["format"] = 1;
  j["model"] = model.name();
  j["n"] = report.dofs;
  j["m"] = report.constraint_rows;
  j["passive"] = report.passive;
  j["actuated"] = report.actuated;
  j["loops"] = model.loops().size();
  j["contacts"] = model.contacts().size();
  j["floating_base"] = model.floating_base();
  j["samples"] = samples.size();
  j["sigma_min"] = std::isfinite(sigma) ? nlohmann::ordered_json(sigma) : nlohmann::ordered_json();
  j["rows_match_passive"] = report.rows_match_passive;
  j["full_rank"] = report.full_rank;
  j["near_singular_samples"] = report.near_singular;
  j["assumptions"] = passed ? "passed" : "failed";
  if (!failure.empty()) j["failure"] = failure;

  std::ostringstream text;
  if (o.json) {
    text << j.dump(2) << "\n";
  } else {
    for (const auto& [key, value] : j.items()) {
      if (key == "format") continue;
      text << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
    }
  }
  write(text.str(), o, out);
  return passed ? 0 : 1;
}

int cmd_fk(const MechanismModel& model, const StateArgs& s, const Output& o, std::ostream& out) {
  const GeneralizedState st = stance_state(model, to_vec(s.position));
  ResultTable t;
  t.label_column = "frame";
  t.columns = {"x", "y", "z", "qw", "qx", "qy", "qz"};
  for (const auto& [name, pose] : forward_kinematics(model, st)) {
    Eigen::Quaterniond q(pose.rotation);
    if (q.w() < 0) q.coeffs() = -q.coeffs();
    t.add_row(name, {pose.position.x(), pose.position.y(), pose.position.z(), q.w(), q.x(), q.y(), q.z()});
  }
  emit(t, o, out);
  return 0;
}

int cmd_dfk(const MechanismModel& model, const StateArgs& s, const Output& o, std::ostream& out) {
  const GeneralizedState st = stance_state(model, to_vec(s.position), to_vec(s.velocity));
  ResultTable t;
  t.label_column = "dof";
  t.columns = {"theta", "theta_dot"};
  for (int k = 0; k < model.dof_count(); ++k) t.add_row(model.dof_name(k), {st.theta[k], st.theta_dot[k]});
  emit(t, o, out);
  return 0;
}

int cmd_workspace(const MechanismModel& model, const StateArgs& s, const std::vector<std::string>& select, int grid,
                  const Output& o, std::ostream& out) {
  WorkspaceOptions options;
  options.directions = grid;
  options.threads = thread_count_from_env();
  for (const auto& name : select) options.selection.push_back(model.dof_index(name));
  std::vector<int> reported = options.selection;
  if (reported.empty()) reported = model.selection();
  if (reported.empty()) {
    for (int k = 0; k < model.actuated_count(); ++k) reported.push_back(model.passive_count() + k);
  }
  const auto samples = workspace_explore(model, stance_state(model, to_vec(s.position)), options);
  const auto names = actuator_names(model);
  ResultTable t;
  t.columns.push_back("direction");
  for (const auto& n : names) t.columns.push_back("cmd_" + n);
  for (const auto& n : names) t.columns.push_back(n);
  for (int dof : reported) t.columns.push_back("sel_" + model.dof_name(dof));
  for (const char* c : {"feasible", "stalled", "steps", "binding"}) t.columns.push_back(c);
  for (const auto& w : samples) {
    std::vector<double> row{static_cast<double>(w.direction)};
    const bool ok = w.error.empty();
    for (int k = 0; k < w.command.size(); ++k) row.push_back(w.command[k]);
    for (size_t k = 0; k < names.size(); ++k) row.push_back(ok ? w.actuated[k] : kNan);
    for (size_t k = 0; k < reported.size(); ++k) row.push_back(ok ? w.selected[k] : kNan);
    row.insert(row.end(), {w.feasible ? 1.0 : 0.0, w.stalled ? 1.0 : 0.0, static_cast<double>(w.steps),
                           static_cast<double>(w.binding.size())});
    t.add_row(row);
  }
  emit(t, o, out);
  return 0;
}

int cmd_manipulability(const MechanismModel& model, const StateArgs& s, const std::string& frame, int grid,
                       const Output& o, std::ostream& out) {
  ManipulabilityOptions options;
  options.grid = grid;
  const auto map = manipulability_map(model, stance_state(model, to_vec(s.position)), frame, options);
  ResultTable t;
  t.columns = actuator_names(model);
  for (const char* c : {"linear", "angular", "linear_normalized", "angular_normalized", "singular"}) t.columns.push_back(c);
  for (const auto& m : map) {
    std::vector<double> row(m.actuated.data(), m.actuated.data() + m.actuated.size());
    row.insert(row.end(), {m.linear, m.angular, m.linear_normalized, m.angular_normalized, m.singular ? 1.0 : 0.0});
    t.add_row(row);
  }
  emit(t, o, out);
  return 0;
}

int cmd_inertia(const MechanismModel& model, const StateArgs& s, const std::string& frame, double eps,
                bool include_base, const Output& o, std::ostream& out) {
  InertiaOptions options;
  options.epsilon = eps;
  options.include_base = include_base;
  const InertiaAnalysis a = cartesian_inertia(model, stance_state(model, to_vec(s.position)), frame, options);
  ResultTable t;
  t.label_column = "row";
  t.columns.assign(kAxes.begin(), kAxes.end());
  for (int r = 0; r < 6; ++r) {
    std::vector<double> row(6);
    for (int c = 0; c < 6; ++c) row[c] = a.lambda(r, c);
    t.add_row(kAxes[r], row);
  }
  t.add_row("norm", std::vector<double>(a.column_norms.data(), a.column_norms.data() + 6));
  emit(t, o, out);
  return 0;
}

int cmd_inertia_ratio(const std::string& ref, const std::string& test, const Output& o, std::ostream& out) {
  const Vec6 chi = inertia_ratio(lambda_from_table(read_table(ref, true)), lambda_from_table(read_table(test, true)));
  ResultTable t;
  t.label_column = "quantity";
  t.columns.assign(kAxes.begin(), kAxes.end());
  t.add_row("chi", std::vector<double>(chi.data(), chi.data() + 6));
  emit(t, o, out);
  return 0;
}

int cmd_camm(const MechanismModel& model, const StateArgs& s, const Output& o, std::ostream& out) {
  const GeneralizedState st = stance_state(model, to_vec(s.position), to_vec(s.velocity));
  const CentroidalQuantities c = centroidal_momentum(model, st);
  const MatX camm = c.projected_camm();
  ResultTable t;
  t.label_column = "row";
  if (model.floating_base()) {
    for (const char* b : kAxes) t.columns.push_back(std::string("base_") + b);
  }
  for (const auto& n : actuator_names(model)) t.columns.push_back(n);
  t.columns.push_back("momentum");
  const char* rows[] = {"x", "y", "z"};
  for (int r = 0; r < 3; ++r) {
    std::vector<double> row(camm.cols());
    for (int k = 0; k < camm.cols(); ++k) row[k] = camm(r, k);
    row.push_back(c.momentum[3 + r]);
    t.add_row(rows[r], row);
  }
  emit(t, o, out);
  return 0;
}

int cmd_camm_ratio(const std::string& ref, const std::string& test, const Output& o, std::ostream& out) {
  const auto strip = [](ResultTable t) {
    const auto it = std::find(t.columns.begin(), t.columns.end(), "momentum");
    if (it != t.columns.end()) {
      const auto k = it - t.columns.begin();
      t.columns.erase(it);
      for (auto& row : t.rows) row.erase(row.begin() + k);
    }
    return t;
  };
  const auto [a, base_a] = camm_from_table(strip(read_table(ref, true)));
  const auto [b, base_b] = camm_from_table(strip(read_table(test, true)));
  if (base_a != base_b) throw Error(ErrorCode::kDimensionMismatch, "reference and test differ in base columns");
  const Vec3 gamma = camm_ratio(a, b, base_a);
  ResultTable t;
  t.label_column = "quantity";
  t.columns = {"x", "y", "z"};
  t.add_row("gamma", {gamma.x(), gamma.y(), gamma.z()});
  emit(t, o, out);
  return 0;
}

int cmd_transmission(const MechanismModel& model, const StateArgs& s, const std::string& actuator,
                     const std::string& output, const std::string& sweep, double force,
                     const std::vector<double>& direction, const Output& o, std::ostream& out) {
  double lo = 0, hi = 0;
  int n = 0;
  {
    std::istringstream in(sweep);
    char c1 = 0, c2 = 0;
    if (!(in >> lo >> c1 >> hi >> c2 >> n) || c1 != ':' || c2 != ':' || !in.eof()) {
      throw CLI::ValidationError("--sweep", "expected lo:hi:N, got '" + sweep + "'");
    }
  }
  TransmissionOptions options;
  options.input_force = force;
  if (!direction.empty()) {
    if (direction.size() != 3) throw CLI::ValidationError("--direction", "expected x,y,z");
    options.direction = Vec3(direction[0], direction[1], direction[2]);
  }
  const auto curve = transmission_curve(model, stance_state(model, to_vec(s.position)), actuator, output, lo, hi, n, options);
  ResultTable t;
  t.columns = {"actuator", "output", "ratio", "output_force", "singular"};
  for (const auto& p : curve) t.add_row({p.actuator, p.output, p.ratio, p.output_force, p.singular ? 1.0 : 0.0});
  emit(t, o, out);
  return 0;
}

int cmd_id(const MechanismModel& model, const std::string& traj, bool use_contacts, const Output& o, std::ostream& out) {
  const MeasurementLog log = bind_log(model, parse_log(read_text_file(traj)));
  const int na = model.actuated_count();
  const int base = model.floating_base() ? 6 : 0;
  const auto names = actuator_names(model);
  const std::vector<ContactPoint> contacts = use_contacts ? model.contacts() : std::vector<ContactPoint>{};
  ResultTable t;
  t.columns.push_back("time_s");
  for (const auto& n : names) t.columns.push_back("tau_" + n);
  for (int k = 0; k < model.constraint_rows(); ++k) t.columns.push_back("lambda_" + std::to_string(k));
  for (const auto& c : contacts) {
    for (const char* axis : {"x", "y", "z"}) t.columns.push_back("F_" + c.name + "_" + axis);
  }
  t.columns.push_back("kkt");
  for (const auto& sample : log.samples) {
    const GeneralizedState st = stance_state(model, sample.measurement.actuated_position, sample.measurement.actuated_velocity);
    const DynamicsComponents comp = assemble(model, st, contacts);
    // Task: hold the base still and track the actuated accelerations.
    TaskSpec task;
    const int nv = comp.velocity_size();
    task.jacobian = MatX::Zero(base + na, nv);
    for (int k = 0; k < base; ++k) task.jacobian(k, k) = 1.0;
    for (int k = 0; k < na; ++k) task.jacobian(base + k, nv - na + k) = 1.0;
    task.bias = VecX::Zero(base + na);
    task.desired = VecX::Zero(base + na);
    if (log.has_acceleration) task.desired.tail(na) = sample.acceleration;
    const InverseDynamicsResult r = inverse_dynamics(comp, task);
    std::vector<double> row{sample.time};
    for (int k = 0; k < r.torques.size(); ++k) row.push_back(r.torques[k]);
    for (int k = 0; k < r.multipliers.size(); ++k) row.push_back(r.multipliers[k]);
    for (int k = 0; k < r.forces.size(); ++k) row.push_back(r.forces[k]);
    row.push_back(r.qp.residuals.max());
    t.add_row(row);
  }
  emit(t, o, out);
  return 0;
}

int cmd_estimate(const MechanismModel& model, const std::string& log_path, double alpha, double beta, int stride,
                 const Output& o, std::ostream& out) {
  const MeasurementLog log = bind_log(model, parse_log(read_text_file(log_path)));
  if (stride < 1) throw CLI::ValidationError("--stride", "must be at least 1");
  ResultTable t;
  t.columns.push_back("time_s");
  for (int k = 0; k < model.dof_count(); ++k) t.columns.push_back("theta_" + model.dof_name(k));
  t.columns.push_back("closure_error");
  t.columns.push_back("tracking_error");
  if (log.samples.empty()) {
    emit(t, o, out);
    return 0;
  }
  EstimatorConfig config{alpha, beta, 1e-3};
  EstimatorState est = EstimatorState::from(model, stance_state(model, log.samples[0].measurement.actuated_position).theta);
  const int na = model.actuated_count();
  const auto record = [&](size_t k) {
    const auto& m = log.samples[k].measurement;
    std::vector<double> row{log.samples[k].time};
    for (int i = 0; i < est.theta.size(); ++i) row.push_back(est.theta[i]);
    row.push_back(est.closure_error_norm);
    row.push_back(na ? (est.theta.tail(na) - m.actuated_position).cwiseAbs().maxCoeff() : 0.0);
    t.add_row(row);
  };
  record(0);
  for (size_t k = 1; k < log.samples.size(); ++k) {
    config.dt = log.samples[k].time - log.samples[k - 1].time;
    config.validate();
    est = estimator_step(model, est, log.samples[k - 1].measurement, config);
    if (k % stride == 0 || k + 1 == log.samples.size()) record(k);
  }
  emit(t, o, out);
  return 0;
}

int cmd_calibrate(const MechanismModel& model, const std::string& log_path, const std::string& measurements, double eps,
                  int max_iterations, const Output& o, std::ostream& out) {
  const MeasurementLog log = bind_log(model, parse_log(read_text_file(log_path)));
  if (log.samples.empty()) throw Error(ErrorCode::kInvalidArgument, "log has no rows");
  const auto absolute = parse_absolute_measurements(model, read_text_file(measurements));
  CalibrationConfig config;
  config.tolerance = eps;
  config.max_iterations = max_iterations;
  const GeneralizedState initial = stance_state(model, log.samples[0].measurement.actuated_position);
  const CalibrationResult r = calibrate(model, initial.theta, absolute, config);
  ResultTable t;
  t.label_column = "quantity";
  t.columns = {"value"};
  for (int k = 0; k < model.dof_count(); ++k) t.add_row("theta_" + model.dof_name(k), {r.theta[k]});
  const auto names = actuator_names(model);
  for (size_t k = 0; k < names.size(); ++k) t.add_row("offset_" + names[k], {r.actuator_offsets[k]});
  t.add_row("iterations", {static_cast<double>(r.iterations)});
  t.add_row("error_norm", {r.error_norms.back()});
  emit(t, o, out);
  return 0;
}

int cmd_wrench(const MechanismModel& model, const std::string& log_path, double cutoff, bool motor_torque,
               const Output& o, std::ostream& out) {
  const MeasurementLog log = bind_log(model, parse_log(read_text_file(log_path)));
  if (!log.has_torque) throw Error(ErrorCode::kColumnMismatch, "wrench estimation needs tau_ columns");
  const int na = model.actuated_count();
  const size_t rows = log.samples.size();
  std::vector<VecX> torque(rows);
  for (size_t r = 0; r < rows; ++r) torque[r] = log.samples[r].torque;
  if (motor_torque) {
    for (const ActuatorSpec& spec : model.actuators()) {
      const int k = spec.dof - model.passive_count();
      for (auto& tau : torque) tau[k] = ballscrew_force(tau[k], spec);
    }
  }
  if (cutoff > 0.0 && rows > 1) {
    const double rate = static_cast<double>(rows - 1) / (log.samples.back().time - log.samples.front().time);
    for (int k = 0; k < na; ++k) {
      std::vector<double> channel(rows);
      for (size_t r = 0; r < rows; ++r) channel[r] = torque[r][k];
      channel = lowpass_filter(channel, cutoff, rate);
      for (size_t r = 0; r < rows; ++r) torque[r][k] = channel[r];
    }
  }
  std::set<std::string> groups;
  for (const auto& c : model.contacts()) {
    if (!c.group.empty()) groups.insert(c.group);
  }
  ResultTable t;
  t.columns.push_back("time_s");
  for (const auto& c : model.contacts()) {
    for (const char* axis : {"x", "y", "z"}) t.columns.push_back("F_" + c.name + "_" + axis);
  }
  for (const char* c : {"zmp_x", "zmp_y", "normal_force"}) t.columns.push_back(c);
  for (const auto& g : groups) {
    t.columns.push_back("cop_" + g + "_x");
    t.columns.push_back("cop_" + g + "_y");
  }
  t.columns.push_back("residual");
  t.columns.push_back("rank");
  for (size_t r = 0; r < rows; ++r) {
    const GeneralizedState st = stance_state(model, log.samples[r].measurement.actuated_position);
    const WrenchSet w = static_wrench_estimate(model, st, model.contacts(), torque[r]);
    std::vector<double> row{log.samples[r].time};
    for (int k = 0; k < w.forces.size(); ++k) row.push_back(w.forces[k]);
    std::map<std::string, Vec3> cop;
    Vec3 zmp = Vec3::Constant(kNan);
    double normal = 0.0;
    try {
      const ZmpResult z = zmp_cop(w.contacts);
      zmp = z.zmp;
      normal = z.normal_force;
      for (const auto& [g, p] : z.cop) cop[g] = p;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoSupport) throw;
      for (const auto& c : w.contacts) normal += c.force.z();
    }
    row.insert(row.end(), {zmp.x(), zmp.y(), normal});
    for (const auto& g : groups) {
      const auto it = cop.find(g);
      row.push_back(it == cop.end() ? kNan : it->second.x());
      row.push_back(it == cop.end() ? kNan : it->second.y());
    }
    row.push_back(w.residual);
    row.push_back(static_cast<double>(w.rank));
    t.add_row(row);
  }
  emit(t, o, out);
  return 0;
}

void report_error(const Error& e, bool json, std::ostream& out, std::ostream& err) {
  if (json) {
    nlohmann::ordered_json j;
    j["error"]["code"] = std::string(error_code_name(e.code()));
    j["error"]["message"] = e.what();
    if (const auto* p = dynamic_cast<const ParseError*>(&e)) {
      j["error"]["line"] = p->line();
      j["error"]["column"] = p->column();
    }
    out << j.dump(2) << "\n";
  } else {
    err << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
  }
}

}  // namespace

GeneralizedState stance_state(const MechanismModel& model, const VecX& actuated, const VecX& actuated_velocity) {
  const int na = model.actuated_count();
  GeneralizedState st = GeneralizedState::zero(model);
  st.theta = model.home_configuration();
  if (actuated.size() != 0 && actuated.size() != na) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected " + std::to_string(na) + " actuated positions, got " + std::to_string(actuated.size()));
  }
  if (actuated_velocity.size() != 0 && actuated_velocity.size() != na) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected " + std::to_string(na) + " actuated velocities, got " + std::to_string(actuated_velocity.size()));
  }
  if (actuated.size()) st.theta.tail(na) = actuated;
  if (model.passive_count() > 0) st = solve_closure(model, st);
  if (model.floating_base() && !model.contacts().empty()) {
    const Kinematics kin(model, st);
    double lowest = std::numeric_limits<double>::infinity();
    for (const ContactPoint& c : model.contacts()) {
      lowest = std::min(lowest, (kin.link(c.link).position + kin.link(c.link).rotation * c.position).z());
    }
    st.base_position.z() -= lowest;
  }
  if (actuated_velocity.size()) st = with_consistent_velocity(model, st, actuated_velocity);
  return st;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Closed-chain mechanism analysis", "mech"};
  app.require_subcommand(1);
  app.fallthrough(false);

  std::string model_path;
  Output o;
  StateArgs state;
  std::string frame, actuator, output_dof, sweep, traj, log_path, measurements, ref_path, test_path;
  std::vector<std::string> select;
  std::vector<double> direction;
  int grid = 0, stride = 1, max_iterations = 100;
  double eps = 1e-5, alpha = 1.0, beta = 1000.0, force = 1.0, cutoff = 0.0, calib_eps = 1e-4;
  bool include_base = false, use_contacts = false, motor_torque = false;

  const auto model_command = [&](const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("model", model_path, "Mechanism file (.mech)")->required()->check(CLI::ExistingFile);
    add_output_options(sub, o);
    return sub;
  };

  CLI::App* validate = model_command("validate", "Parse the model and check the closure assumptions");
  CLI::App* fk = model_command("fk", "Forward kinematics of every link and frame");
  add_state_options(fk, state, false);
  CLI::App* dfk = model_command("dfk", "Closure-consistent joint positions and velocities");
  add_state_options(dfk, state, true);

  CLI::App* workspace = model_command("workspace", "Velocity-QP workspace boundary sweep");
  add_state_options(workspace, state, false);
  workspace->add_option("--select", select, "Reported joints, comma separated (default model selection)")->delimiter(',');
  workspace->add_option("--grid", grid, "Number of commanded directions")->default_val(64)->check(CLI::PositiveNumber);

  CLI::App* manip = model_command("manipulability", "Yoshikawa manipulability over the actuator grid");
  add_state_options(manip, state, false);
  manip->add_option("--frame", frame, "End-effector frame or link")->required();
  manip->add_option("--grid", grid, "Points per actuator")->default_val(21)->check(CLI::PositiveNumber);

  CLI::App* inertia = model_command("inertia", "Closure-projected Cartesian inertia");
  add_state_options(inertia, state, false);
  inertia->add_option("--frame", frame, "End-effector frame or link")->required();
  inertia->add_option("--eps", eps, "Regularization epsilon")->default_val(1e-5);
  inertia->add_flag("--include-base", include_base, "Let the floating base move");

  CLI::App* inertia_ratio_cmd = app.add_subcommand("inertia-ratio", "Column-norm ratios of two inertia results");
  inertia_ratio_cmd->add_option("reference", ref_path, "Reference inertia (.json or .csv)")->required()->check(CLI::ExistingFile);
  inertia_ratio_cmd->add_option("test", test_path, "Test inertia (.json or .csv)")->required()->check(CLI::ExistingFile);
  add_output_options(inertia_ratio_cmd, o);

  CLI::App* camm = model_command("camm", "Projected centroidal angular momentum matrix");
  add_state_options(camm, state, true);
  CLI::App* camm_ratio_cmd = app.add_subcommand("camm-ratio", "Row-norm ratios of two CAMM results");
  camm_ratio_cmd->add_option("reference", ref_path, "Reference CAMM (.json or .csv)")->required()->check(CLI::ExistingFile);
  camm_ratio_cmd->add_option("test", test_path, "Test CAMM (.json or .csv)")->required()->check(CLI::ExistingFile);
  add_output_options(camm_ratio_cmd, o);

  CLI::App* transmission = model_command("transmission", "Transmission ratio and output force over an actuator sweep");
  add_state_options(transmission, state, false);
  transmission->add_option("--actuator", actuator, "Actuated joint")->required();
  transmission->add_option("--output", output_dof, "Output joint, link or frame")->required();
  transmission->add_option("--sweep", sweep, "lo:hi:N")->required();
  transmission->add_option("--force", force, "Input force or torque")->default_val(1.0);
  transmission->add_option("--direction", direction, "Output direction for frame outputs, x,y,z (default 0,0,1)")->delimiter(',');

  CLI::App* id = model_command("id", "Three-step QP inverse dynamics per trajectory row");
  id->add_option("--traj", traj, "Trajectory CSV (time_s, pos_, vel_, optional acc_)")->required()->check(CLI::ExistingFile);
  id->add_flag("--contacts", use_contacts, "Use the model's contact points");

  CLI::App* estimate = model_command("estimate", "Replay the closure-preserving state estimator over a log");
  estimate->add_option("--log", log_path, "Measurement log CSV")->required()->check(CLI::ExistingFile);
  estimate->add_option("--alpha", alpha, "Closure-error gain")->default_val(1.0);
  estimate->add_option("--beta", beta, "Actuator tracking gain")->default_val(1000.0);
  estimate->add_option("--stride", stride, "Emit every N-th row (the last row is always emitted)")->default_val(1);

  CLI::App* calib = model_command("calibrate", "Calibrate actuator offsets from absolute joint measurements");
  calib->add_option("--log", log_path, "Measurement log CSV (first row is used)")->required()->check(CLI::ExistingFile);
  calib->add_option("--measurements", measurements, "Absolute measurements CSV (joint,value)")->required()->check(CLI::ExistingFile);
  calib->add_option("--eps", calib_eps, "Stopping tolerance on the global error norm")->default_val(1e-4);
  calib->add_option("--max-iterations", max_iterations, "Iteration cap")->default_val(100);

  CLI::App* wrench = model_command("wrench", "Static contact wrench, ZMP and COP per log row");
  wrench->add_option("--log", log_path, "Log CSV with tau_ columns")->required()->check(CLI::ExistingFile);
  wrench->add_option("--filter", cutoff, "Butterworth cutoff [Hz] applied to torques (0 = off)")->default_val(0.0);
  wrench->add_flag("--motor-torque", motor_torque, "tau_ columns are motor torques; convert through the ball screws");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    if (subs.empty() && !args.empty() && args[0].rfind('-', 0) != 0 && !app.get_subcommand_no_throw(args[0])) {
      err << "usage error: unknown subcommand '" << args[0] << "'\n\n";
    } else {
      err << "usage error: " << e.what() << "\n\n";
    }
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (sub == inertia_ratio_cmd) return cmd_inertia_ratio(ref_path, test_path, o, out);
    if (sub == camm_ratio_cmd) return cmd_camm_ratio(ref_path, test_path, o, out);
    if (sub == validate) return cmd_validate(model_path, o, out);
    const MechanismModel model = load_model(model_path);
    if (sub == fk) return cmd_fk(model, state, o, out);
    if (sub == dfk) return cmd_dfk(model, state, o, out);
    if (sub == workspace) return cmd_workspace(model, state, select, grid, o, out);
    if (sub == manip) return cmd_manipulability(model, state, frame, grid, o, out);
    if (sub == inertia) return cmd_inertia(model, state, frame, eps, include_base, o, out);
    if (sub == camm) return cmd_camm(model, state, o, out);
    if (sub == transmission) return cmd_transmission(model, state, actuator, output_dof, sweep, force, direction, o, out);
    if (sub == id) return cmd_id(model, traj, use_contacts, o, out);
    if (sub == estimate) return cmd_estimate(model, log_path, alpha, beta, stride, o, out);
    if (sub == calib) return cmd_calibrate(model, log_path, measurements, calib_eps, max_iterations, o, out);
    if (sub == wrench) return cmd_wrench(model, log_path, cutoff, motor_torque, o, out);
  } catch (const CLI::ValidationError& e) {
    err << "usage error: " << e.what() << "\n\n" << sub->help();
    return 2;
  } catch (const Error& e) {
    report_error(e, o.json, out, err);
    return 1;
  }
  return 2;
}

}  // namespace closedlink::cli
