#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "closedlink/document.hpp"
#include "closedlink/estimation.hpp"
#include "closedlink/model.hpp"

namespace closedlink {

/// Parses `.mech` text. Throws ParseError (SyntaxError, UnknownReference,
/// DuplicateName, BadMask, BadLimits) with a 1-based line and column.
MechanismDocument parse_mechanism(std::string_view text);
/// Canonical `.mech` text; parse_mechanism(serialize_mechanism(d)) == d.
std::string serialize_mechanism(const MechanismDocument& doc);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);
/// Reads, parses and builds the model.
MechanismModel load_model(const std::string& path);

/// 17 significant digits, round-trip exact.
std::string format_double(double value);

struct LogSample {
  double time = 0.0;
  MeasurementSet measurement;
  VecX torque;        // empty when the log has no torque columns
  VecX acceleration;  // empty when the log has no acceleration columns
};

/// Time series of actuator measurements: columns time_s, then pos_<name>,
/// vel_<name> and optionally tau_<name> and acc_<name> per actuator.
struct MeasurementLog {
  std::vector<std::string> actuators;
  bool has_torque = false;
  bool has_acceleration = false;
  std::vector<LogSample> samples;

  bool operator==(const MeasurementLog&) const;
};

/// Throws ParseError (SyntaxError, ColumnMismatch, NonMonotoneTime).
MeasurementLog parse_log(std::string_view text);
std::string serialize_log(const MeasurementLog& log);
/// Reorders the columns into the model's actuated order. Throws ColumnMismatch.
MeasurementLog bind_log(const MechanismModel& model, const MeasurementLog& log);

/// Absolute passive-joint measurements: header `joint,value`, one row per
/// joint. Returns (passive DOF index, value). Throws ParseError or UnknownReference.
std::vector<std::pair<int, double>> parse_absolute_measurements(const MechanismModel& model, std::string_view text);

/// Numeric result table with named columns and optional row labels.
struct ResultTable {
  std::string label_column;  // empty: rows are unlabeled
  std::vector<std::string> columns;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;

  void add_row(std::vector<double> row);
  void add_row(std::string label, std::vector<double> row);
  /// Throws InvalidArgument for an unknown label or column.
  double at(const std::string& label, const std::string& column) const;
  bool operator==(const ResultTable&) const = default;
};

/// CSV with a `# format: 1` line, a header row and one line per row; labels
/// (if any) form the first column.
std::string emit_csv(const ResultTable& table);
ResultTable parse_csv_table(std::string_view text, bool labeled = false);
/// {"format": 1, "label_column": ..., "columns": [...], "labels": [...], "rows": [[...], ...]}.
std::string emit_json(const ResultTable& table);
ResultTable parse_json_table(std::string_view text);

}  // namespace closedlink
