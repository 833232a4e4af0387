#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace closedlink {

enum class ErrorCode {
  kDimensionMismatch,
  kUnknownFrame,
  kInvalidModel,
  kInvalidArgument,
  kSingularLinkage,
  kSingularTaskMap,
  kClosureInconsistent,
  kInfeasible,
  kMaxIterations,
  kNonConvex,
  kSingularAugmentedSystem,
  kRankDeficientContactMap,
  kNoSupport,
  kOutOfRange,
  kSyntaxError,
  kUnknownReference,
  kDuplicateName,
  kBadMask,
  kBadLimits,
  kNonMonotoneTime,
  kColumnMismatch,
};

/// Stable machine-readable name, e.g. "SingularLinkage".
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

/// The passive block of the closure Jacobian is (numerically) singular.
class SingularLinkage : public Error {
 public:
  SingularLinkage(double sigma_min, std::string loop)
      : Error(ErrorCode::kSingularLinkage,
              "singular linkage: sigma_min=" + std::to_string(sigma_min) + " near loop '" +
                  loop + "'"),
        sigma_min_(sigma_min),
        loop_(std::move(loop)) {}
  double sigma_min() const { return sigma_min_; }
  const std::string& loop() const { return loop_; }

 private:
  double sigma_min_;
  std::string loop_;
};

/// Error raised while reading a text document; carries a 1-based location.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, int line, int column, const std::string& message)
      : Error(code, "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                        message),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace closedlink
