#include "closedlink/errors.hpp"

namespace closedlink {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kUnknownFrame: return "UnknownFrame";
    case ErrorCode::kInvalidModel: return "InvalidModel";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kSingularLinkage: return "SingularLinkage";
    case ErrorCode::kSingularTaskMap: return "SingularTaskMap";
    case ErrorCode::kClosureInconsistent: return "ClosureInconsistent";
    case ErrorCode::kInfeasible: return "Infeasible";
    case ErrorCode::kMaxIterations: return "MaxIterations";
    case ErrorCode::kNonConvex: return "NonConvex";
    case ErrorCode::kSingularAugmentedSystem: return "SingularAugmentedSystem";
    case ErrorCode::kRankDeficientContactMap: return "RankDeficientContactMap";
    case ErrorCode::kNoSupport: return "NoSupport";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kSyntaxError: return "SyntaxError";
    case ErrorCode::kUnknownReference: return "UnknownReference";
    case ErrorCode::kDuplicateName: return "DuplicateName";
    case ErrorCode::kBadMask: return "BadMask";
    case ErrorCode::kBadLimits: return "BadLimits";
    case ErrorCode::kNonMonotoneTime: return "NonMonotoneTime";
    case ErrorCode::kColumnMismatch: return "ColumnMismatch";
  }
  return "Unknown";
}

}  // namespace closedlink
