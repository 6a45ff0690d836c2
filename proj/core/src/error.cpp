#include "qqlab/error.hpp"

namespace qqlab {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kNotNormalized: return "NotNormalized";
    case ErrorCode::kZeroState: return "ZeroState";
    case ErrorCode::kNotTraceOne: return "NotTraceOne";
    case ErrorCode::kNotPSD: return "NotPSD";
    case ErrorCode::kNumericalFailure: return "NumericalFailure";
    case ErrorCode::kOptimizerNotConverged: return "OptimizerNotConverged";
    case ErrorCode::kInconsistentTotals: return "InconsistentTotals";
    case ErrorCode::kEmptyRecord: return "EmptyRecord";
    case ErrorCode::kDegenerateAngle: return "DegenerateAngle";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kNoRoot: return "NoRoot";
    case ErrorCode::kDegenerate: return "Degenerate";
    case ErrorCode::kMissingRecords: return "MissingRecords";
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

int exit_code(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kMissingRecords:
      return 3;
    case ErrorCode::kNotPSD:
    case ErrorCode::kNumericalFailure:
    case ErrorCode::kOptimizerNotConverged:
    case ErrorCode::kNoRoot:
    case ErrorCode::kDegenerate:
      return 4;
    default:
      return 2;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

OptimizerNotConverged::OptimizerNotConverged(double best_bound,
                                             const std::string& message)
    : Error(ErrorCode::kOptimizerNotConverged, message),
      best_bound_(best_bound) {}

}  // namespace qqlab
