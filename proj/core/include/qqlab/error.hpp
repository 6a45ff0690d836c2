#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qqlab {

enum class ErrorCode {
  kNotNormalized,
  kZeroState,
  kNotTraceOne,
  kNotPSD,
  kNumericalFailure,
  kOptimizerNotConverged,
  kInconsistentTotals,
  kEmptyRecord,
  kDegenerateAngle,
  kOutOfRange,
  kNoRoot,
  kDegenerate,
  kMissingRecords,
  kParse,
  kIo,
};

std::string_view to_string(ErrorCode code) noexcept;

// Process exit code used by the command-line front end:
// 2 validation error, 3 missing records, 4 numerical failure.
int exit_code(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised when no restart of the separable-state search met its stopping
// rule. The best upper bound found so far is still reported.
class OptimizerNotConverged : public Error {
 public:
  OptimizerNotConverged(double best_bound, const std::string& message);

  double best_bound() const noexcept { return best_bound_; }

 private:
  double best_bound_;
};

}  // namespace qqlab
