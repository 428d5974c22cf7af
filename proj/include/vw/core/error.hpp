#pragma once

#include <stdexcept>
#include <string>

namespace vw {

enum class ErrorCode {
  kInvalidInput,
  kDimensionMismatch,
  kAlignmentTooSmall,
  kEmptyCandidates,
  kDegenerateAnchor,
  kDiverged,
  kUnmatchedTarget,
  kUndefinedMetric,
  kPretrainingFailed,
  kInfeasiblePlacement,
  kModelMismatch,
  kInsufficientPool,
  kNotFound,
  kIo,
  kFormat,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when a training loss turns non-finite.
class DivergedError : public Error {
 public:
  DivergedError(int step, double loss);
  int step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace vw
