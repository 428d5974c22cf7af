#include "vw/core/error.hpp"

namespace vw {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kAlignmentTooSmall: return "alignment-too-small";
    case ErrorCode::kEmptyCandidates: return "empty-candidates";
    case ErrorCode::kDegenerateAnchor: return "degenerate-anchor";
    case ErrorCode::kDiverged: return "diverged";
    case ErrorCode::kUnmatchedTarget: return "unmatched-target";
    case ErrorCode::kUndefinedMetric: return "undefined-metric";
    case ErrorCode::kPretrainingFailed: return "pretraining-failed";
    case ErrorCode::kInfeasiblePlacement: return "infeasible-placement";
    case ErrorCode::kModelMismatch: return "model-mismatch";
    case ErrorCode::kInsufficientPool: return "insufficient-pool";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

DivergedError::DivergedError(int step, double loss)
    : Error(ErrorCode::kDiverged,
            "non-finite loss " + std::to_string(loss) + " at step " + std::to_string(step)),
      step_(step) {}

}  // namespace vw
