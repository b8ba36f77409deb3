#include "errors.hpp"

namespace lumpfit {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::non_finite_state: return "NonFiniteState";
    case ErrorCode::step_limit_exceeded: return "StepLimitExceeded";
    case ErrorCode::out_of_range: return "OutOfRange";
    case ErrorCode::non_finite_gradient: return "NonFiniteGradient";
    case ErrorCode::diverged_fit: return "DivergedFit";
    case ErrorCode::malformed_row: return "MalformedRow";
    case ErrorCode::non_monotone_time: return "NonMonotoneTime";
    case ErrorCode::empty_run: return "EmptyRun";
    case ErrorCode::span_too_short: return "SpanTooShort";
    case ErrorCode::bad_schema: return "BadSchema";
    case ErrorCode::io: return "IoError";
  }
  return "Unknown";
}

}  // namespace lumpfit
