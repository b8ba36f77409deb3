#pragma once

#include <stdexcept>
#include <string>

namespace lumpfit {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  non_finite_state,
  step_limit_exceeded,
  out_of_range,
  non_finite_gradient,
  diverged_fit,
  malformed_row,
  non_monotone_time,
  empty_run,
  span_too_short,
  bad_schema,
  io,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace lumpfit
