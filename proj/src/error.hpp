#pragma once

#include <stdexcept>
#include <string>

namespace backplay {

enum class ErrorCode {
  kInvalidArgument = 1,
  kInvalidState,
  kInvalidCell,
  kConfigInfeasible,
  kParse,
  kInvariantViolation,
  kUnreachable,
  kExhaustedAttempts,
  kEmptyPool,
  kDomain,
  kNumeric,
  kNonFiniteLoss,
  kConfig,
  kIo,
};

const char* error_code_name(ErrorCode code);

// Every failure raised by the library carries a machine-readable code so the
// C API can translate it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace backplay
