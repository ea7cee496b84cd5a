#include "error.hpp"

namespace backplay {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInvalidState: return "invalid-state";
    case ErrorCode::kInvalidCell: return "invalid-cell";
    case ErrorCode::kConfigInfeasible: return "configuration-infeasible";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kInvariantViolation: return "invariant-violation";
    case ErrorCode::kUnreachable: return "unreachable-goal";
    case ErrorCode::kExhaustedAttempts: return "exhausted-attempts";
    case ErrorCode::kEmptyPool: return "empty-pool";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kNonFiniteLoss: return "non-finite-loss";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
      code_(code) {}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace backplay
