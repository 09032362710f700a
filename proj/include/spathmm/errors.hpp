#pragma once

#include <stdexcept>
#include <string>

namespace spathmm {

// Machine-parsable failure categories. CLI maps these onto exit codes.
enum class ErrorCode {
  DuplicateEdge,
  SelfLoop,
  IndexOutOfRange,
  DisconnectedGraph,
  LengthMismatch,
  OrderViolation,
  NonFinite,
  InvariantViolation,
  ConstraintViolation,
  MissingTrajectory,
  EmptyState,
  InvalidScenario,
  InsufficientObserved,
  CellNotHeldOut,
  PlanMismatch,
  MalformedRow,
  DuplicateCell,
  RangeError,
  InitializationFailure,
  MissingArtifacts,
  DegenerateInput,
  ConfigError,
  IoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + msg),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace spathmm
