#include "spathmm/errors.hpp"

namespace spathmm {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateEdge: return "DuplicateEdge";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::OrderViolation: return "OrderViolation";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::ConstraintViolation: return "ConstraintViolation";
    case ErrorCode::MissingTrajectory: return "MissingTrajectory";
    case ErrorCode::EmptyState: return "EmptyState";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
    case ErrorCode::InsufficientObserved: return "InsufficientObserved";
    case ErrorCode::CellNotHeldOut: return "CellNotHeldOut";
    case ErrorCode::PlanMismatch: return "PlanMismatch";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::DuplicateCell: return "DuplicateCell";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::InitializationFailure: return "InitializationFailure";
    case ErrorCode::MissingArtifacts: return "MissingArtifacts";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace spathmm
