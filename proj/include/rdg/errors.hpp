#pragma once

#include <stdexcept>
#include <string>

namespace rdg {

enum class ErrorCode {
  EmptyBranching,
  SizeLimit,
  UnknownNode,
  DepthOutOfRange,
  MissingTableEntry,
  BoundViolated,
  EmptyMenu,
  IncompletePolicy,
  EnumerationTooLarge,
  OverlappingPartition,
  DepthMismatch,
  SubmartingaleViolated,
  OptimalityViolated,
  SaddleViolated,
  InvalidControl,
  ParseError,
  ValidationError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyBranching: return "EmptyBranching";
    case ErrorCode::SizeLimit: return "SizeLimit";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::DepthOutOfRange: return "DepthOutOfRange";
    case ErrorCode::MissingTableEntry: return "MissingTableEntry";
    case ErrorCode::BoundViolated: return "BoundViolated";
    case ErrorCode::EmptyMenu: return "EmptyMenu";
    case ErrorCode::IncompletePolicy: return "IncompletePolicy";
    case ErrorCode::EnumerationTooLarge: return "EnumerationTooLarge";
    case ErrorCode::OverlappingPartition: return "OverlappingPartition";
    case ErrorCode::DepthMismatch: return "DepthMismatch";
    case ErrorCode::SubmartingaleViolated: return "SubmartingaleViolated";
    case ErrorCode::OptimalityViolated: return "OptimalityViolated";
    case ErrorCode::SaddleViolated: return "SaddleViolated";
    case ErrorCode::InvalidControl: return "InvalidControl";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
  }
  return "UnknownError";
}

/// Library-wide exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace rdg
