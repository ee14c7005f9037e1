#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace multiref {

enum class ErrorKind {
  InvalidArgument,
  DegenerateDistribution,
  AbsoluteContinuityViolation,
  EmptySupportIntersection,
  RootBracketFailure,
  EmptyDataset,
  DivisionByZeroPolicy,
  NonFiniteLoss,
  InsufficientData,
  ConfigParse,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it to an exit status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DegenerateDistribution: return "DegenerateDistribution";
    case ErrorKind::AbsoluteContinuityViolation: return "AbsoluteContinuityViolation";
    case ErrorKind::EmptySupportIntersection: return "EmptySupportIntersection";
    case ErrorKind::RootBracketFailure: return "RootBracketFailure";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::DivisionByZeroPolicy: return "DivisionByZeroPolicy";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::ConfigParse: return "ConfigParse";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace multiref
