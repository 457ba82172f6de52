#pragma once

#include <stdexcept>
#include <string>

namespace cvsketch {

enum class ErrorKind {
  InvalidArgument,
  ItemOutOfRange,
  MismatchedHash,
  Overflow,
  InvalidMoments,
  MissingVectors,
  LengthMismatch,
  BudgetExceeded,
  MalformedHeader,
  MalformedLine,
  MalformedToken,
  IdOutOfRange,
  Io,
  ConfigInvalid,
  InconsistentReport,
};

constexpr const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::ItemOutOfRange: return "item-out-of-range";
    case ErrorKind::MismatchedHash: return "mismatched-hash";
    case ErrorKind::Overflow: return "overflow";
    case ErrorKind::InvalidMoments: return "invalid-moments";
    case ErrorKind::MissingVectors: return "missing-vectors";
    case ErrorKind::LengthMismatch: return "length-mismatch";
    case ErrorKind::BudgetExceeded: return "budget-exceeded";
    case ErrorKind::MalformedHeader: return "malformed-header";
    case ErrorKind::MalformedLine: return "malformed-line";
    case ErrorKind::MalformedToken: return "malformed-token";
    case ErrorKind::IdOutOfRange: return "id-out-of-range";
    case ErrorKind::Io: return "io";
    case ErrorKind::ConfigInvalid: return "config-invalid";
    case ErrorKind::InconsistentReport: return "inconsistent-report";
  }
  return "unknown";
}

/// Single exception type for the library; `kind()` carries the category.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Errors caused by input data rather than by how the library was called.
constexpr bool is_data_error(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MalformedHeader:
    case ErrorKind::MalformedLine:
    case ErrorKind::MalformedToken:
    case ErrorKind::IdOutOfRange:
    case ErrorKind::Io:
    case ErrorKind::Overflow:
    case ErrorKind::InconsistentReport:
      return true;
    default:
      return false;
  }
}

}  // namespace cvsketch
