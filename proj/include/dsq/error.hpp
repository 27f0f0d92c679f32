#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dsq {

enum class ErrorKind {
  // metalang
  LexError,
  ParseError,
  EmptyArgList,
  UnknownObject,
  UnknownAttribute,
  AmbiguousSynonym,
  RoleMismatch,
  InvalidQuery,
  // catalog
  IoError,
  FormatError,
  InvariantViolation,
  UnknownParent,
  NotFound,
  // adapters
  UnsupportedFormat,
  RaggedRow,
  MalformedDocument,
  NestedArrayUnsupported,
  // agent
  LabelSyntaxError,
  NoTransition,
  GuardEvalError,
  ActionError,
  // engine
  ColumnMismatch,
  NonNumericColumn,
  NegativeDuration,
  NegativeWeight,
  DivisionByZero,
  // sqlgen
  NotTranslatable,
  CrossSourceSetOp,
  UnboundParameter,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::LexError: return "LexError";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::EmptyArgList: return "EmptyArgList";
    case ErrorKind::UnknownObject: return "UnknownObject";
    case ErrorKind::UnknownAttribute: return "UnknownAttribute";
    case ErrorKind::AmbiguousSynonym: return "AmbiguousSynonym";
    case ErrorKind::RoleMismatch: return "RoleMismatch";
    case ErrorKind::InvalidQuery: return "InvalidQuery";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::UnknownParent: return "UnknownParent";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::RaggedRow: return "RaggedRow";
    case ErrorKind::MalformedDocument: return "MalformedDocument";
    case ErrorKind::NestedArrayUnsupported: return "NestedArrayUnsupported";
    case ErrorKind::LabelSyntaxError: return "LabelSyntaxError";
    case ErrorKind::NoTransition: return "NoTransition";
    case ErrorKind::GuardEvalError: return "GuardEvalError";
    case ErrorKind::ActionError: return "ActionError";
    case ErrorKind::ColumnMismatch: return "ColumnMismatch";
    case ErrorKind::NonNumericColumn: return "NonNumericColumn";
    case ErrorKind::NegativeDuration: return "NegativeDuration";
    case ErrorKind::NegativeWeight: return "NegativeWeight";
    case ErrorKind::DivisionByZero: return "DivisionByZero";
    case ErrorKind::NotTranslatable: return "NotTranslatable";
    case ErrorKind::CrossSourceSetOp: return "CrossSourceSetOp";
    case ErrorKind::UnboundParameter: return "UnboundParameter";
  }
  return "Error";
}

/// Every failure in the library is reported as an Error carrying a kind and,
/// for text-level failures, the byte offset (or 1-based line) it refers to.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> position = std::nullopt)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        detail_(message),
        position_(position) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }
  std::optional<std::size_t> position() const noexcept { return position_; }

 private:
  ErrorKind kind_;
  std::string detail_;
  std::optional<std::size_t> position_;
};

}  // namespace dsq
