#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace metacal {

enum class ErrorKind {
  InvalidConfig,
  MissingTarget,
  ArityMismatch,
  SpecMismatch,
  LengthMismatch,
  DegenerateInput,
  EmptyInput,
  DimensionMismatch,
  FactorizationFailure,
  TooFewMetrics,
  InvalidTarget,
  TooFewExamples,
  NoRankablePairs,
  ParseError,
  HeaderMismatch,
  NonFiniteValue,
  SchemaVersionUnsupported,
  MalformedModel,
  ColumnMismatch,
  InvalidMatrix,
  Io,
};

std::string_view to_string(ErrorKind kind);

// Every recoverable validation failure in the library surfaces as this type.
// The CLI maps it to exit code 2; anything else is an internal error.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace metacal
