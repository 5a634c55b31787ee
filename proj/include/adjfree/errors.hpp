#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adjfree {

enum class ErrorCode {
  DimensionMismatch,
  NonFiniteInput,
  AdjointUnavailable,
  NotIsotropic,
  StepsizeUnresolvable,
  NotSquare,
  TooLarge,
  AllDirectionsNull,
  ZeroColumn,
  DegenerateSpectrum,
  DimensionTooSmall,
  NonPositiveArgument,
  RateDegenerate,
  InvalidArgument,
  ParseError,
  UnsupportedFormat,
  IoError,
};

const char* to_string(ErrorCode code) noexcept;

/// Base exception for every failure raised by the library. The code is the
/// machine-readable part; what() carries a human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// MatrixMarket and trace parsing failures carry the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + reason),
        line_(line),
        reason_(reason) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

}  // namespace adjfree
