#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace patternkit {

enum class ErrorCode {
  InvalidConfig,
  DuplicateId,
  InvariantViolation,
  UnknownPattern,
  EmptyText,
  DimensionMismatch,
  ZeroVector,
  KindMismatch,
  VerifierRejected,
  InsufficientHistory,
  ContextAlreadyOpen,
  ContextMismatch,
  DoubleFinish,
  IoFailure,
  ParseError,
  VersionMismatch,
  DigestDivergence,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse failure with a 1-based source position.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message)
      : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ", column " +
                                         std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Replay produced a digest different from the recorded one.
class DigestDivergence : public Error {
 public:
  DigestDivergence(std::uint64_t sequence_no, std::uint64_t expected, std::uint64_t actual);

  std::uint64_t sequence_no() const noexcept { return sequence_no_; }
  std::uint64_t expected() const noexcept { return expected_; }
  std::uint64_t actual() const noexcept { return actual_; }

 private:
  std::uint64_t sequence_no_;
  std::uint64_t expected_;
  std::uint64_t actual_;
};

}  // namespace patternkit
