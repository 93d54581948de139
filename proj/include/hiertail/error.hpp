#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hiertail {

enum class ErrorCode {
  // hierarchy
  DuplicateChild,
  OrphanNode,
  ChildlessNode,
  EmptyLevel,
  InvalidLeaf,
  InvalidNode,
  // ingest
  IoError,
  SchemaError,
  ValueError,
  EmptyAfterFilter,
  // ahl
  NonPositiveTau,
  HierarchyMismatch,
  DegenerateParent,
  ConflictingFlags,
  // trainer
  IndexOutOfRange,
  EmptyTrainSplit,
  CheckpointMismatch,
  // metrics
  EmptySplit,
  // synth
  InfeasibleConfig,
  // cli / config
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Coarse grouping used by the CLI to pick an exit code.
enum class ErrorCategory { Config, Io, Data };

ErrorCategory category_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  /// For errors tied to a line of an input file (1-based).
  Error(ErrorCode code, const std::string& message, std::size_t line);

  ErrorCode code() const noexcept { return code_; }
  /// 0 when the error is not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::size_t line_ = 0;
};

}  // namespace hiertail
