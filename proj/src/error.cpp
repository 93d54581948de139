#include "hiertail/error.hpp"

namespace hiertail {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateChild: return "DuplicateChild";
    case ErrorCode::OrphanNode: return "OrphanNode";
    case ErrorCode::ChildlessNode: return "ChildlessNode";
    case ErrorCode::EmptyLevel: return "EmptyLevel";
    case ErrorCode::InvalidLeaf: return "InvalidLeaf";
    case ErrorCode::InvalidNode: return "InvalidNode";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::ValueError: return "ValueError";
    case ErrorCode::EmptyAfterFilter: return "EmptyAfterFilter";
    case ErrorCode::NonPositiveTau: return "NonPositiveTau";
    case ErrorCode::HierarchyMismatch: return "HierarchyMismatch";
    case ErrorCode::DegenerateParent: return "DegenerateParent";
    case ErrorCode::ConflictingFlags: return "ConflictingFlags";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EmptyTrainSplit: return "EmptyTrainSplit";
    case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::InfeasibleConfig: return "InfeasibleConfig";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::ConflictingFlags:
    case ErrorCode::InfeasibleConfig:
    case ErrorCode::NonPositiveTau:
      return ErrorCategory::Config;
    case ErrorCode::IoError:
      return ErrorCategory::Io;
    default:
      return ErrorCategory::Data;
  }
}

namespace {

std::string format_message(ErrorCode code, const std::string& message,
                           std::size_t line) {
  std::string out(to_string(code));
  if (line > 0) out += " at line " + std::to_string(line);
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(format_message(code, message, 0)), code_(code) {}

Error::Error(ErrorCode code, const std::string& message, std::size_t line)
    : std::runtime_error(format_message(code, message, line)),
      code_(code),
      line_(line) {}

}  // namespace hiertail
