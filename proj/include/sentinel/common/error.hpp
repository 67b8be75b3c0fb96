#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sentinel {

enum class ErrorCode {
  InvalidArgument,
  DuplicateId,
  MissingSink,
  UnknownTarget,
  OverlappingAttack,
  InvalidAction,
  ClassChange,
  InvalidClass,
  SelfRelation,
  DependencyCycle,
  NotFound,
  IllegalTransition,
  ImmutableRecord,
  NotInProgress,
  OutOfRange,
  JournalCorrupt,
  Io,
};

/// Machine-readable snake_case name, used verbatim in API error bodies.
std::string_view to_string(ErrorCode code);

/// Rejection raised by domain operations. Callers that cross a process or
/// wire boundary translate it into exit codes or ApiError bodies.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sentinel
