#include "sentinel/common/error.hpp"

namespace sentinel {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::DuplicateId: return "duplicate_id";
    case ErrorCode::MissingSink: return "missing_sink";
    case ErrorCode::UnknownTarget: return "unknown_target";
    case ErrorCode::OverlappingAttack: return "overlapping_attack";
    case ErrorCode::InvalidAction: return "invalid_action";
    case ErrorCode::ClassChange: return "class_change";
    case ErrorCode::InvalidClass: return "invalid_class";
    case ErrorCode::SelfRelation: return "self_relation";
    case ErrorCode::DependencyCycle: return "dependency_cycle";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::IllegalTransition: return "illegal_transition";
    case ErrorCode::ImmutableRecord: return "immutable_record";
    case ErrorCode::NotInProgress: return "not_in_progress";
    case ErrorCode::OutOfRange: return "out_of_range";
    case ErrorCode::JournalCorrupt: return "journal_corrupt";
    case ErrorCode::Io: return "io_error";
  }
  return "unknown";
}

}  // namespace sentinel
