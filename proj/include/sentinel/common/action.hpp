#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace sentinel {

enum class ActionKind { Quarantine, PowerOff, Patch, AddException };

std::string_view to_string(ActionKind kind);
std::optional<ActionKind> parse_action_kind(std::string_view text);

/// Operator or automation command applied back to the network.
struct ResponseAction {
  ActionKind action = ActionKind::Quarantine;
  std::string target;  // node_id, or source_id for add_exception
  std::string incident_ref;
  std::string requested_by;
  std::int64_t requested_ms = 0;
  // add_exception only; nullopt means "never expires".
  std::optional<std::int64_t> expires_ms;
  std::string reason;
};

}  // namespace sentinel
