#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "sentinel/common/json.hpp"

namespace sentinel::events {

enum class EventType {
  DosFlood,
  UnauthorizedAccess,
  DataIntegrity,
  EnergyDrain,
  Overheat,
  HardwareFailure,
  SlaBreach,
};

inline constexpr EventType kAllEventTypes[] = {
    EventType::DosFlood,     EventType::UnauthorizedAccess, EventType::DataIntegrity,
    EventType::EnergyDrain,  EventType::Overheat,           EventType::HardwareFailure,
    EventType::SlaBreach,
};

std::string_view to_string(EventType type);
std::optional<EventType> parse_event_type(std::string_view text);

/// 1 is the most severe. Defined for every type.
int severity_of(EventType type);

std::string make_dedup_key(EventType type, std::string_view source_id, std::string_view resource);

/// Detector output before the engine stamps an id and CI link.
struct EventDraft {
  EventType type = EventType::DataIntegrity;
  std::string source_id;
  std::string resource;
  std::int64_t created_ms = 0;
  Json payload = Json::object();
};

struct Event {
  std::uint64_t event_id = 0;
  EventType type = EventType::DataIntegrity;
  std::string source_id;
  std::optional<std::string> ci_id;
  int severity = 5;
  std::string dedup_key;
  std::int64_t created_ms = 0;
  Json payload = Json::object();
};

/// Stamps id, severity and dedup key. The resource is the CI id when the
/// source is registered, otherwise the draft's resource.
Event finalize(EventDraft draft, std::uint64_t event_id, std::optional<std::string> ci_id);

Json to_json(const Event& e);
Event event_from_json(const Json& j);

}  // namespace sentinel::events
