#include "sentinel/events/event.hpp"

namespace sentinel::events {

std::string_view to_string(EventType type) {
  switch (type) {
    case EventType::DosFlood: return "dos_flood";
    case EventType::UnauthorizedAccess: return "unauthorized_access";
    case EventType::DataIntegrity: return "data_integrity";
    case EventType::EnergyDrain: return "energy_drain";
    case EventType::Overheat: return "overheat";
    case EventType::HardwareFailure: return "hardware_failure";
    case EventType::SlaBreach: return "sla_breach";
  }
  return "unknown";
}

std::optional<EventType> parse_event_type(std::string_view text) {
  for (auto t : kAllEventTypes) {
    if (to_string(t) == text) return t;
  }
  return std::nullopt;
}

int severity_of(EventType type) {
  switch (type) {
    case EventType::DosFlood: return 1;
    case EventType::Overheat: return 1;
    case EventType::UnauthorizedAccess: return 2;
    case EventType::DataIntegrity: return 2;
    case EventType::EnergyDrain: return 2;
    case EventType::HardwareFailure: return 2;
    case EventType::SlaBreach: return 3;
  }
  return 5;
}

std::string make_dedup_key(EventType type, std::string_view source_id, std::string_view resource) {
  std::string key(to_string(type));
  key += '|';
  key += source_id;
  key += '|';
  key += resource;
  return key;
}

Event finalize(EventDraft draft, std::uint64_t event_id, std::optional<std::string> ci_id) {
  Event e;
  e.event_id = event_id;
  e.type = draft.type;
  e.severity = severity_of(draft.type);
  e.dedup_key = make_dedup_key(draft.type, draft.source_id, ci_id ? *ci_id : draft.resource);
  e.source_id = std::move(draft.source_id);
  e.ci_id = std::move(ci_id);
  e.created_ms = draft.created_ms;
  e.payload = std::move(draft.payload);
  return e;
}

Json to_json(const Event& e) {
  return {{"event_id", e.event_id},
          {"type", to_string(e.type)},
          {"source_id", e.source_id},
          {"ci_id", e.ci_id ? Json(*e.ci_id) : Json(nullptr)},
          {"severity", e.severity},
          {"dedup_key", e.dedup_key},
          {"created_ms", e.created_ms},
          {"payload", e.payload}};
}

Event event_from_json(const Json& j) {
  Event e;
  e.event_id = j.at("event_id").get<std::uint64_t>();
  e.type = parse_event_type(j.at("type").get<std::string>()).value();
  e.source_id = j.at("source_id").get<std::string>();
  if (j.contains("ci_id") && j.at("ci_id").is_string()) e.ci_id = j.at("ci_id").get<std::string>();
  e.severity = j.at("severity").get<int>();
  e.dedup_key = j.at("dedup_key").get<std::string>();
  e.created_ms = j.at("created_ms").get<std::int64_t>();
  e.payload = j.value("payload", Json::object());
  return e;
}

}  // namespace sentinel::events
