#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "sentinel/events/event.hpp"

namespace sentinel::events {

enum class AlertState { Open, Closed };

struct Alert {
  std::string alert_id;
  std::string dedup_key;
  EventType type = EventType::DataIntegrity;
  std::string source_id;
  std::uint64_t count = 0;
  std::int64_t first_seen_ms = 0;
  std::int64_t last_seen_ms = 0;
  int severity = 5;
  AlertState state = AlertState::Open;
};

Json to_json(const Alert& a);
Alert alert_from_json(const Json& j);

struct AlertDelta {
  enum class Kind { Created, Incremented, Duplicate };
  Kind kind = Kind::Created;
  std::string alert_id;
};

/// Deduplicating alert store: events sharing a dedup key within the window
/// collapse onto one open alert.
class AlertStore {
 public:
  AlertDelta correlate(const Event& event, std::int64_t dedup_window_ms);

  /// Throws NotFound.
  void close(const std::string& alert_id);
  /// Writes a journaled snapshot back (replay).
  void restore(const Alert& alert);

  const Alert* find(const std::string& alert_id) const;
  const std::map<std::string, Alert>& alerts() const { return alerts_; }
  std::size_t size() const { return alerts_.size(); }

  Json to_json() const;
  static AlertStore from_json(const Json& j);

 private:
  std::map<std::string, Alert> alerts_;
  std::map<std::string, std::string> open_by_key_;
  std::unordered_set<std::uint64_t> seen_events_;
  std::uint64_t next_alert_ = 1;
};

}  // namespace sentinel::events
