#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sentinel/common/action.hpp"
#include "sentinel/common/json.hpp"
#include "sentinel/events/alert_store.hpp"
#include "sentinel/events/event.hpp"

namespace sentinel::incidents {

enum class IncidentState { New, InProgress, Resolved, Closed };
enum class Tier { Tier1, Tier2, FlowThrough };

std::string_view to_string(IncidentState s);
std::string_view to_string(Tier t);
std::optional<IncidentState> parse_incident_state(std::string_view text);

struct WorkNote {
  std::int64_t ts_ms = 0;
  std::string actor;
  std::string text;
};

struct StateChange {
  std::int64_t ts_ms = 0;
  std::string actor;
  IncidentState from = IncidentState::New;
  IncidentState to = IncidentState::New;
};

struct Incident {
  std::string reference;
  std::string alert_id;
  events::EventType event_type = events::EventType::DataIntegrity;
  std::string source_id;
  IncidentState state = IncidentState::New;
  int impact = 3;
  int urgency = 3;
  int priority = 5;
  Tier tier = Tier::FlowThrough;
  bool service_request = true;  // the accompanying service request rides on the incident
  std::int64_t opened_ms = 0;
  std::int64_t response_due_ms = 0;
  std::int64_t resolve_due_ms = 0;
  bool response_breached = false;
  bool resolve_breached = false;
  std::vector<WorkNote> work_notes;
  std::vector<StateChange> history;
};

Json to_json(const Incident& inc);
Incident incident_from_json(const Json& j);

/// ITSM impact x urgency matrix. Throws OutOfRange outside 1..3.
int priority_of(int impact, int urgency);

struct SlaTarget {
  std::int64_t response_ms = 0;
  std::int64_t resolve_ms = 0;
};

struct SlaPolicy {
  std::array<SlaTarget, 5> by_priority{};  // index = priority - 1

  static SlaPolicy defaults();
  const SlaTarget& for_priority(int priority) const { return by_priority.at(priority - 1); }
  /// Throws InvalidArgument unless response < resolution for every priority.
  void validate() const;
};

struct ImpactUrgency {
  int impact = 3;
  int urgency = 3;
};

struct IncidentRules {
  int auto_incident_severity = 2;  // alerts at or above this severity (numerically <=) open incidents
  std::map<events::EventType, ImpactUrgency> table = {
      {events::EventType::DosFlood, {1, 1}},
      {events::EventType::UnauthorizedAccess, {2, 1}},
      {events::EventType::Overheat, {1, 2}},
      {events::EventType::DataIntegrity, {2, 2}},
      {events::EventType::EnergyDrain, {2, 3}},
  };
  ImpactUrgency fallback{2, 2};

  ImpactUrgency lookup(events::EventType type) const;
  static Tier tier_for(int severity);
};

/// Applies a response action to the outside world and describes the effect.
/// Throws sentinel::Error to reject it.
class ActionDispatcher {
 public:
  virtual ~ActionDispatcher() = default;
  virtual Json dispatch(const ResponseAction& action) = 0;
};

struct DispatchReceipt {
  std::string receipt_id;
  ResponseAction action;
  std::int64_t applied_ms = 0;
  Json effect;
};

Json to_json(const DispatchReceipt& r);

/// Incident lifecycle: creation from alerts, guarded transitions, SLA clocks
/// and remediation dispatch. Single writer.
class IncidentDesk {
 public:
  IncidentDesk() : IncidentDesk(IncidentRules{}, SlaPolicy::defaults()) {}
  IncidentDesk(IncidentRules rules, SlaPolicy sla);

  struct OpenResult {
    const Incident* incident = nullptr;  // null: alert does not qualify
    bool created = false;
  };

  OpenResult open_incident(const events::Alert& alert, std::int64_t now_ms);

  /// Throws NotFound / IllegalTransition / ImmutableRecord.
  const Incident& transition(const std::string& reference, IncidentState to, const std::string& actor,
                             const std::string& note, std::int64_t now_ms);

  /// Throws NotFound / ImmutableRecord.
  const Incident& add_note(const std::string& reference, const std::string& actor, const std::string& text,
                           std::int64_t now_ms);

  /// Single-shot breach drafts for one incident; repeated polling is idempotent.
  std::vector<events::EventDraft> sla_evaluate(const std::string& reference, std::int64_t now_ms);
  std::vector<events::EventDraft> sla_evaluate_all(std::int64_t now_ms);

  /// Requires InProgress. Throws NotFound / ImmutableRecord / NotInProgress,
  /// or whatever the dispatcher throws; nothing is recorded on rejection.
  DispatchReceipt execute_response(const ResponseAction& action, ActionDispatcher& dispatcher,
                                   std::int64_t now_ms);

  void restore(const Incident& incident);
  /// Keeps receipt numbering monotone across replay.
  void note_receipt(const std::string& receipt_id);

  const Incident* find(const std::string& reference) const;
  const Incident* find_by_alert(const std::string& alert_id) const;
  const std::map<std::string, Incident>& incidents() const { return incidents_; }
  const IncidentRules& rules() const { return rules_; }
  const SlaPolicy& sla() const { return sla_; }

  Json to_json() const;
  /// Rules and SLA policy are configuration, not state; pass them back in.
  static IncidentDesk from_json(const Json& j, IncidentRules rules, SlaPolicy sla);

 private:
  Incident& writable(const std::string& reference);

  IncidentRules rules_;
  SlaPolicy sla_;
  std::map<std::string, Incident> incidents_;
  std::map<std::string, std::string> by_alert_;
  std::uint64_t next_incident_ = 1;
  std::uint64_t next_receipt_ = 1;
};

}  // namespace sentinel::incidents
