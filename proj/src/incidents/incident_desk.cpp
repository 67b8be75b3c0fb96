#include "sentinel/incidents/incident_desk.hpp"

#include <algorithm>

#include "sentinel/common/error.hpp"

namespace sentinel::incidents {

namespace {

constexpr std::int64_t kSecond = 1000;

bool allowed(IncidentState from, IncidentState to) {
  switch (from) {
    case IncidentState::New:
      return to == IncidentState::InProgress;
    case IncidentState::InProgress:
      return to == IncidentState::Resolved;
    case IncidentState::Resolved:
      return to == IncidentState::Closed || to == IncidentState::InProgress;
    case IncidentState::Closed:
      return false;
  }
  return false;
}

std::uint64_t number_of(const std::string& reference) { return std::stoull(reference.substr(3)); }

}  // namespace

std::string_view to_string(IncidentState s) {
  switch (s) {
    case IncidentState::New: return "new";
    case IncidentState::InProgress: return "in_progress";
    case IncidentState::Resolved: return "resolved";
    case IncidentState::Closed: return "closed";
  }
  return "new";
}

std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::Tier1: return "tier1";
    case Tier::Tier2: return "tier2";
    case Tier::FlowThrough: return "flow_through";
  }
  return "flow_through";
}

std::optional<IncidentState> parse_incident_state(std::string_view text) {
  for (auto s : {IncidentState::New, IncidentState::InProgress, IncidentState::Resolved, IncidentState::Closed}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

namespace {

std::optional<Tier> parse_tier(std::string_view text) {
  for (auto t : {Tier::Tier1, Tier::Tier2, Tier::FlowThrough}) {
    if (to_string(t) == text) return t;
  }
  return std::nullopt;
}

}  // namespace

int priority_of(int impact, int urgency) {
  if (impact < 1 || impact > 3 || urgency < 1 || urgency > 3) {
    throw Error(ErrorCode::OutOfRange,
                "impact/urgency must be 1..3, got " + std::to_string(impact) + "/" + std::to_string(urgency));
  }
  // The matrix is symmetric and its cells follow impact + urgency - 1.
  return impact + urgency - 1;
}

SlaPolicy SlaPolicy::defaults() {
  SlaPolicy p;
  p.by_priority[0] = {300 * kSecond, 3600 * kSecond};
  p.by_priority[1] = {900 * kSecond, 4 * 3600 * kSecond};
  for (int i = 2; i < 5; ++i) p.by_priority[i] = {3600 * kSecond, 24 * 3600 * kSecond};
  return p;
}

void SlaPolicy::validate() const {
  for (std::size_t i = 0; i < by_priority.size(); ++i) {
    const auto& t = by_priority[i];
    if (t.response_ms <= 0 || t.response_ms >= t.resolve_ms) {
      throw Error(ErrorCode::InvalidArgument,
                  "sla for P" + std::to_string(i + 1) + ": response must be positive and shorter than resolution");
    }
  }
}

ImpactUrgency IncidentRules::lookup(events::EventType type) const {
  const auto it = table.find(type);
  return it == table.end() ? fallback : it->second;
}

Tier IncidentRules::tier_for(int severity) {
  if (severity <= 1) return Tier::Tier1;
  if (severity == 2) return Tier::Tier2;
  return Tier::FlowThrough;
}

IncidentDesk::IncidentDesk(IncidentRules rules, SlaPolicy sla) : rules_(std::move(rules)), sla_(sla) {
  sla_.validate();
  for (const auto& [type, iu] : rules_.table) priority_of(iu.impact, iu.urgency);
  priority_of(rules_.fallback.impact, rules_.fallback.urgency);
}

IncidentDesk::OpenResult IncidentDesk::open_incident(const events::Alert& alert, std::int64_t now_ms) {
  const auto linked = by_alert_.find(alert.alert_id);
  if (linked != by_alert_.end()) {
    const Incident& existing = incidents_.at(linked->second);
    if (existing.state != IncidentState::Closed) return {&existing, false};
  }
  if (alert.severity > rules_.auto_incident_severity) return {};

  Incident inc;
  inc.reference = format_reference("INC", next_incident_++);
  inc.alert_id = alert.alert_id;
  inc.event_type = alert.type;
  inc.source_id = alert.source_id;
  const ImpactUrgency iu = rules_.lookup(alert.type);
  inc.impact = iu.impact;
  inc.urgency = iu.urgency;
  inc.priority = priority_of(iu.impact, iu.urgency);
  inc.tier = IncidentRules::tier_for(alert.severity);
  inc.opened_ms = now_ms;
  const SlaTarget& target = sla_.for_priority(inc.priority);
  inc.response_due_ms = now_ms + target.response_ms;
  inc.resolve_due_ms = now_ms + target.resolve_ms;
  inc.work_notes.push_back({now_ms, "system",
                            "opened from " + alert.alert_id + " (" + std::string(events::to_string(alert.type)) +
                                " on " + alert.source_id + ")"});

  const std::string ref = inc.reference;
  by_alert_[alert.alert_id] = ref;
  const auto [it, _] = incidents_.emplace(ref, std::move(inc));
  return {&it->second, true};
}

Incident& IncidentDesk::writable(const std::string& reference) {
  const auto it = incidents_.find(reference);
  if (it == incidents_.end()) throw Error(ErrorCode::NotFound, "no incident " + reference);
  return it->second;
}

const Incident& IncidentDesk::transition(const std::string& reference, IncidentState to, const std::string& actor,
                                         const std::string& note, std::int64_t now_ms) {
  Incident& inc = writable(reference);
  if (!allowed(inc.state, to)) {
    throw Error(ErrorCode::IllegalTransition, reference + ": " + std::string(to_string(inc.state)) + " -> " +
                                                  std::string(to_string(to)));
  }
  inc.history.push_back({now_ms, actor, inc.state, to});
  std::string text = std::string(to_string(inc.state)) + " -> " + std::string(to_string(to));
  if (!note.empty()) text += ": " + note;
  inc.state = to;
  inc.work_notes.push_back({now_ms, actor, std::move(text)});
  return inc;
}

const Incident& IncidentDesk::add_note(const std::string& reference, const std::string& actor,
                                       const std::string& text, std::int64_t now_ms) {
  Incident& inc = writable(reference);
  if (inc.state == IncidentState::Closed) throw Error(ErrorCode::ImmutableRecord, reference + " is closed");
  inc.work_notes.push_back({now_ms, actor, text});
  return inc;
}

std::vector<events::EventDraft> IncidentDesk::sla_evaluate(const std::string& reference, std::int64_t now_ms) {
  Incident& inc = writable(reference);
  std::vector<events::EventDraft> out;
  if (inc.state == IncidentState::Closed) return out;

  const auto breach = [&](const char* clock, std::int64_t due_ms) {
    events::EventDraft d;
    d.type = events::EventType::SlaBreach;
    d.source_id = inc.reference;
    d.resource = clock;
    d.created_ms = now_ms;
    d.payload = {{"clock", clock}, {"due_ms", due_ms}, {"priority", inc.priority}, {"alert_id", inc.alert_id}};
    out.push_back(std::move(d));
  };
  // Response is met once someone has picked the incident up.
  if (!inc.response_breached && inc.state == IncidentState::New && now_ms > inc.response_due_ms) {
    inc.response_breached = true;
    breach("response", inc.response_due_ms);
  }
  if (!inc.resolve_breached && inc.state != IncidentState::Resolved && now_ms > inc.resolve_due_ms) {
    inc.resolve_breached = true;
    breach("resolution", inc.resolve_due_ms);
  }
  return out;
}

std::vector<events::EventDraft> IncidentDesk::sla_evaluate_all(std::int64_t now_ms) {
  std::vector<events::EventDraft> out;
  for (auto& [ref, inc] : incidents_) {
    auto drafts = sla_evaluate(ref, now_ms);
    out.insert(out.end(), std::make_move_iterator(drafts.begin()), std::make_move_iterator(drafts.end()));
  }
  return out;
}

DispatchReceipt IncidentDesk::execute_response(const ResponseAction& action, ActionDispatcher& dispatcher,
                                               std::int64_t now_ms) {
  Incident& inc = writable(action.incident_ref);
  if (inc.state == IncidentState::Closed) throw Error(ErrorCode::ImmutableRecord, inc.reference + " is closed");
  if (inc.state != IncidentState::InProgress) {
    throw Error(ErrorCode::NotInProgress,
                inc.reference + " is " + std::string(to_string(inc.state)) + ", responses need in_progress");
  }
  DispatchReceipt r;
  r.effect = dispatcher.dispatch(action);
  r.receipt_id = format_reference("RSP", next_receipt_++);
  r.action = action;
  r.applied_ms = now_ms;
  inc.work_notes.push_back({now_ms, action.requested_by.empty() ? "system" : action.requested_by,
                            std::string(to_string(action.action)) + " " + action.target + " (" + r.receipt_id + ")"});
  return r;
}

void IncidentDesk::restore(const Incident& incident) {
  incidents_[incident.reference] = incident;
  by_alert_[incident.alert_id] = incident.reference;
  next_incident_ = std::max(next_incident_, number_of(incident.reference) + 1);
}

void IncidentDesk::note_receipt(const std::string& receipt_id) {
  next_receipt_ = std::max(next_receipt_, number_of(receipt_id) + 1);
}

const Incident* IncidentDesk::find(const std::string& reference) const {
  const auto it = incidents_.find(reference);
  return it == incidents_.end() ? nullptr : &it->second;
}

const Incident* IncidentDesk::find_by_alert(const std::string& alert_id) const {
  const auto it = by_alert_.find(alert_id);
  return it == by_alert_.end() ? nullptr : find(it->second);
}

Json to_json(const Incident& inc) {
  Json notes = Json::array();
  for (const auto& n : inc.work_notes) notes.push_back({{"ts_ms", n.ts_ms}, {"actor", n.actor}, {"text", n.text}});
  Json history = Json::array();
  for (const auto& h : inc.history) {
    history.push_back(
        {{"ts_ms", h.ts_ms}, {"actor", h.actor}, {"from", to_string(h.from)}, {"to", to_string(h.to)}});
  }
  return {{"reference", inc.reference},
          {"alert_id", inc.alert_id},
          {"event_type", events::to_string(inc.event_type)},
          {"source_id", inc.source_id},
          {"state", to_string(inc.state)},
          {"impact", inc.impact},
          {"urgency", inc.urgency},
          {"priority", inc.priority},
          {"tier", to_string(inc.tier)},
          {"service_request", inc.service_request},
          {"opened_ms", inc.opened_ms},
          {"response_due_ms", inc.response_due_ms},
          {"resolve_due_ms", inc.resolve_due_ms},
          {"response_breached", inc.response_breached},
          {"resolve_breached", inc.resolve_breached},
          {"work_notes", std::move(notes)},
          {"history", std::move(history)}};
}

Incident incident_from_json(const Json& j) {
  Incident inc;
  inc.reference = j.at("reference").get<std::string>();
  inc.alert_id = j.at("alert_id").get<std::string>();
  const auto type = events::parse_event_type(j.at("event_type").get<std::string>());
  const auto state = parse_incident_state(j.at("state").get<std::string>());
  const auto tier = parse_tier(j.at("tier").get<std::string>());
  if (!type || !state || !tier) throw Error(ErrorCode::InvalidArgument, "malformed incident " + inc.reference);
  inc.event_type = *type;
  inc.state = *state;
  inc.tier = *tier;
  inc.source_id = j.at("source_id").get<std::string>();
  inc.impact = j.at("impact").get<int>();
  inc.urgency = j.at("urgency").get<int>();
  inc.priority = j.at("priority").get<int>();
  inc.service_request = j.value("service_request", true);
  inc.opened_ms = j.at("opened_ms").get<std::int64_t>();
  inc.response_due_ms = j.at("response_due_ms").get<std::int64_t>();
  inc.resolve_due_ms = j.at("resolve_due_ms").get<std::int64_t>();
  inc.response_breached = j.value("response_breached", false);
  inc.resolve_breached = j.value("resolve_breached", false);
  for (const auto& n : j.value("work_notes", Json::array())) {
    inc.work_notes.push_back({n.at("ts_ms").get<std::int64_t>(), n.at("actor").get<std::string>(),
                              n.at("text").get<std::string>()});
  }
  for (const auto& h : j.value("history", Json::array())) {
    const auto from = parse_incident_state(h.at("from").get<std::string>());
    const auto to = parse_incident_state(h.at("to").get<std::string>());
    if (!from || !to) throw Error(ErrorCode::InvalidArgument, "malformed history in " + inc.reference);
    inc.history.push_back({h.at("ts_ms").get<std::int64_t>(), h.at("actor").get<std::string>(), *from, *to});
  }
  return inc;
}

Json to_json(const DispatchReceipt& r) {
  Json action = {{"action", to_string(r.action.action)},
                 {"target", r.action.target},
                 {"incident_ref", r.action.incident_ref},
                 {"requested_by", r.action.requested_by},
                 {"requested_ms", r.action.requested_ms},
                 {"reason", r.action.reason}};
  if (r.action.action == ActionKind::AddException) {
    action["expires_ms"] = r.action.expires_ms ? Json(*r.action.expires_ms) : Json("never");
  }
  return {{"receipt_id", r.receipt_id}, {"applied_ms", r.applied_ms}, {"action", std::move(action)},
          {"effect", r.effect}};
}

Json IncidentDesk::to_json() const {
  Json list = Json::array();
  for (const auto& [ref, inc] : incidents_) list.push_back(incidents::to_json(inc));
  return {{"incidents", std::move(list)}, {"next_incident", next_incident_}, {"next_receipt", next_receipt_}};
}

IncidentDesk IncidentDesk::from_json(const Json& j, IncidentRules rules, SlaPolicy sla) {
  IncidentDesk desk(std::move(rules), sla);
  for (const auto& item : j.at("incidents")) desk.restore(incident_from_json(item));
  desk.next_incident_ = std::max(desk.next_incident_, j.value("next_incident", std::uint64_t{1}));
  desk.next_receipt_ = j.value("next_receipt", std::uint64_t{1});
  return desk;
}

}  // namespace sentinel::incidents
