#include "sentinel/events/alert_store.hpp"

#include <algorithm>
#include <string>

#include "sentinel/common/error.hpp"

namespace sentinel::events {

namespace {

std::uint64_t alert_number(const std::string& alert_id) {
  return std::stoull(alert_id.substr(3));
}

}  // namespace

AlertDelta AlertStore::correlate(const Event& event, std::int64_t dedup_window_ms) {
  if (!seen_events_.insert(event.event_id).second) {
    const auto it = open_by_key_.find(event.dedup_key);
    return {AlertDelta::Kind::Duplicate, it == open_by_key_.end() ? std::string{} : it->second};
  }
  const auto open = open_by_key_.find(event.dedup_key);
  if (open != open_by_key_.end()) {
    Alert& a = alerts_.at(open->second);
    if (a.state == AlertState::Open && event.created_ms - a.last_seen_ms <= dedup_window_ms) {
      ++a.count;
      a.first_seen_ms = std::min(a.first_seen_ms, event.created_ms);
      a.last_seen_ms = std::max(a.last_seen_ms, event.created_ms);
      a.severity = std::min(a.severity, event.severity);
      return {AlertDelta::Kind::Incremented, a.alert_id};
    }
  }
  Alert a;
  a.alert_id = format_reference("ALR", next_alert_++);
  a.dedup_key = event.dedup_key;
  a.type = event.type;
  a.source_id = event.source_id;
  a.count = 1;
  a.first_seen_ms = a.last_seen_ms = event.created_ms;
  a.severity = event.severity;
  open_by_key_[a.dedup_key] = a.alert_id;
  const std::string id = a.alert_id;
  alerts_.emplace(id, std::move(a));
  return {AlertDelta::Kind::Created, id};
}

void AlertStore::close(const std::string& alert_id) {
  const auto it = alerts_.find(alert_id);
  if (it == alerts_.end()) throw Error(ErrorCode::NotFound, "no alert " + alert_id);
  it->second.state = AlertState::Closed;
  const auto open = open_by_key_.find(it->second.dedup_key);
  if (open != open_by_key_.end() && open->second == alert_id) open_by_key_.erase(open);
}

void AlertStore::restore(const Alert& alert) {
  alerts_[alert.alert_id] = alert;
  next_alert_ = std::max(next_alert_, alert_number(alert.alert_id) + 1);
  if (alert.state == AlertState::Open) {
    open_by_key_[alert.dedup_key] = alert.alert_id;
  } else {
    const auto open = open_by_key_.find(alert.dedup_key);
    if (open != open_by_key_.end() && open->second == alert.alert_id) open_by_key_.erase(open);
  }
}

const Alert* AlertStore::find(const std::string& alert_id) const {
  const auto it = alerts_.find(alert_id);
  return it == alerts_.end() ? nullptr : &it->second;
}

Json to_json(const Alert& a) {
  return {{"alert_id", a.alert_id},
          {"dedup_key", a.dedup_key},
          {"type", to_string(a.type)},
          {"source_id", a.source_id},
          {"count", a.count},
          {"first_seen_ms", a.first_seen_ms},
          {"last_seen_ms", a.last_seen_ms},
          {"severity", a.severity},
          {"state", a.state == AlertState::Open ? "Open" : "Closed"}};
}

Alert alert_from_json(const Json& j) {
  Alert a;
  a.alert_id = j.at("alert_id").get<std::string>();
  a.dedup_key = j.at("dedup_key").get<std::string>();
  a.type = parse_event_type(j.at("type").get<std::string>()).value();
  a.source_id = j.at("source_id").get<std::string>();
  a.count = j.at("count").get<std::uint64_t>();
  a.first_seen_ms = j.at("first_seen_ms").get<std::int64_t>();
  a.last_seen_ms = j.at("last_seen_ms").get<std::int64_t>();
  a.severity = j.at("severity").get<int>();
  a.state = j.at("state").get<std::string>() == "Open" ? AlertState::Open : AlertState::Closed;
  return a;
}

Json AlertStore::to_json() const {
  Json items = Json::object();
  for (const auto& [id, a] : alerts_) items[id] = events::to_json(a);
  return {{"alerts", items}, {"next_alert", next_alert_}};
}

AlertStore AlertStore::from_json(const Json& j) {
  AlertStore store;
  for (const auto& [_, a] : j.at("alerts").items()) store.restore(alert_from_json(a));
  store.next_alert_ = j.at("next_alert").get<std::uint64_t>();
  return store;
}

}  // namespace sentinel::events
