#include "sentinel/gateway/state.hpp"

#include "sentinel/common/error.hpp"
#include "sentinel/common/sha256.hpp"
#include "sentinel/ingest/import_set.hpp"

namespace sentinel::gateway {

void RunStats::apply(std::string_view kind, std::int64_t ts_ms, const Json& b) {
  last_ts_ms_ = std::max(last_ts_ms_, ts_ms);

  if (kind == "telemetry") {
    ++telemetry_;
    if (b.value("suppressed", false)) ++suppressed_;
    const auto it = last_action_.find(b.at("source_id").get<std::string>());
    if (it != last_action_.end()) {
      ActionOutcome& a = actions_[it->second];
      if (b.at("sink_arrival_ms").get<std::int64_t>() > a.applied_ms) ++a.records_after;
    }
  } else if (kind == "event") {
    ++events_;
    const std::string type = b.at("type").get<std::string>();
    ++events_by_type_[type];
    if (type == "sla_breach") ++sla_breaches_;
    const std::string source = b.at("source_id").get<std::string>();
    const std::int64_t created = b.at("created_ms").get<std::int64_t>();
    for (auto& e : expectations_) {
      if (!e.detected_ms && e.event_type == type && e.target == source && created >= e.start_ms) {
        e.detected_ms = created;
      }
    }
  } else if (kind == "alert") {
    alert_types_[b.at("alert_id").get<std::string>()] = b.at("type").get<std::string>();
  } else if (kind == "incident") {
    incidents_[b.at("reference").get<std::string>()] = {
        {"alert_id", b.at("alert_id")}, {"event_type", b.at("event_type")}, {"source_id", b.at("source_id")},
        {"priority", b.at("priority")}, {"tier", b.at("tier")},           {"state", b.at("state")},
        {"opened_ms", b.at("opened_ms")}};
  } else if (kind == "action") {
    const Json& a = b.at("action");
    ActionOutcome out;
    out.receipt_id = b.at("receipt_id").get<std::string>();
    out.action = a.at("action").get<std::string>();
    out.target = a.at("target").get<std::string>();
    out.incident_ref = a.at("incident_ref").get<std::string>();
    out.applied_ms = b.at("applied_ms").get<std::int64_t>();
    last_action_[out.target] = actions_.size();
    actions_.push_back(std::move(out));
  } else if (kind == "import") {
    const Json& r = b.at("result");
    imports_["batches"] = imports_["batches"].get<std::uint64_t>() + 1;
    for (const char* f : {"inserted", "updated", "skipped", "errored"}) {
      imports_[f] = imports_[f].get<std::uint64_t>() + r.at(f).get<std::uint64_t>();
    }
  } else if (kind == "sim_delta") {
    const std::string delta = b.at("kind").get<std::string>();
    const Json& d = b.at("detail");
    if (delta == "scenario_started") {
      scenario_ = {{"name", d.at("name")}, {"seed", d.at("seed")}, {"duration_ms", d.at("duration_ms")}};
      for (const auto& e : d.at("expectations")) {
        Expectation x;
        x.label = e.at("label").get<std::string>();
        x.target = e.at("target").get<std::string>();
        if (!e.at("event_type").is_null()) x.event_type = e.at("event_type").get<std::string>();
        x.start_ms = e.at("start_ms").get<std::int64_t>();
        expectations_.push_back(std::move(x));
      }
    } else if (delta == "energy_snapshot") {
      energy_.clear();
      for (const auto& n : d.at("nodes")) {
        energy_.push_back({n.at("id").get<std::string>(), n.at("battery_nj").get<std::int64_t>(),
                           n.at("status").get<std::string>()});
      }
    }
  }
}

Json RunStats::to_json() const {
  Json expectations = Json::array();
  for (const auto& e : expectations_) {
    expectations.push_back({{"label", e.label},
                            {"target", e.target},
                            {"event_type", e.event_type ? Json(*e.event_type) : Json(nullptr)},
                            {"start_ms", e.start_ms},
                            {"detected_ms", e.detected_ms ? Json(*e.detected_ms) : Json(nullptr)}});
  }
  Json actions = Json::array();
  for (const auto& a : actions_) {
    actions.push_back({{"receipt_id", a.receipt_id},
                       {"action", a.action},
                       {"target", a.target},
                       {"incident_ref", a.incident_ref},
                       {"applied_ms", a.applied_ms},
                       {"records_after", a.records_after}});
  }
  Json energy = Json::array();
  for (const auto& n : energy_) energy.push_back({{"id", n.id}, {"battery_nj", n.battery_nj}, {"status", n.status}});
  return {{"scenario", scenario_},
          {"telemetry", telemetry_},
          {"suppressed", suppressed_},
          {"events", events_},
          {"events_by_type", events_by_type_},
          {"sla_breaches", sla_breaches_},
          {"alerts", alert_types_},
          {"incidents", incidents_},
          {"expectations", std::move(expectations)},
          {"actions", std::move(actions)},
          {"energy", std::move(energy)},
          {"imports", imports_},
          {"last_ts_ms", last_ts_ms_}};
}

RunStats RunStats::from_json(const Json& j) {
  RunStats s;
  s.scenario_ = j.at("scenario");
  s.telemetry_ = j.at("telemetry").get<std::uint64_t>();
  s.suppressed_ = j.at("suppressed").get<std::uint64_t>();
  s.events_ = j.at("events").get<std::uint64_t>();
  s.events_by_type_ = j.at("events_by_type").get<std::map<std::string, std::uint64_t>>();
  s.sla_breaches_ = j.at("sla_breaches").get<std::uint64_t>();
  s.alert_types_ = j.at("alerts").get<std::map<std::string, std::string>>();
  for (const auto& [ref, inc] : j.at("incidents").items()) s.incidents_[ref] = inc;
  for (const auto& e : j.at("expectations")) {
    Expectation x;
    x.label = e.at("label").get<std::string>();
    x.target = e.at("target").get<std::string>();
    if (!e.at("event_type").is_null()) x.event_type = e.at("event_type").get<std::string>();
    x.start_ms = e.at("start_ms").get<std::int64_t>();
    if (!e.at("detected_ms").is_null()) x.detected_ms = e.at("detected_ms").get<std::int64_t>();
    s.expectations_.push_back(std::move(x));
  }
  for (const auto& a : j.at("actions")) {
    ActionOutcome o{a.at("receipt_id").get<std::string>(), a.at("action").get<std::string>(),
                    a.at("target").get<std::string>(),     a.at("incident_ref").get<std::string>(),
                    a.at("applied_ms").get<std::int64_t>(), a.at("records_after").get<std::uint64_t>()};
    s.last_action_[o.target] = s.actions_.size();
    s.actions_.push_back(std::move(o));
  }
  for (const auto& n : j.at("energy")) {
    s.energy_.push_back({n.at("id").get<std::string>(), n.at("battery_nj").get<std::int64_t>(),
                         n.at("status").get<std::string>()});
  }
  s.imports_ = j.at("imports");
  s.last_ts_ms_ = j.at("last_ts_ms").get<std::int64_t>();
  return s;
}

std::string state_digest(const cmdb::Cmdb& db, const events::AlertStore& alerts,
                         const incidents::IncidentDesk& desk, const RunStats& stats) {
  Sha256 h;
  h.update("{\"alerts\":");
  h.update(alerts.to_json().dump());
  h.update(",\"cmdb\":");
  h.update(db.to_json().dump());
  h.update(",\"incidents\":");
  h.update(desk.to_json().dump());
  h.update(",\"stats\":");
  h.update(stats.to_json().dump());
  h.update("}");
  return h.hex_digest();
}

void apply_action_to_cmdb(const Json& receipt, cmdb::Cmdb& db) {
  const Json& a = receipt.at("action");
  if (a.at("action").get<std::string>() != "add_exception") return;
  cmdb::ExceptionEntry e;
  e.source_id = a.at("target").get<std::string>();
  e.reason = a.value("reason", std::string{});
  const Json& exp = a.at("expires_ms");
  if (exp.is_number_integer()) e.expires_ms = exp.get<std::int64_t>();
  db.add_exception(std::move(e));
}

void ReplayState::apply(const JournalRecord& record) {
  const Json& b = record.body;
  if (record.kind == "import") {
    if (b.at("target").get<std::string>() == "cmdb_ci") {
      std::vector<ingest::TargetRecord> records;
      for (const auto& r : b.at("records")) records.push_back(ingest::target_record_from_json(r));
      ingest::reconcile(records, cmdb_);
    }
  } else if (record.kind == "alert") {
    alerts_.restore(events::alert_from_json(b));
  } else if (record.kind == "incident") {
    desk_.restore(incidents::incident_from_json(b));
  } else if (record.kind == "action") {
    desk_.note_receipt(b.at("receipt_id").get<std::string>());
    apply_action_to_cmdb(b, cmdb_);
  }
  stats_.apply(record);
  applied_seq_ = record.seq;
}

Json ReplayState::snapshot(const std::string& head_digest) const {
  return {{"seq", applied_seq_},
          {"head_digest", head_digest},
          {"state_digest", digest()},
          {"cmdb", cmdb_.to_json()},
          {"alerts", alerts_.to_json()},
          {"incidents", desk_.to_json()},
          {"stats", stats_.to_json()}};
}

ReplayState ReplayState::from_snapshot(const Json& j) {
  ReplayState s;
  s.applied_seq_ = j.at("seq").get<std::uint64_t>();
  s.cmdb_ = cmdb::Cmdb::from_json(j.at("cmdb"));
  s.alerts_ = events::AlertStore::from_json(j.at("alerts"));
  s.desk_ = incidents::IncidentDesk::from_json(j.at("incidents"), {}, incidents::SlaPolicy::defaults());
  s.stats_ = RunStats::from_json(j.at("stats"));
  if (s.digest() != j.at("state_digest").get<std::string>()) {
    throw Error(ErrorCode::InvalidArgument, "snapshot state does not match its digest");
  }
  return s;
}

ReplayResult replay_journal(const std::filesystem::path& path, const Json* snapshot) {
  ReplayResult out;
  if (snapshot) {
    std::optional<ReplayState> snap;
    try {
      snap = ReplayState::from_snapshot(*snapshot);
    } catch (const std::exception&) {
    }
    if (snap && snap->applied_seq() > 0) {
      const std::uint64_t snap_seq = snap->applied_seq();
      const std::string snap_head = snapshot->value("head_digest", std::string{});
      bool matched = false;
      out.scan = scan_journal(path, [&](const JournalRecord& rec) {
        if (rec.seq == snap_seq) {
          matched = rec.digest == snap_head;
          if (matched) out.state = std::move(*snap);
        } else if (rec.seq > snap_seq && matched) {
          out.state.apply(rec);
        }
      });
      if (matched || !out.scan.ok()) return out;
      out = ReplayResult{};  // stale snapshot: fall back to a full replay
    }
  }
  out.scan = scan_journal(path, [&](const JournalRecord& rec) { out.state.apply(rec); });
  return out;
}

}  // namespace sentinel::gateway
