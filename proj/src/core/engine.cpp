#include "sentinel/core/engine.hpp"

#include <algorithm>

#include "sentinel/common/error.hpp"

namespace sentinel::core {

namespace {

std::optional<std::string> expected_event(sim::AttackKind kind) {
  switch (kind) {
    case sim::AttackKind::Flood: return "dos_flood";
    case sim::AttackKind::RogueJoin: return "unauthorized_access";
    case sim::AttackKind::Tamper: return "data_integrity";
    case sim::AttackKind::Drain: return "energy_drain";
    case sim::AttackKind::Jam: return std::nullopt;  // loss shows up as silence, not as an event
  }
  return std::nullopt;
}

}  // namespace

Engine::Engine(EngineConfig config, gateway::Journal& journal)
    : config_(std::move(config)),
      journal_(journal),
      sim_(config_.sim, config_.nodes, config_.sink_id),
      desk_(config_.rules, config_.sla) {
  config_.detectors.validate();
  if (config_.duration_ms < 0) throw Error(ErrorCode::InvalidArgument, "duration must not be negative");
  for (auto& [table, map] : config_.transform_maps) {
    if (map.source_table != table) throw Error(ErrorCode::InvalidArgument, "transform map keyed under wrong table");
    map.validate();
  }
  for (const auto& r : config_.responses) {
    if (r.at_ms.has_value() == r.after_event.has_value()) {
      throw Error(ErrorCode::InvalidArgument, "response for " + r.target + " needs exactly one of at / after_event");
    }
    if (r.at_ms && r.incident_ref.empty()) {
      throw Error(ErrorCode::InvalidArgument, "timed response for " + r.target + " needs an incident reference");
    }
  }
  armed_.assign(config_.responses.size(), false);
  burst_done_.assign(config_.bursts.size(), false);
  next_window_ms_ = config_.detectors.flood.window_ms;
  journal_.set_observer([this](std::uint64_t, std::int64_t ts, std::string_view kind, const Json& body) {
    stats_.apply(kind, ts, body);
  });
}

void Engine::start() {
  if (started_) return;
  started_ = true;

  Json expectations = Json::array();
  for (const auto& a : config_.attacks) {
    const auto type = expected_event(a.kind);
    expectations.push_back({{"label", sim::to_string(a.kind)},
                            {"target", a.kind == sim::AttackKind::RogueJoin ? a.source_id : a.target},
                            {"event_type", type ? Json(*type) : Json(nullptr)},
                            {"start_ms", a.start_ms}});
  }
  for (const auto& r : config_.ramps) {
    expectations.push_back(
        {{"label", "overheat_ramp"}, {"target", r.target}, {"event_type", "overheat"}, {"start_ms", r.start_ms}});
  }
  journal_.append("sim_delta", 0,
                  sim::to_json(sim::StateDelta{0, "", "scenario_started",
                                               {{"name", config_.name},
                                                {"seed", config_.seed},
                                                {"duration_ms", config_.duration_ms},
                                                {"nodes", config_.nodes.size()},
                                                {"expectations", std::move(expectations)}}}));

  if (config_.assets) import_batch(config_.assets->table, config_.assets->rows);
  for (const auto& a : config_.attacks) sim_.inject_attack(a);
  for (const auto& r : config_.ramps) sim_.add_ramp(r);
  for (std::size_t i = 0; i < config_.responses.size(); ++i) {
    const auto& r = config_.responses[i];
    if (r.at_ms) {
      pending_.push_back({*r.at_ms, i, {}});
      armed_[i] = true;
    }
  }
  fire_due(clock_ms_);
}

void Engine::resume(const gateway::ReplayState& state) {
  if (started_) throw Error(ErrorCode::InvalidArgument, "resume must come before the engine starts");
  cmdb_ = state.cmdb();
  alerts_ = state.alerts();
  desk_ = incidents::IncidentDesk::from_json(state.desk().to_json(), config_.rules, config_.sla);
  stats_ = state.stats();
  next_event_id_ = stats_.events() + 1;
  const std::int64_t t = stats_.last_ts_ms();

  // Rebuild the network: same attacks, then the journaled actions at the
  // times they were applied. Readings produced on the way are already in
  // the journal and are dropped.
  for (const auto& a : config_.attacks) sim_.inject_attack(a);
  for (const auto& r : config_.ramps) sim_.add_ramp(r);
  for (const auto& a : stats_.actions()) {
    if (a.action == "add_exception" || a.applied_ms > t) continue;
    (void)sim_.advance(a.applied_ms);
    try {
      ResponseAction act;
      act.action = *parse_action_kind(a.action);
      act.target = a.target;
      sim_.apply_action(act);
    } catch (const Error&) {
      // The target may have been gone already; the journal holds the receipt either way.
    }
  }
  (void)sim_.advance(t);
  clock_ms_ = t;

  for (std::size_t i = 0; i < config_.responses.size(); ++i) {
    const auto& r = config_.responses[i];
    const bool done = std::any_of(stats_.actions().begin(), stats_.actions().end(), [&](const auto& a) {
      return a.action == to_string(r.action) && a.target == r.target;
    });
    if (done) {
      armed_[i] = true;
    } else if (r.at_ms && *r.at_ms > t) {
      pending_.push_back({*r.at_ms, i, {}});
      armed_[i] = true;
    }
  }
  for (std::size_t i = 0; i < config_.bursts.size(); ++i) burst_done_[i] = config_.bursts[i].at_ms <= t;
  const std::int64_t w = config_.detectors.flood.window_ms;
  next_window_ms_ = (t / w + 1) * w;
  started_ = true;
}

void Engine::run() {
  start();
  advance_to(config_.duration_ms);
  finish();
}

void Engine::advance_to(std::int64_t until_ms) {
  if (until_ms < clock_ms_) {
    throw Error(ErrorCode::InvalidArgument,
                "cannot advance to " + std::to_string(until_ms) + " ms; clock is at " + std::to_string(clock_ms_));
  }
  start();
  while (clock_ms_ < until_ms) {
    std::int64_t next = std::min(until_ms, next_window_ms_);
    for (const auto& p : pending_) {
      if (p.at_ms > clock_ms_) next = std::min(next, p.at_ms);
    }
    for (std::size_t i = 0; i < config_.bursts.size(); ++i) {
      if (!burst_done_[i] && config_.bursts[i].at_ms > clock_ms_) next = std::min(next, config_.bursts[i].at_ms);
    }
    step_to(next);
  }
}

void Engine::step_to(std::int64_t t_ms) {
  process(sim_.advance(t_ms));
  clock_ms_ = t_ms;
  if (t_ms == next_window_ms_) {
    close_window(t_ms);
    next_window_ms_ += config_.detectors.flood.window_ms;
  }
  fire_due(t_ms);
}

void Engine::finish() {
  if (finished_) return;
  start();
  process(sim_.advance(clock_ms_));
  Json nodes = Json::array();
  for (const auto& n : sim_.nodes()) {
    if (n.id == sim_.sink_id()) continue;  // mains powered
    nodes.push_back({{"id", n.id}, {"battery_nj", n.battery.nanojoules()}, {"status", sim::to_string(n.status)}});
  }
  journal_.append("sim_delta", clock_ms_,
                  sim::to_json(sim::StateDelta{clock_ms_, "", "energy_snapshot", {{"nodes", std::move(nodes)}}}));
  finished_ = true;
}

void Engine::process(sim::Batch batch) {
  // Deltas and readings interleave by time; at equal times the state change
  // is applied first.
  std::size_t d = 0, t = 0;
  while (d < batch.deltas.size() || t < batch.telemetry.size()) {
    const bool take_delta = t == batch.telemetry.size() ||
                            (d < batch.deltas.size() && batch.deltas[d].t_ms <= batch.telemetry[t].sink_arrival_ms);
    if (take_delta) {
      on_delta(batch.deltas[d++]);
    } else {
      ingest_record(batch.telemetry[t++], false);
    }
  }
}

void Engine::on_delta(const sim::StateDelta& delta) {
  journal_.append("sim_delta", delta.t_ms, sim::to_json(delta));
  if (delta.kind == "status_changed" && delta.detail.value("to", std::string{}) == "Dead") {
    raise({events::EventType::HardwareFailure, delta.node_id, "battery", delta.t_ms,
           {{"reason", "battery_depleted"}, {"from", delta.detail.value("from", std::string{})}}});
  }
}

double Engine::overheat_threshold(const std::string& source) const {
  if (const auto* ci = cmdb_.find_by_node(source)) {
    const auto it = ci->attributes.find("overheat_c");
    if (it != ci->attributes.end()) {
      if (const auto* v = std::get_if<double>(&it->second)) return *v;
    }
  }
  return config_.detectors.overheat_c;
}

void Engine::ingest_record(const sim::TelemetryRecord& record, bool external) {
  const std::int64_t now = record.sink_arrival_ms;
  const std::string& src = record.source_id;

  if (!rates_.count(src)) {
    events::RateState rs;
    rs.alpha = config_.detectors.flood.alpha;
    rs.window_ms = config_.detectors.flood.window_ms;
    rates_.emplace(src, rs);
  }
  ++window_counts_[src];

  const events::SourceVerdict verdict = events::detect_source(record, cmdb_, now);
  auto bounds = events::detect_bounds(record, config_.detectors.bounds, overheat_threshold(src));
  std::optional<events::EventDraft> drain;
  if (!external) {
    auto& state = drains_[src];
    auto step = events::detect_drain(state,
                                     {record.emitted_ms, record.energy.battery_nj, record.energy.tx_count,
                                      record.energy.rx_count},
                                     config_.detectors.drain, src);
    state = step.state;
    drain = std::move(step.event);
  }

  Json body = sim::to_json(record);
  if (verdict.suppressed) body["suppressed"] = true;
  if (external) body["external"] = true;
  journal_.append("telemetry", now, body);

  if (verdict.event) raise(*verdict.event);
  if (bounds) raise(std::move(*bounds));
  if (drain) raise(std::move(*drain));
}

void Engine::close_window(std::int64_t t_ms) {
  for (auto& [src, state] : rates_) {
    const auto it = window_counts_.find(src);
    const std::uint64_t count = it == window_counts_.end() ? 0 : it->second;
    auto step = events::detect_flood(state, count, config_.detectors.flood, src, t_ms);
    state = step.state;
    if (step.event) raise(std::move(*step.event));
  }
  window_counts_.clear();

  for (const auto& [ref, inc] : desk_.incidents()) {
    (void)inc;
    auto drafts = desk_.sla_evaluate(ref, t_ms);
    if (drafts.empty()) continue;
    journal_incident(*desk_.find(ref), t_ms);
    for (auto& d : drafts) raise(std::move(d));
  }
}

void Engine::journal_incident(const incidents::Incident& inc, std::int64_t ts_ms) {
  journal_.append("incident", ts_ms, incidents::to_json(inc));
}

void Engine::raise(events::EventDraft draft) {
  std::optional<std::string> ci;
  if (const auto* item = cmdb_.find_by_node(draft.source_id)) ci = item->ci_id;
  const std::int64_t ts = draft.created_ms;
  events::Event ev = events::finalize(std::move(draft), next_event_id_++, ci);
  journal_.append("event", ts, events::to_json(ev));

  const auto delta = alerts_.correlate(ev, config_.detectors.dedup_window_ms);
  const events::Alert& alert = *alerts_.find(delta.alert_id);
  journal_.append("alert", ts, events::to_json(alert));

  const auto opened = desk_.open_incident(alert, ts);
  if (opened.created) journal_incident(*opened.incident, ts);

  for (std::size_t i = 0; i < config_.responses.size(); ++i) {
    const auto& r = config_.responses[i];
    if (armed_[i] || !r.after_event) continue;
    if (r.after_event->type != ev.type || r.after_event->source_id != ev.source_id) continue;
    armed_[i] = true;
    pending_.push_back({ts + r.after_event->delay_ms, i, alert.alert_id});
  }

  recent_.push_back(std::move(ev));
  while (recent_.size() > config_.recent_events) recent_.pop_front();
}

void Engine::fire_due(std::int64_t t_ms) {
  for (std::size_t i = 0; i < config_.bursts.size(); ++i) {
    if (burst_done_[i] || config_.bursts[i].at_ms > t_ms) continue;
    burst_done_[i] = true;
    const auto& b = config_.bursts[i];
    for (std::uint64_t k = 0; k < b.count; ++k) {
      raise({b.type, b.source_id, b.resource, t_ms, {{"burst", i}, {"index", k}}});
    }
  }
  // Responses fire in (time, script order); firing may arm new ones.
  for (;;) {
    auto due = pending_.end();
    for (auto it = pending_.begin(); it != pending_.end(); ++it) {
      if (it->at_ms > t_ms) continue;
      if (due == pending_.end() || it->at_ms < due->at_ms ||
          (it->at_ms == due->at_ms && it->response < due->response)) {
        due = it;
      }
    }
    if (due == pending_.end()) break;
    const Pending p = *due;
    pending_.erase(due);
    fire_response(p);
  }
}

void Engine::fire_response(const Pending& p) {
  const ScriptedResponse& r = config_.responses[p.response];
  std::string ref = r.incident_ref;
  if (ref.empty()) {
    const auto* inc = desk_.find_by_alert(p.alert_id);
    if (!inc) return;  // the triggering alert never qualified for an incident
    ref = inc->reference;
  }
  const auto* inc = desk_.find(ref);
  if (!inc || inc->state == incidents::IncidentState::Closed) return;

  if (inc->state != incidents::IncidentState::InProgress) {
    journal_incident(desk_.transition(ref, incidents::IncidentState::InProgress, r.requested_by,
                                      "picked up by scripted response", clock_ms_),
                     clock_ms_);
  }
  ResponseAction action;
  action.action = r.action;
  action.target = r.target;
  action.incident_ref = ref;
  action.requested_by = r.requested_by;
  action.requested_ms = clock_ms_;
  action.expires_ms = r.expires_ms;
  action.reason = r.reason;
  try {
    execute(action);
  } catch (const Error& e) {
    journal_incident(desk_.add_note(ref, r.requested_by,
                                    "response rejected: " + std::string(to_string(e.code())) + ": " + e.what(),
                                    clock_ms_),
                     clock_ms_);
    return;
  }
  if (r.resolve) {
    journal_incident(desk_.transition(ref, incidents::IncidentState::Resolved, r.requested_by,
                                      "remediated by scripted response", clock_ms_),
                     clock_ms_);
  }
}

Json Engine::dispatch(const ResponseAction& action) {
  if (action.action == ActionKind::AddException) {
    if (action.target.empty()) throw Error(ErrorCode::InvalidAction, "add_exception needs a source id");
    cmdb::ExceptionEntry e{action.target, action.reason, action.expires_ms};
    cmdb_.add_exception(e);
    return {{"exception", cmdb::to_json(e)}};
  }
  return sim::to_json(sim_.apply_action(action));
}

incidents::DispatchReceipt Engine::execute(ResponseAction action) {
  start();
  action.requested_ms = clock_ms_;
  const auto receipt = desk_.execute_response(action, *this, clock_ms_);
  journal_.append("action", clock_ms_, incidents::to_json(receipt));
  journal_incident(*desk_.find(action.incident_ref), clock_ms_);
  return receipt;
}

const incidents::Incident& Engine::update_incident(const std::string& reference,
                                                   std::optional<incidents::IncidentState> to,
                                                   const std::string& actor, const std::string& note) {
  start();
  const incidents::Incident* inc = nullptr;
  if (to) {
    inc = &desk_.transition(reference, *to, actor, note, clock_ms_);
    if (*to == incidents::IncidentState::Closed) {
      const auto* alert = alerts_.find(inc->alert_id);
      if (alert && alert->state == events::AlertState::Open) {
        alerts_.close(inc->alert_id);
        journal_.append("alert", clock_ms_, events::to_json(*alerts_.find(inc->alert_id)));
      }
    }
  } else {
    if (note.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to update: give a state or a note");
    inc = &desk_.add_note(reference, actor, note, clock_ms_);
  }
  journal_incident(*inc, clock_ms_);
  return *inc;
}

ingest::ImportResult Engine::import_rows(const std::string& table, std::vector<FieldMap> rows) {
  const auto it = config_.transform_maps.find(table);
  if (it == config_.transform_maps.end()) throw Error(ErrorCode::NotFound, "no transform map for table " + table);
  if (rows.size() > config_.max_import_rows) {
    throw Error(ErrorCode::OutOfRange, "batch of " + std::to_string(rows.size()) + " rows exceeds the limit of " +
                                           std::to_string(config_.max_import_rows));
  }
  return import_batch(table, std::move(rows));
}

// The scenario's own asset load is not an external batch, so no size limit.
ingest::ImportResult Engine::import_batch(const std::string& table, std::vector<FieldMap> rows) {
  const auto it = config_.transform_maps.find(table);
  if (it == config_.transform_maps.end()) throw Error(ErrorCode::NotFound, "no transform map for table " + table);
  const auto staged = staging_.stage(table, std::move(rows), clock_ms_);
  auto outcome = ingest::run_import(it->second, staged, cmdb_);
  const bool to_cmdb = it->second.target == ingest::TargetKind::CmdbCi;

  Json records = Json::array();
  if (to_cmdb) {
    for (const auto& r : outcome.accepted) records.push_back(ingest::to_json(r));
  }
  journal_.append("import", clock_ms_,
                  {{"table", table},
                   {"target", to_cmdb ? "cmdb_ci" : "telemetry"},
                   {"records", std::move(records)},
                   {"result", ingest::to_json(outcome.result)}});
  if (!to_cmdb) {
    for (const auto& r : outcome.accepted) ingest_record(ingest::to_telemetry(r, clock_ms_), true);
  }
  return outcome.result;
}

std::string Engine::state_digest() const { return gateway::state_digest(cmdb_, alerts_, desk_, stats_); }

Json Engine::sim_status() const {
  Json nodes = Json::array();
  for (const auto& n : sim_.nodes()) {
    nodes.push_back({{"id", n.id},
                     {"status", sim::to_string(n.status)},
                     {"battery_nj", n.battery.nanojoules()},
                     {"parent", n.parent ? Json(*n.parent) : Json(nullptr)},
                     {"x", n.position.x},
                     {"y", n.position.y}});
  }
  Json pending = Json::array();
  for (const auto& p : pending_) {
    pending.push_back({{"at_ms", p.at_ms}, {"action", to_string(config_.responses[p.response].action)},
                       {"target", config_.responses[p.response].target}});
  }
  return {{"scenario", config_.name},
          {"clock_ms", clock_ms_},
          {"duration_ms", config_.duration_ms},
          {"finished", finished_},
          {"journal_seq", journal_.last_seq()},
          {"sink", sim_.sink_id()},
          {"nodes", std::move(nodes)},
          {"pending_responses", std::move(pending)},
          {"next_window_ms", next_window_ms_},
          {"telemetry", stats_.telemetry()},
          {"events", stats_.events()}};
}

}  // namespace sentinel::core
