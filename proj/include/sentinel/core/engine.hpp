#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sentinel/cmdb/cmdb.hpp"
#include "sentinel/events/alert_store.hpp"
#include "sentinel/events/detectors.hpp"
#include "sentinel/gateway/journal.hpp"
#include "sentinel/gateway/state.hpp"
#include "sentinel/incidents/incident_desk.hpp"
#include "sentinel/ingest/import_set.hpp"
#include "sentinel/sim/simulation.hpp"

namespace sentinel::core {

struct ResponseTrigger {
  events::EventType type = events::EventType::DosFlood;
  std::string source_id;
  std::int64_t delay_ms = 0;
};

/// A remediation step from the scenario's response script. Fires either at
/// a fixed time (against an explicit incident) or a delay after the first
/// matching event (against that event's incident).
struct ScriptedResponse {
  ActionKind action = ActionKind::Quarantine;
  std::string target;
  std::optional<std::int64_t> at_ms;
  std::optional<ResponseTrigger> after_event;
  std::string incident_ref;
  std::optional<std::int64_t> expires_ms;  // add_exception; nullopt = never
  std::string reason;
  std::string requested_by = "responder";
  bool resolve = false;  // move the incident to resolved once applied
};

/// Synthetic events fed straight into correlation (external monitoring feed).
struct EventBurst {
  std::int64_t at_ms = 0;
  std::uint64_t count = 0;
  events::EventType type = events::EventType::DataIntegrity;
  std::string source_id;
  std::string resource;
};

struct AssetImport {
  std::string table;
  std::vector<FieldMap> rows;
};

struct EngineConfig {
  std::string name = "unnamed";
  std::uint64_t seed = 1;
  std::int64_t duration_ms = 0;
  sim::SimConfig sim;
  std::vector<sim::NodeSpec> nodes;
  std::string sink_id = "sink";
  events::DetectorConfig detectors;
  std::map<std::string, ingest::TransformMap> transform_maps;  // keyed by staging table
  std::optional<AssetImport> assets;
  std::vector<sim::AttackSpec> attacks;
  std::vector<sim::RampSpec> ramps;
  std::vector<EventBurst> bursts;
  incidents::IncidentRules rules;
  incidents::SlaPolicy sla = incidents::SlaPolicy::defaults();
  std::vector<ScriptedResponse> responses;
  std::size_t max_import_rows = 10'000;
  std::size_t recent_events = 10'000;  // kept in memory for queries
};

/// The single-writer core: simulation, ingest, CMDB, detection, correlation
/// and incident flow, with every state change journaled before it is
/// visible. Not thread safe; the gateway serializes access.
class Engine : private incidents::ActionDispatcher {
 public:
  Engine(EngineConfig config, gateway::Journal& journal);
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  /// Journals the scenario header, imports assets and arms attacks. Idempotent.
  void start();
  /// Drives the pipeline until the clock reaches until_ms. Throws
  /// InvalidArgument for a time in the past.
  void advance_to(std::int64_t until_ms);
  /// Journals the final energy snapshot.
  void finish();
  /// start + advance_to(duration) + finish.
  void run();
  /// Continues a previous session: ITSM state comes from the replayed
  /// journal, the network from this engine's own configuration.
  void resume(const gateway::ReplayState& state);

  // Commands. Each either applies completely or throws without effect.
  /// Throws NotFound for a table without a transform map and OutOfRange
  /// for an oversized batch.
  ingest::ImportResult import_rows(const std::string& table, std::vector<FieldMap> rows);
  const incidents::Incident& update_incident(const std::string& reference,
                                             std::optional<incidents::IncidentState> to,
                                             const std::string& actor, const std::string& note);
  incidents::DispatchReceipt execute(ResponseAction action);

  std::int64_t clock_ms() const { return clock_ms_; }
  bool finished() const { return finished_; }
  const EngineConfig& config() const { return config_; }
  const sim::Simulation& simulation() const { return sim_; }
  const cmdb::Cmdb& cmdb() const { return cmdb_; }
  const events::AlertStore& alerts() const { return alerts_; }
  const incidents::IncidentDesk& desk() const { return desk_; }
  const gateway::RunStats& stats() const { return stats_; }
  const std::deque<events::Event>& recent_events() const { return recent_; }
  bool has_table(const std::string& table) const { return config_.transform_maps.count(table) != 0; }
  std::string state_digest() const;
  Json sim_status() const;

 private:
  struct Pending {
    std::int64_t at_ms = 0;
    std::size_t response = 0;  // index into config_.responses
    std::string alert_id;      // event-triggered responses
  };

  Json dispatch(const ResponseAction& action) override;
  ingest::ImportResult import_batch(const std::string& table, std::vector<FieldMap> rows);

  void step_to(std::int64_t t_ms);
  void process(sim::Batch batch);
  void on_delta(const sim::StateDelta& delta);
  void ingest_record(const sim::TelemetryRecord& record, bool external);
  void close_window(std::int64_t t_ms);
  void raise(events::EventDraft draft);
  void fire_due(std::int64_t t_ms);
  void fire_response(const Pending& p);
  double overheat_threshold(const std::string& source) const;
  void journal_incident(const incidents::Incident& inc, std::int64_t ts_ms);

  EngineConfig config_;
  gateway::Journal& journal_;
  sim::Simulation sim_;
  ingest::StagingArea staging_;
  cmdb::Cmdb cmdb_;
  events::AlertStore alerts_;
  incidents::IncidentDesk desk_;
  gateway::RunStats stats_;

  std::map<std::string, events::RateState> rates_;
  std::map<std::string, std::uint64_t> window_counts_;
  std::map<std::string, events::DrainState> drains_;
  std::deque<events::Event> recent_;
  std::vector<Pending> pending_;
  std::vector<bool> armed_;      // per scripted response
  std::vector<bool> burst_done_;
  std::uint64_t next_event_id_ = 1;
  std::int64_t clock_ms_ = 0;
  std::int64_t next_window_ms_ = 0;
  bool started_ = false;
  bool finished_ = false;
};

}  // namespace sentinel::core
