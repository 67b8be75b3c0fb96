#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sentinel/cmdb/cmdb.hpp"
#include "sentinel/common/json.hpp"
#include "sentinel/events/alert_store.hpp"
#include "sentinel/gateway/journal.hpp"
#include "sentinel/incidents/incident_desk.hpp"

namespace sentinel::gateway {

/// Something the run should detect: an injected attack or a fault.
struct Expectation {
  std::string label;        // "flood", "overheat_ramp", ...
  std::string target;       // node id the matching event must name
  std::optional<std::string> event_type;  // nullopt: no detector covers it
  std::int64_t start_ms = 0;
  std::optional<std::int64_t> detected_ms;
};

struct ActionOutcome {
  std::string receipt_id;
  std::string action;
  std::string target;
  std::string incident_ref;
  std::int64_t applied_ms = 0;
  std::uint64_t records_after = 0;  // telemetry from target arriving after the action
};

struct NodeEnergy {
  std::string id;
  std::int64_t battery_nj = 0;
  std::string status;
};

/// Run statistics folded from journal records alone. The live engine and a
/// replay feed it the same records, so it doubles as the report source.
class RunStats {
 public:
  void apply(const JournalRecord& record) { apply(record.kind, record.ts_ms, record.body); }
  void apply(std::string_view kind, std::int64_t ts_ms, const Json& body);

  const Json& scenario() const { return scenario_; }
  std::uint64_t telemetry() const { return telemetry_; }
  std::uint64_t suppressed() const { return suppressed_; }
  std::uint64_t events() const { return events_; }
  const std::map<std::string, std::uint64_t>& events_by_type() const { return events_by_type_; }
  const std::map<std::string, std::string>& alerts() const { return alert_types_; }
  const std::map<std::string, Json>& incidents() const { return incidents_; }
  const std::vector<Expectation>& expectations() const { return expectations_; }
  const std::vector<ActionOutcome>& actions() const { return actions_; }
  const std::vector<NodeEnergy>& energy() const { return energy_; }
  std::uint64_t sla_breaches() const { return sla_breaches_; }
  const Json& imports() const { return imports_; }
  std::int64_t last_ts_ms() const { return last_ts_ms_; }

  Json to_json() const;
  static RunStats from_json(const Json& j);

 private:
  Json scenario_ = Json::object();
  std::uint64_t telemetry_ = 0;
  std::uint64_t suppressed_ = 0;
  std::uint64_t events_ = 0;
  std::uint64_t sla_breaches_ = 0;
  std::map<std::string, std::uint64_t> events_by_type_;
  std::map<std::string, std::string> alert_types_;  // alert id -> type
  std::map<std::string, Json> incidents_;           // reference -> summary
  std::vector<Expectation> expectations_;
  std::vector<ActionOutcome> actions_;
  std::map<std::string, std::size_t> last_action_;  // target -> index into actions_
  std::vector<NodeEnergy> energy_;
  Json imports_ = {{"batches", 0}, {"inserted", 0}, {"updated", 0}, {"skipped", 0}, {"errored", 0}};
  std::int64_t last_ts_ms_ = 0;
};

/// sha256 over the canonical form of every stateful store.
std::string state_digest(const cmdb::Cmdb& db, const events::AlertStore& alerts,
                         const incidents::IncidentDesk& desk, const RunStats& stats);

/// State rebuilt purely from journal records.
class ReplayState {
 public:
  void apply(const JournalRecord& record);
  std::string digest() const { return state_digest(cmdb_, alerts_, desk_, stats_); }

  const cmdb::Cmdb& cmdb() const { return cmdb_; }
  const events::AlertStore& alerts() const { return alerts_; }
  const incidents::IncidentDesk& desk() const { return desk_; }
  const RunStats& stats() const { return stats_; }
  std::uint64_t applied_seq() const { return applied_seq_; }

  /// Snapshot for fast restart: state plus the journal position it reflects.
  Json snapshot(const std::string& head_digest) const;
  static ReplayState from_snapshot(const Json& j);

 private:
  std::uint64_t applied_seq_ = 0;
  cmdb::Cmdb cmdb_;
  events::AlertStore alerts_;
  incidents::IncidentDesk desk_;
  RunStats stats_;
};

struct ReplayResult {
  ScanResult scan;
  ReplayState state;
};

/// Full replay from genesis. With a snapshot, the chain is still verified
/// end to end but only records after the snapshot are applied; a snapshot
/// that does not match the journal is ignored.
ReplayResult replay_journal(const std::filesystem::path& path, const Json* snapshot = nullptr);

/// Shared by the engine and replay: the CMDB effect of an action record.
void apply_action_to_cmdb(const Json& receipt, cmdb::Cmdb& db);

}  // namespace sentinel::gateway
