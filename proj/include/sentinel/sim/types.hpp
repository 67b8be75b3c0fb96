#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sentinel/common/json.hpp"

namespace sentinel::sim {

enum class NodeStatus { Active, Quarantined, PoweredOff, Dead, Compromised };
enum class SensorKind { Temperature, Humidity, Generic };

std::string_view to_string(NodeStatus status);
std::string_view to_string(SensorKind kind);
std::optional<SensorKind> parse_sensor_kind(std::string_view text);
std::optional<NodeStatus> parse_node_status(std::string_view text);

struct Position {
  double x = 0.0;
  double y = 0.0;
};

double distance(Position a, Position b);

/// Energy quantity held as integer nanojoules. Bookkeeping is exact: every
/// charge is an integer, so battery deltas and ledgers compare with ==.
class Energy {
 public:
  constexpr Energy() = default;
  static constexpr Energy from_nanojoules(std::int64_t nj) { return Energy(nj); }
  static Energy from_joules(double joules);

  constexpr std::int64_t nanojoules() const { return nj_; }
  double joules() const { return static_cast<double>(nj_) / 1e9; }

  constexpr Energy operator+(Energy o) const { return Energy(nj_ + o.nj_); }
  constexpr Energy operator-(Energy o) const { return Energy(nj_ - o.nj_); }
  constexpr Energy& operator+=(Energy o) { nj_ += o.nj_; return *this; }
  constexpr Energy& operator-=(Energy o) { nj_ -= o.nj_; return *this; }
  constexpr auto operator<=>(const Energy&) const = default;

 private:
  constexpr explicit Energy(std::int64_t nj) : nj_(nj) {}
  std::int64_t nj_ = 0;
};

struct EnergyModel {
  double e_tx_j = 5e-5;
  double e_rx_j = 3e-5;
  double idle_w = 1e-6;
  double initial_battery_j = 100.0;

  /// Throws InvalidArgument if any parameter is negative or non-finite.
  void validate() const;

  Energy tx_cost() const { return Energy::from_joules(e_tx_j); }
  Energy rx_cost() const { return Energy::from_joules(e_rx_j); }
  /// Idle draw over dt_ms, optionally scaled (drain attack).
  Energy idle_cost(std::int64_t dt_ms, double multiplier = 1.0) const;
};

struct NodeState {
  std::string id;
  Position position;
  Energy battery;
  NodeStatus status = NodeStatus::Active;
  std::optional<std::string> parent;
  double emit_period_s = 10.0;
  SensorKind sensor_kind = SensorKind::Temperature;
};

enum class AttackKind { Flood, Jam, Tamper, RogueJoin, Drain };

std::string_view to_string(AttackKind kind);
std::optional<AttackKind> parse_attack_kind(std::string_view text);

struct Region {
  Position center;
  double radius_m = 0.0;
};

struct AttackSpec {
  AttackKind kind = AttackKind::Flood;
  std::string target;            // node id; empty when region is used
  std::optional<Region> region;  // jam only
  std::int64_t start_ms = 0;
  std::int64_t duration_ms = 0;

  double multiplier = 1.0;       // flood, > 1
  double drop_prob = 0.0;        // jam, [0, 1]
  double offset = 0.0;           // tamper, sensor units
  double idle_multiplier = 1.0;  // drain
  std::string source_id;         // rogue_join
  std::optional<Position> position;  // rogue_join placement
  double rogue_period_s = 10.0;

  std::int64_t end_ms() const { return start_ms + duration_ms; }
  /// Throws InvalidArgument describing the first violated constraint.
  void validate() const;
};

Json to_json(const AttackSpec& spec);

/// Piggybacked energy report: motes send their battery level and radio
/// counters along with each reading.
struct BatteryReport {
  std::int64_t battery_nj = 0;
  std::uint64_t tx_count = 0;
  std::uint64_t rx_count = 0;
};

struct TelemetryRecord {
  std::uint64_t seq = 0;
  std::string source_id;
  std::int64_t emitted_ms = 0;
  std::int64_t sink_arrival_ms = 0;
  SensorKind sensor_kind = SensorKind::Temperature;
  double value = 0.0;
  bool checksum_ok = true;
  int hop_count = 0;
  BatteryReport energy;
};

Json to_json(const TelemetryRecord& record);
TelemetryRecord telemetry_from_json(const Json& body);

/// Observable simulator change other than a delivered reading.
struct StateDelta {
  std::int64_t t_ms = 0;
  std::string node_id;
  std::string kind;  // status_changed, routing_recomputed, attack_started, ...
  Json detail = Json::object();
};

Json to_json(const StateDelta& delta);

struct Batch {
  std::vector<TelemetryRecord> telemetry;
  std::vector<StateDelta> deltas;

  bool empty() const { return telemetry.empty() && deltas.empty(); }
};

}  // namespace sentinel::sim
