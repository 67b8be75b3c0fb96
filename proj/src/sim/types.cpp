#include "sentinel/sim/types.hpp"

#include <cmath>

#include "sentinel/common/action.hpp"
#include "sentinel/common/error.hpp"

namespace sentinel {

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Quarantine: return "quarantine";
    case ActionKind::PowerOff: return "power_off";
    case ActionKind::Patch: return "patch";
    case ActionKind::AddException: return "add_exception";
  }
  return "unknown";
}

std::optional<ActionKind> parse_action_kind(std::string_view text) {
  if (text == "quarantine") return ActionKind::Quarantine;
  if (text == "power_off") return ActionKind::PowerOff;
  if (text == "patch") return ActionKind::Patch;
  if (text == "add_exception") return ActionKind::AddException;
  return std::nullopt;
}

}  // namespace sentinel

namespace sentinel::sim {

std::string_view to_string(NodeStatus status) {
  switch (status) {
    case NodeStatus::Active: return "Active";
    case NodeStatus::Quarantined: return "Quarantined";
    case NodeStatus::PoweredOff: return "PoweredOff";
    case NodeStatus::Dead: return "Dead";
    case NodeStatus::Compromised: return "Compromised";
  }
  return "Unknown";
}

std::optional<NodeStatus> parse_node_status(std::string_view text) {
  for (auto s : {NodeStatus::Active, NodeStatus::Quarantined, NodeStatus::PoweredOff,
                 NodeStatus::Dead, NodeStatus::Compromised}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::string_view to_string(SensorKind kind) {
  switch (kind) {
    case SensorKind::Temperature: return "temperature";
    case SensorKind::Humidity: return "humidity";
    case SensorKind::Generic: return "generic";
  }
  return "generic";
}

std::optional<SensorKind> parse_sensor_kind(std::string_view text) {
  if (text == "temperature") return SensorKind::Temperature;
  if (text == "humidity") return SensorKind::Humidity;
  if (text == "generic") return SensorKind::Generic;
  return std::nullopt;
}

double distance(Position a, Position b) { return std::hypot(a.x - b.x, a.y - b.y); }

Energy Energy::from_joules(double joules) {
  return Energy(static_cast<std::int64_t>(std::llround(joules * 1e9)));
}

void EnergyModel::validate() const {
  for (double v : {e_tx_j, e_rx_j, idle_w, initial_battery_j}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "energy model parameters must be finite and >= 0");
    }
  }
}

Energy EnergyModel::idle_cost(std::int64_t dt_ms, double multiplier) const {
  // W * ms = mJ; 1 mJ = 1e6 nJ.
  return Energy::from_nanojoules(
      std::llround(idle_w * multiplier * static_cast<double>(dt_ms) * 1e6));
}

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::Flood: return "flood";
    case AttackKind::Jam: return "jam";
    case AttackKind::Tamper: return "tamper";
    case AttackKind::RogueJoin: return "rogue_join";
    case AttackKind::Drain: return "drain";
  }
  return "unknown";
}

std::optional<AttackKind> parse_attack_kind(std::string_view text) {
  if (text == "flood") return AttackKind::Flood;
  if (text == "jam") return AttackKind::Jam;
  if (text == "tamper") return AttackKind::Tamper;
  if (text == "rogue_join") return AttackKind::RogueJoin;
  if (text == "drain") return AttackKind::Drain;
  return std::nullopt;
}

void AttackSpec::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidArgument, why); };
  if (start_ms < 0) fail("attack start_s must be >= 0");
  if (duration_ms <= 0) fail("attack duration_s must be > 0");
  switch (kind) {
    case AttackKind::Flood:
      if (!(multiplier > 1.0)) fail("flood.multiplier must be > 1");
      if (target.empty()) fail("flood needs a target node");
      break;
    case AttackKind::Jam:
      if (!(drop_prob >= 0.0 && drop_prob <= 1.0)) fail("jam.drop_prob must lie in [0, 1]");
      if (target.empty() && !region) fail("jam needs a target node or region");
      if (region && !(region->radius_m >= 0.0)) fail("jam.region.radius_m must be >= 0");
      break;
    case AttackKind::Tamper:
      if (!std::isfinite(offset)) fail("tamper.offset must be finite");
      if (target.empty()) fail("tamper needs a target node");
      break;
    case AttackKind::RogueJoin:
      if (source_id.empty()) fail("rogue_join.source_id is required");
      if (!(rogue_period_s > 0.0)) fail("rogue_join.period_s must be > 0");
      break;
    case AttackKind::Drain:
      if (!(idle_multiplier >= 0.0) || !std::isfinite(idle_multiplier)) {
        fail("drain.idle_multiplier must be finite and >= 0");
      }
      if (target.empty()) fail("drain needs a target node");
      break;
  }
}

Json to_json(const AttackSpec& spec) {
  Json j = {{"kind", to_string(spec.kind)},
            {"start_ms", spec.start_ms},
            {"duration_ms", spec.duration_ms}};
  if (!spec.target.empty()) j["target"] = spec.target;
  switch (spec.kind) {
    case AttackKind::Flood: j["multiplier"] = spec.multiplier; break;
    case AttackKind::Jam:
      j["drop_prob"] = spec.drop_prob;
      if (spec.region) {
        j["region"] = {{"x", spec.region->center.x},
                       {"y", spec.region->center.y},
                       {"radius_m", spec.region->radius_m}};
      }
      break;
    case AttackKind::Tamper: j["offset"] = spec.offset; break;
    case AttackKind::RogueJoin:
      j["source_id"] = spec.source_id;
      j["period_s"] = spec.rogue_period_s;
      break;
    case AttackKind::Drain: j["idle_multiplier"] = spec.idle_multiplier; break;
  }
  return j;
}

Json to_json(const TelemetryRecord& r) {
  return {{"seq", r.seq},
          {"source_id", r.source_id},
          {"emitted_ms", r.emitted_ms},
          {"sink_arrival_ms", r.sink_arrival_ms},
          {"sensor_kind", to_string(r.sensor_kind)},
          {"value", r.value},
          {"checksum_ok", r.checksum_ok},
          {"hop_count", r.hop_count},
          {"battery_nj", r.energy.battery_nj},
          {"tx_count", r.energy.tx_count},
          {"rx_count", r.energy.rx_count}};
}

TelemetryRecord telemetry_from_json(const Json& b) {
  TelemetryRecord r;
  r.seq = b.value("seq", std::uint64_t{0});
  r.source_id = b.at("source_id").get<std::string>();
  r.emitted_ms = b.value("emitted_ms", std::int64_t{0});
  r.sink_arrival_ms = b.value("sink_arrival_ms", std::int64_t{0});
  r.sensor_kind = parse_sensor_kind(b.value("sensor_kind", std::string{"generic"}))
                      .value_or(SensorKind::Generic);
  r.value = b.value("value", 0.0);
  r.checksum_ok = b.value("checksum_ok", true);
  r.hop_count = b.value("hop_count", 0);
  r.energy.battery_nj = b.value("battery_nj", std::int64_t{0});
  r.energy.tx_count = b.value("tx_count", std::uint64_t{0});
  r.energy.rx_count = b.value("rx_count", std::uint64_t{0});
  return r;
}

Json to_json(const StateDelta& d) {
  return {{"t_ms", d.t_ms}, {"node_id", d.node_id}, {"kind", d.kind}, {"detail", d.detail}};
}

}  // namespace sentinel::sim
