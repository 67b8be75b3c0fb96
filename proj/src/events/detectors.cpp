#include "sentinel/events/detectors.hpp"

#include <cmath>

#include "sentinel/common/error.hpp"

namespace sentinel::events {

void FloodConfig::validate() const {
  if (!(k > 1.0)) throw Error(ErrorCode::InvalidArgument, "flood.k must be > 1");
  if (w < 1) throw Error(ErrorCode::InvalidArgument, "flood.w must be >= 1");
  if (warmup_windows < 1) throw Error(ErrorCode::InvalidArgument, "flood.warmup_windows must be >= 1");
  if (window_ms <= 0) throw Error(ErrorCode::InvalidArgument, "flood.window_s must be > 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "flood.alpha must lie in (0, 1]");
}

void DetectorConfig::validate() const {
  flood.validate();
  for (const auto& [kind, b] : bounds) {
    if (!(b.min <= b.max)) {
      throw Error(ErrorCode::InvalidArgument,
                  "bounds for " + std::string(sim::to_string(kind)) + " have min > max");
    }
  }
  if (!(drain.d > 0.0)) throw Error(ErrorCode::InvalidArgument, "drain.d must be > 0");
  drain.model.validate();
  if (dedup_window_ms < 0) throw Error(ErrorCode::InvalidArgument, "dedup_window_s must be >= 0");
}

RateState ewma_update(RateState state, double observed_count) {
  state.ewma = state.alpha * observed_count + (1.0 - state.alpha) * state.ewma;
  return state;
}

FloodStep detect_flood(RateState state, std::uint64_t observed_count, const FloodConfig& cfg,
                       const std::string& source_id, std::int64_t window_end_ms) {
  const double observed = static_cast<double>(observed_count);
  state = ewma_update(state, observed);
  ++state.windows_seen;
  FloodStep step;
  if (!state.baseline) {
    if (state.windows_seen >= cfg.warmup_windows) state.baseline = state.ewma;
    step.state = state;
    return step;
  }

  const double threshold = cfg.k * *state.baseline;
  if (observed > threshold) {
    ++state.consecutive_breaches;
    state.calm_windows = 0;
    if (state.consecutive_breaches >= cfg.w && !state.in_episode) {
      state.in_episode = true;
      step.event = EventDraft{EventType::DosFlood, source_id, "traffic", window_end_ms,
                              {{"observed", observed_count},
                               {"baseline", *state.baseline},
                               {"threshold", threshold},
                               {"window_ms", cfg.window_ms},
                               {"consecutive_windows", state.consecutive_breaches}}};
    }
  } else {
    state.consecutive_breaches = 0;
    ++state.calm_windows;
    if (state.in_episode && state.calm_windows >= cfg.w) state.in_episode = false;
  }
  step.state = state;
  return step;
}

SourceVerdict detect_source(const sim::TelemetryRecord& record, const cmdb::Cmdb& db, std::int64_t now_ms) {
  SourceVerdict v;
  switch (db.authorization_status(record.source_id, now_ms)) {
    case cmdb::AuthorizationStatus::Authorized:
      break;
    case cmdb::AuthorizationStatus::Exception:
      v.suppressed = true;
      break;
    case cmdb::AuthorizationStatus::Unknown:
      v.event = EventDraft{EventType::UnauthorizedAccess, record.source_id,
                           std::string(sim::to_string(record.sensor_kind)), now_ms,
                           {{"telemetry_seq", record.seq}, {"hop_count", record.hop_count}}};
      break;
  }
  return v;
}

std::optional<EventDraft> detect_bounds(const sim::TelemetryRecord& record,
                                        const std::map<sim::SensorKind, Bounds>& bounds,
                                        double overheat_threshold_c) {
  const std::string kind(sim::to_string(record.sensor_kind));
  auto integrity = [&](std::string reason) {
    return EventDraft{EventType::DataIntegrity, record.source_id, kind, record.sink_arrival_ms,
                      {{"reason", std::move(reason)}, {"value", record.value}, {"telemetry_seq", record.seq}}};
  };
  if (!record.checksum_ok) return integrity("checksum_failed");
  if (record.sensor_kind == sim::SensorKind::Temperature && record.value > overheat_threshold_c) {
    return EventDraft{EventType::Overheat, record.source_id, kind, record.sink_arrival_ms,
                      {{"value", record.value}, {"threshold_c", overheat_threshold_c},
                       {"telemetry_seq", record.seq}}};
  }
  const auto it = bounds.find(record.sensor_kind);
  if (it == bounds.end()) return integrity("no_bounds_configured");
  if (record.value < it->second.min || record.value > it->second.max) return integrity("out_of_bounds");
  return std::nullopt;
}

namespace {

bool drain_breach(const BatterySample& prev, const BatterySample& cur, const DrainConfig& cfg,
                  double* observed_j, double* expected_j) {
  const double dt_s = static_cast<double>(cur.t_ms - prev.t_ms) / 1000.0;
  *observed_j = static_cast<double>(prev.battery_nj - cur.battery_nj) / 1e9;
  *expected_j = cfg.model.e_tx_j * static_cast<double>(cur.tx_count - prev.tx_count) +
                cfg.model.e_rx_j * static_cast<double>(cur.rx_count - prev.rx_count) +
                cfg.model.idle_w * dt_s;
  return dt_s > 0.0 && *observed_j > cfg.d * *expected_j;
}

}  // namespace

DrainStep detect_drain(DrainState state, const BatterySample& sample, const DrainConfig& cfg,
                       const std::string& source_id) {
  DrainStep step;
  if (state.last && sample.t_ms > state.last->t_ms) {
    double observed = 0.0, expected = 0.0;
    if (drain_breach(*state.last, sample, cfg, &observed, &expected)) {
      if (!state.in_episode) {
        state.in_episode = true;
        step.event = EventDraft{EventType::EnergyDrain, source_id, "battery", sample.t_ms,
                                {{"observed_j", quantize(observed, 1e-9)},
                                 {"expected_j", quantize(expected, 1e-9)},
                                 {"ratio_threshold", cfg.d}}};
      }
    } else {
      state.in_episode = false;
    }
  }
  state.last = sample;
  step.state = state;
  return step;
}

std::optional<EventDraft> detect_drain(std::span<const BatterySample> history, const DrainConfig& cfg,
                                       const std::string& source_id) {
  if (history.size() < 2) return std::nullopt;
  DrainState state;
  for (const auto& s : history) {
    auto step = detect_drain(state, s, cfg, source_id);
    if (step.event) return step.event;
    state = step.state;
  }
  return std::nullopt;
}

}  // namespace sentinel::events
