#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "sentinel/cmdb/cmdb.hpp"
#include "sentinel/events/event.hpp"
#include "sentinel/sim/types.hpp"

namespace sentinel::events {

struct FloodConfig {
  double k = 5.0;              // breach multiplier over the frozen baseline
  int w = 3;                   // consecutive breach windows before an event
  std::int64_t window_ms = 10'000;
  double alpha = 0.3;
  int warmup_windows = 6;

  void validate() const;
};

struct Bounds {
  double min = 0.0;
  double max = 0.0;
};

struct DrainConfig {
  double d = 3.0;  // observed / model-expected depletion ratio that counts as a breach
  sim::EnergyModel model;
};

struct DetectorConfig {
  FloodConfig flood;
  std::map<sim::SensorKind, Bounds> bounds = {
      {sim::SensorKind::Temperature, {-40.0, 125.0}},
      {sim::SensorKind::Humidity, {0.0, 100.0}},
      {sim::SensorKind::Generic, {-1e6, 1e6}},
  };
  double overheat_c = 70.0;  // default when the CI carries no overheat_c attribute
  DrainConfig drain;
  std::int64_t dedup_window_ms = 300'000;

  void validate() const;
};

/// Per-source traffic baseline for flood detection.
struct RateState {
  double ewma = 0.0;
  double alpha = 0.3;
  std::int64_t window_ms = 10'000;
  int windows_seen = 0;
  std::optional<double> baseline;  // frozen once warmup completes
  int consecutive_breaches = 0;
  int calm_windows = 0;
  bool in_episode = false;
};

RateState ewma_update(RateState state, double observed_count);

struct FloodStep {
  RateState state;
  std::optional<EventDraft> event;
};

/// Feeds one closed window's packet count for `source_id`.
FloodStep detect_flood(RateState state, std::uint64_t observed_count, const FloodConfig& cfg,
                       const std::string& source_id, std::int64_t window_end_ms);

struct SourceVerdict {
  std::optional<EventDraft> event;
  bool suppressed = false;  // known exception; caller bumps its counter
};

SourceVerdict detect_source(const sim::TelemetryRecord& record, const cmdb::Cmdb& db, std::int64_t now_ms);

/// Integrity / bounds / overheat, in that precedence. A reading of a kind
/// with no configured bounds is reported, never silently accepted.
std::optional<EventDraft> detect_bounds(const sim::TelemetryRecord& record,
                                        const std::map<sim::SensorKind, Bounds>& bounds,
                                        double overheat_threshold_c);

struct BatterySample {
  std::int64_t t_ms = 0;
  std::int64_t battery_nj = 0;
  std::uint64_t tx_count = 0;
  std::uint64_t rx_count = 0;
};

struct DrainState {
  std::optional<BatterySample> last;
  bool in_episode = false;
};

struct DrainStep {
  DrainState state;
  std::optional<EventDraft> event;
};

/// Compares the battery drop since the previous sample with what the energy
/// model predicts for the reported radio activity plus idle time.
DrainStep detect_drain(DrainState state, const BatterySample& sample, const DrainConfig& cfg,
                       const std::string& source_id);

/// Same verdict over a whole history; needs at least two samples.
std::optional<EventDraft> detect_drain(std::span<const BatterySample> history, const DrainConfig& cfg,
                                       const std::string& source_id);

}  // namespace sentinel::events
