#include "sentinel/harness/report.hpp"

#include <algorithm>
#include <fstream>

#include "sentinel/common/error.hpp"

namespace sentinel::harness {

namespace {

Json ms_to_s(std::int64_t ms) { return quantize(static_cast<double>(ms) / 1000.0, 1e-3); }

}  // namespace

Json build_report(const gateway::RunStats& stats, const std::string& state_digest, const JournalSummary& journal) {
  const Json& sc = stats.scenario();

  std::map<std::string, std::uint64_t> alerts_by_type;
  for (const auto& [id, type] : stats.alerts()) ++alerts_by_type[type];

  Json detections = Json::array();
  for (const auto& e : stats.expectations()) {
    Json d = {{"label", e.label},
              {"target", e.target},
              {"event_type", e.event_type ? Json(*e.event_type) : Json(nullptr)},
              {"start_s", ms_to_s(e.start_ms)},
              {"detected_s", nullptr},
              {"detection_latency_s", nullptr}};
    if (e.detected_ms) {
      d["detected_s"] = ms_to_s(*e.detected_ms);
      d["detection_latency_s"] = ms_to_s(*e.detected_ms - e.start_ms);
    }
    detections.push_back(std::move(d));
  }

  Json incidents = Json::array();
  for (const auto& [ref, inc] : stats.incidents()) {
    incidents.push_back({{"reference", ref},
                         {"priority", inc.at("priority")},
                         {"tier", inc.at("tier")},
                         {"event_type", inc.at("event_type")},
                         {"source_id", inc.at("source_id")},
                         {"state", inc.at("state")},
                         {"opened_s", ms_to_s(inc.at("opened_ms").get<std::int64_t>())}});
  }

  Json responses = Json::array();
  for (const auto& a : stats.actions()) {
    responses.push_back({{"receipt_id", a.receipt_id},
                         {"action", a.action},
                         {"target", a.target},
                         {"incident_ref", a.incident_ref},
                         {"applied_s", ms_to_s(a.applied_ms)},
                         {"records_after", a.records_after}});
  }

  // Integer sum first, one division at the end: no order-dependent rounding.
  Json energy = {{"nodes", stats.energy().size()}, {"min_battery_j", nullptr}, {"mean_battery_j", nullptr},
                 {"dead", 0}, {"powered_off", 0}};
  if (!stats.energy().empty()) {
    std::int64_t total = 0;
    std::int64_t min = stats.energy().front().battery_nj;
    std::uint64_t dead = 0, off = 0;
    for (const auto& n : stats.energy()) {
      total += n.battery_nj;
      min = std::min(min, n.battery_nj);
      if (n.status == "Dead") ++dead;
      if (n.status == "PoweredOff") ++off;
    }
    const auto n = static_cast<std::int64_t>(stats.energy().size());
    energy["min_battery_j"] = static_cast<double>(min) / 1e9;
    energy["mean_battery_j"] = static_cast<double>(total / n) / 1e9;
    energy["dead"] = dead;
    energy["powered_off"] = off;
  }

  return {{"scenario", sc.value("name", std::string{})},
          {"seed", sc.value("seed", Json(nullptr))},
          {"duration_s", sc.contains("duration_ms") ? ms_to_s(sc.at("duration_ms").get<std::int64_t>()) : Json(nullptr)},
          {"counts",
           {{"telemetry", stats.telemetry()},
            {"suppressed", stats.suppressed()},
            {"events", stats.events()},
            {"events_by_type", stats.events_by_type()},
            {"alerts", stats.alerts().size()},
            {"alerts_by_type", alerts_by_type},
            {"incidents", stats.incidents().size()},
            {"actions", stats.actions().size()},
            {"imports", stats.imports()}}},
          {"sla_breaches", stats.sla_breaches()},
          {"detections", std::move(detections)},
          {"incidents", std::move(incidents)},
          {"responses", std::move(responses)},
          {"energy", std::move(energy)},
          {"state_digest", state_digest},
          {"journal", {{"records", journal.records}, {"head_digest", journal.head_digest}}}};
}

std::string report_text(const Json& report) { return report.dump(2) + "\n"; }

void write_report(const Json& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << report_text(report);
  if (!out) throw Error(ErrorCode::Io, "cannot write report " + path.string());
}

std::vector<Difference> compare_reports(const Json& a, const Json& b) {
  std::vector<Difference> out;
  for (const auto& op : Json::diff(a, b)) {
    out.push_back({op.at("op").get<std::string>(), op.at("path").get<std::string>(), op.value("value", Json(nullptr))});
  }
  return out;
}

}  // namespace sentinel::harness
