#pragma once

#include <filesystem>
#include <string>

#include "sentinel/core/engine.hpp"
#include "sentinel/gateway/journal.hpp"
#include "sentinel/harness/report.hpp"

namespace sentinel::harness {

struct RunOutcome {
  Json report;
  std::string state_digest;
  JournalSummary journal;
};

/// Headless run: drives the engine to the scenario's end and builds the
/// report. The journal goes to journal_path, or stays in memory when empty.
RunOutcome run_scenario(const core::EngineConfig& config, const std::filesystem::path& journal_path = {});

struct ReplayOutcome {
  Json report;
  gateway::ScanResult scan;  // check scan.corrupt_seq / truncated_tail
};

/// Rebuilds state and report from a journal alone.
ReplayOutcome replay(const std::filesystem::path& journal_path);

}  // namespace sentinel::harness
