#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sentinel/common/json.hpp"
#include "sentinel/gateway/state.hpp"

namespace sentinel::harness {

struct JournalSummary {
  std::uint64_t records = 0;
  std::string head_digest;
};

/// Machine-readable run summary. Built from RunStats only, so a live run and
/// a replay of its journal produce the same bytes.
Json build_report(const gateway::RunStats& stats, const std::string& state_digest, const JournalSummary& journal);

/// Canonical text: sorted keys, two-space indent, trailing newline.
std::string report_text(const Json& report);
void write_report(const Json& report, const std::filesystem::path& path);

struct Difference {
  std::string op;    // add | remove | replace
  std::string path;  // JSON pointer
  Json value;
};

std::vector<Difference> compare_reports(const Json& a, const Json& b);

}  // namespace sentinel::harness
