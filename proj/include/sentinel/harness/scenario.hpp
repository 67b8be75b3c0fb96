#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sentinel/common/json.hpp"
#include "sentinel/core/engine.hpp"

namespace sentinel::harness {

struct Diagnostic {
  int line = 0;        // 1-based; 0 when unknown
  std::string field;   // JSON pointer, e.g. /attacks/0/multiplier
  std::string message;
};

std::string format(const Diagnostic& d, const std::string& file);

/// Scenario rejected: carries every problem found, not just the first.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string file, std::vector<Diagnostic> diagnostics);
  const std::string& file() const { return file_; }
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::string file_;
  std::vector<Diagnostic> diagnostics_;
};

/// Parsed document plus where each field sits in the source text.
struct ScenarioDocument {
  Json json;
  std::map<std::string, int> lines;  // JSON pointer -> line
};

/// JSON or YAML (by extension, .yaml/.yml). Throws ScenarioError on syntax errors.
ScenarioDocument load_document(const std::filesystem::path& path);
ScenarioDocument parse_document(const std::string& text, bool yaml, const std::string& file = "<input>");

/// Validates the document and builds the engine configuration. Throws
/// ScenarioError listing every violation.
core::EngineConfig build_config(const ScenarioDocument& doc, std::optional<std::uint64_t> seed_override = {},
                                const std::string& file = "<input>");

core::EngineConfig load_scenario(const std::filesystem::path& path,
                                 std::optional<std::uint64_t> seed_override = {});

/// Jittered grid of n sensors inside a square area. The caller places the sink.
std::vector<sim::Placement> generate_grid(std::size_t n, double area_m, const std::string& prefix,
                                          double jitter_m, std::uint64_t seed);

}  // namespace sentinel::harness
