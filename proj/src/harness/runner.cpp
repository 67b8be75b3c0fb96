#include "sentinel/harness/runner.hpp"

namespace sentinel::harness {

RunOutcome run_scenario(const core::EngineConfig& config, const std::filesystem::path& journal_path) {
  gateway::Journal journal(gateway::JournalOptions{journal_path, false, false});
  core::Engine engine(config, journal);
  engine.run();
  journal.flush();

  RunOutcome out;
  out.state_digest = engine.state_digest();
  out.journal = {journal.last_seq(), journal.head_digest()};
  out.report = build_report(engine.stats(), out.state_digest, out.journal);
  return out;
}

ReplayOutcome replay(const std::filesystem::path& journal_path) {
  auto r = gateway::replay_journal(journal_path);
  ReplayOutcome out;
  out.scan = r.scan;
  out.report = build_report(r.state.stats(), r.state.digest(), {r.scan.last_seq, r.scan.head_digest});
  return out;
}

}  // namespace sentinel::harness
