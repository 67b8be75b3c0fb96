// sentinel: scenario runner, journal replay, report diff and gateway.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <sstream>
#include <thread>

#include "sentinel/common/error.hpp"
#include "sentinel/gateway/server.hpp"
#include "sentinel/gateway/state.hpp"
#include "sentinel/harness/runner.hpp"
#include "sentinel/harness/scenario.hpp"

namespace fs = std::filesystem;
using namespace sentinel;

namespace {

fs::path data_dir() {
  const char* d = std::getenv("SENTINEL_DATA_DIR");
  return d && *d ? fs::path(d) : fs::path("sentinel-data");
}

void emit_report(const Json& report, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << harness::report_text(report);
  } else {
    harness::write_report(report, path);
  }
}

int report_scenario_error(const harness::ScenarioError& e) {
  for (const auto& d : e.diagnostics()) std::cerr << harness::format(d, e.file()) << '\n';
  return 2;
}

int cmd_run(const std::string& scenario, std::optional<std::uint64_t> seed, const std::string& report,
            std::string journal) {
  core::EngineConfig cfg;
  try {
    cfg = harness::load_scenario(scenario, seed);
  } catch (const harness::ScenarioError& e) {
    return report_scenario_error(e);
  }
  if (journal.empty()) journal = (data_dir() / (cfg.name + "-" + std::to_string(cfg.seed) + ".jsonl")).string();
  try {
    const auto out = harness::run_scenario(cfg, journal);
    emit_report(out.report, report);
    std::cerr << "journal: " << journal << " (" << out.journal.records << " records)\n";
  } catch (const Error& e) {
    // Semantic problems the schema check cannot see (e.g. an unroutable
    // topology) are still scenario errors.
    if (e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::DuplicateId ||
        e.code() == ErrorCode::MissingSink || e.code() == ErrorCode::OverlappingAttack ||
        e.code() == ErrorCode::UnknownTarget) {
      std::cerr << scenario << ": " << to_string(e.code()) << ": " << e.what() << '\n';
      return 2;
    }
    throw;
  }
  return 0;
}

int cmd_replay(const std::string& journal, const std::string& report) {
  const auto out = harness::replay(journal);
  if (out.scan.corrupt_seq) {
    std::cerr << "journal corrupt at seq " << *out.scan.corrupt_seq << ": " << out.scan.detail << '\n';
    return 3;
  }
  if (out.scan.truncated_tail) {
    std::cerr << "warning: " << out.scan.detail << "; replay stopped at seq " << out.scan.last_seq << '\n';
  }
  emit_report(out.report, report);
  return 0;
}

std::optional<Json> read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

int cmd_compare(const std::string& a, const std::string& b) {
  const auto ja = read_json(a);
  const auto jb = read_json(b);
  if (!ja || !jb) {
    std::cerr << "cannot parse " << (!ja ? a : b) << '\n';
    return 2;
  }
  const auto diffs = harness::compare_reports(*ja, *jb);
  for (const auto& d : diffs) {
    std::cout << d.op << ' ' << d.path;
    if (d.op != "remove") std::cout << ' ' << d.value.dump();
    std::cout << '\n';
  }
  return diffs.empty() ? 0 : 1;
}

int cmd_export(const std::string& journal, const std::string& kinds_csv, std::uint64_t since,
               const std::string& out) {
  std::set<std::string> kinds;
  std::stringstream ss(kinds_csv);
  for (std::string k; std::getline(ss, k, ',');) {
    if (k.empty()) continue;
    if (!gateway::is_record_kind(k)) {
      std::cerr << "unknown record kind " << k << '\n';
      return 2;
    }
    kinds.insert(k);
  }
  const auto receipt = gateway::export_batch(journal, kinds, since, out);
  std::cout << Json{{"count", receipt.count}, {"digest", receipt.digest}}.dump() << '\n';
  return 0;
}

fs::path rotate(const fs::path& journal) {
  if (!fs::exists(journal)) return {};
  for (int i = 1;; ++i) {
    fs::path old = journal;
    old.replace_extension("." + std::to_string(i) + journal.extension().string());
    if (!fs::exists(old)) {
      fs::rename(journal, old);
      return old;
    }
  }
}

std::optional<gateway::ReplayState> load_previous(const fs::path& journal_path, const fs::path& snapshot_path,
                                                  int& exit_code) {
  if (!fs::exists(journal_path)) return std::nullopt;
  const auto snap = read_json(snapshot_path.string());
  auto r = gateway::replay_journal(journal_path, snap ? &*snap : nullptr);
  if (r.scan.corrupt_seq) {
    std::cerr << "journal corrupt at seq " << *r.scan.corrupt_seq << ": " << r.scan.detail << '\n';
    exit_code = 3;
    return std::nullopt;
  }
  return std::move(r.state);
}

int cmd_serve(const std::string& scenario, std::optional<std::uint64_t> seed, std::optional<int> port,
              double realtime_factor, bool resume) {
  const fs::path dir = data_dir();
  fs::create_directories(dir);
  const fs::path journal_path = dir / "journal.jsonl";
  const fs::path snapshot_path = dir / "snapshot.json";

  core::EngineConfig cfg;
  std::optional<gateway::ReplayState> previous;
  if (!scenario.empty()) {
    try {
      cfg = harness::load_scenario(scenario, seed);
    } catch (const harness::ScenarioError& e) {
      return report_scenario_error(e);
    }
    if (resume) {
      // Same scenario, continued: the network is rebuilt from its config
      // and the journaled actions, the ITSM state from the journal.
      int code = 0;
      previous = load_previous(journal_path, snapshot_path, code);
      if (code) return code;
      if (previous && previous->stats().scenario().value("name", std::string{}) != cfg.name) {
        std::cerr << "journal belongs to scenario " << previous->stats().scenario().value("name", std::string{})
                  << ", not " << cfg.name << '\n';
        return 2;
      }
    } else {
      if (auto old = rotate(journal_path); !old.empty()) std::cerr << "previous journal kept as " << old << '\n';
      std::error_code ec;
      fs::remove(snapshot_path, ec);
    }
  } else {
    cfg.name = "idle";
    cfg.nodes.push_back({{"sink", {0.0, 0.0}}, 10.0, sim::SensorKind::Generic, std::nullopt});
    cfg.sink_id = "sink";
    int code = 0;
    previous = load_previous(journal_path, snapshot_path, code);
    if (code) return code;
  }

  // SIGINT/SIGTERM are taken synchronously by a watcher thread.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  gateway::Journal journal({journal_path, true, previous.has_value()});
  if (journal.recovery() && journal.recovery()->truncated_tail) {
    std::cerr << "recovered journal: " << journal.recovery()->detail << '\n';
  }
  core::Engine engine(cfg, journal);
  if (previous) {
    engine.resume(*previous);
  } else {
    engine.start();
    journal.flush();
  }

  gateway::ServerOptions opts = gateway::options_from_env();
  if (port) opts.port = *port;
  opts.realtime_factor = realtime_factor;
  opts.snapshot_path = snapshot_path;
  gateway::Server server(engine, journal, opts);
  const int bound = server.bind();
  std::cerr << "sentinel gateway on port " << bound << " (scenario " << cfg.name << ", data " << dir.string()
            << ")\n";

  std::atomic<bool> signalled{false};
  std::thread watcher([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    signalled = true;
    server.stop();
  });
  server.listen();
  server.stop();
  if (!signalled) pthread_kill(watcher.native_handle(), SIGTERM);
  watcher.join();
  server.write_snapshot();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"WSN security operations pipeline: simulate, detect, correlate, respond"};
  app.require_subcommand(1);

  std::string scenario, report, journal, a, b, kinds, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> port;
  std::uint64_t since = 0;
  double realtime = 0.0;

  auto* run = app.add_subcommand("run", "run a scenario headless and print its report");
  run->add_option("--scenario", scenario, "scenario file (.json, .yaml)")->required();
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--report", report, "write the report here instead of stdout");
  run->add_option("--journal", journal, "journal path (default: $SENTINEL_DATA_DIR/<name>-<seed>.jsonl)");

  auto* rep = app.add_subcommand("replay", "rebuild the report from a journal");
  rep->add_option("journal", journal, "journal file")->required();
  rep->add_option("--report", report, "write the report here instead of stdout");

  auto* cmp = app.add_subcommand("compare", "diff two reports (exit 0 equal, 1 different, 2 unreadable)");
  cmp->add_option("a", a)->required();
  cmp->add_option("b", b)->required();

  auto* exp = app.add_subcommand("export", "write journal records as JSON Lines");
  exp->add_option("journal", journal, "journal file")->required();
  exp->add_option("--kinds", kinds, "comma-separated record kinds (default: all)");
  exp->add_option("--since", since, "only records with a larger seq");
  exp->add_option("--out", out, "destination file")->required();

  auto* serve = app.add_subcommand("serve", "start the HTTP gateway");
  serve->add_option("--scenario", scenario, "scenario to run live");
  serve->add_option("--seed", seed, "override the scenario seed");
  serve->add_option("--port", port, "listen port (default $SENTINEL_PORT or 8080)");
  serve->add_option("--realtime-factor", realtime, "simulated ms per wall ms; 0 advances only on request")
      ->check(CLI::NonNegativeNumber);
  bool resume = false;
  serve->add_flag("--resume", resume, "continue the scenario recorded in the data directory's journal");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(scenario, seed, report, journal);
    if (*rep) return cmd_replay(journal, report);
    if (*cmp) return cmd_compare(a, b);
    if (*exp) return cmd_export(journal, kinds, since, out);
    if (*serve) return cmd_serve(scenario, seed, port, realtime, resume);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
