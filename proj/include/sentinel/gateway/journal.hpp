#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sentinel/common/json.hpp"

namespace sentinel::gateway {

inline constexpr std::string_view kRecordKinds[] = {"telemetry", "event",  "alert",    "incident",
                                                    "action",    "import", "sim_delta"};

bool is_record_kind(std::string_view kind);

/// Digest before the first record.
const std::string& genesis_digest();

struct JournalRecord {
  std::uint64_t seq = 0;
  std::int64_t ts_ms = 0;
  std::string kind;
  Json body;
  std::string digest;
};

/// Chain step: sha256(prev_digest + canonical record without its digest).
std::string chain_digest(std::string_view prev_digest, std::uint64_t seq, std::int64_t ts_ms,
                         std::string_view kind, std::string_view body_json);

/// One JSON Lines entry, canonical, without the trailing newline.
std::string record_line(std::uint64_t seq, std::int64_t ts_ms, std::string_view kind,
                        std::string_view body_json, std::string_view digest);

struct ScanResult {
  std::uint64_t last_seq = 0;
  std::string head_digest = genesis_digest();
  std::uint64_t valid_bytes = 0;     // prefix holding only verified records
  bool truncated_tail = false;       // unterminated, unverifiable last line (dropped)
  bool unterminated_tail = false;    // last record verified but missing its newline (kept)
  std::optional<std::uint64_t> corrupt_seq;
  std::string detail;
  bool ok() const { return !corrupt_seq; }
};

/// Verifies the chain from genesis, handing each good record to `visit`.
/// Stops at the first broken record (corrupt_seq) or at a torn tail.
ScanResult scan_journal(const std::filesystem::path& path,
                        const std::function<void(const JournalRecord&)>& visit = {});

struct JournalOptions {
  std::filesystem::path path;  // empty: in memory only
  bool retain = false;         // keep lines for stream subscribers
  bool resume = false;         // continue an existing file instead of replacing it
};

/// Append-only, hash-chained journal. Appends come from the single writer;
/// readers may call since()/wait_for() from other threads.
class Journal {
 public:
  struct Line {
    std::uint64_t seq = 0;
    std::string kind;
    std::string text;
  };

  /// With resume, the existing file is verified and a torn tail cut off
  /// (reported through recovery()); a broken chain throws JournalCorrupt.
  explicit Journal(JournalOptions options = {});
  ~Journal();
  Journal(const Journal&) = delete;
  Journal& operator=(const Journal&) = delete;

  std::uint64_t append(std::string_view kind, std::int64_t ts_ms, const Json& body);
  void flush();

  std::uint64_t last_seq() const;
  std::string head_digest() const;
  const std::optional<ScanResult>& recovery() const { return recovery_; }
  const std::filesystem::path& path() const { return options_.path; }

  /// Called on the writer thread after every append.
  using Observer = std::function<void(std::uint64_t seq, std::int64_t ts_ms, std::string_view kind, const Json& body)>;
  void set_observer(Observer observer) { observer_ = std::move(observer); }

  /// Retained lines with seq > after_seq whose kind is in `kinds` (empty =
  /// all), at most `limit`. `scanned_to` receives the last seq examined, so
  /// a filtered reader can move its cursor past records it skipped.
  std::vector<Line> since(std::uint64_t after_seq, const std::set<std::string>& kinds, std::size_t limit,
                          std::uint64_t* scanned_to = nullptr) const;
  /// Blocks until a record beyond after_seq exists or the timeout passes.
  bool wait_for(std::uint64_t after_seq, std::chrono::milliseconds timeout) const;
  /// Wakes every waiter, e.g. at shutdown.
  void notify_all() const { cv_.notify_all(); }

 private:
  JournalOptions options_;
  std::ofstream out_;
  std::optional<ScanResult> recovery_;
  Observer observer_;

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::uint64_t last_seq_ = 0;
  std::string head_ = genesis_digest();
  std::vector<Line> retained_;
};

struct ExportReceipt {
  std::uint64_t count = 0;
  std::string digest;  // sha256 of the bytes written
};

/// Writes matching records (seq > since_seq) from a journal file to `sink`
/// as JSON Lines. Throws Io if the sink cannot be written; the sink is then
/// removed so no partial export is left behind.
ExportReceipt export_batch(const std::filesystem::path& journal, const std::set<std::string>& kinds,
                           std::uint64_t since_seq, const std::filesystem::path& sink);

}  // namespace sentinel::gateway
