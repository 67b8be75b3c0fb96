#include "sentinel/gateway/journal.hpp"

#include <algorithm>
#include <system_error>

#include "sentinel/common/error.hpp"
#include "sentinel/common/sha256.hpp"

namespace sentinel::gateway {

namespace fs = std::filesystem;

bool is_record_kind(std::string_view kind) {
  return std::find(std::begin(kRecordKinds), std::end(kRecordKinds), kind) != std::end(kRecordKinds);
}

const std::string& genesis_digest() {
  static const std::string zeros(64, '0');
  return zeros;
}

namespace {

std::string unsigned_record(std::uint64_t seq, std::int64_t ts_ms, std::string_view kind,
                            std::string_view body_json) {
  std::string s;
  s.reserve(body_json.size() + kind.size() + 48);
  s += "{\"body\":";
  s += body_json;
  s += ",\"kind\":\"";
  s += kind;
  s += "\",\"seq\":";
  s += std::to_string(seq);
  s += ",\"ts_ms\":";
  s += std::to_string(ts_ms);
  s += '}';
  return s;
}

// Parses and verifies one line against the chain so far.
std::optional<std::string> check_line(std::string_view line, std::uint64_t expect_seq, const std::string& prev,
                                      JournalRecord& out) {
  Json j = Json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return "unparseable record";
  if (!j.contains("seq") || !j["seq"].is_number_unsigned()) return "missing seq";
  if (!j.contains("ts_ms") || !j["ts_ms"].is_number_integer()) return "missing ts_ms";
  if (!j.contains("kind") || !j["kind"].is_string()) return "missing kind";
  if (!j.contains("digest") || !j["digest"].is_string()) return "missing digest";
  if (!j.contains("body")) return "missing body";
  if (j.size() != 5) return "unexpected fields";
  out.seq = j["seq"].get<std::uint64_t>();
  if (out.seq != expect_seq) return "seq " + std::to_string(out.seq) + " out of order";
  out.ts_ms = j["ts_ms"].get<std::int64_t>();
  out.kind = j["kind"].get<std::string>();
  if (!is_record_kind(out.kind)) return "unknown kind " + out.kind;
  out.digest = j["digest"].get<std::string>();
  out.body = std::move(j["body"]);
  if (chain_digest(prev, out.seq, out.ts_ms, out.kind, out.body.dump()) != out.digest) return "digest mismatch";
  return std::nullopt;
}

}  // namespace

std::string chain_digest(std::string_view prev_digest, std::uint64_t seq, std::int64_t ts_ms,
                         std::string_view kind, std::string_view body_json) {
  Sha256 h;
  h.update(prev_digest);
  h.update(unsigned_record(seq, ts_ms, kind, body_json));
  return h.hex_digest();
}

std::string record_line(std::uint64_t seq, std::int64_t ts_ms, std::string_view kind,
                        std::string_view body_json, std::string_view digest) {
  std::string s;
  s.reserve(body_json.size() + kind.size() + digest.size() + 64);
  s += "{\"body\":";
  s += body_json;
  s += ",\"digest\":\"";
  s += digest;
  s += "\",\"kind\":\"";
  s += kind;
  s += "\",\"seq\":";
  s += std::to_string(seq);
  s += ",\"ts_ms\":";
  s += std::to_string(ts_ms);
  s += '}';
  return s;
}

ScanResult scan_journal(const fs::path& path, const std::function<void(const JournalRecord&)>& visit) {
  ScanResult r;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open journal " + path.string());

  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    const bool terminated = !in.eof();
    const std::uint64_t next_offset = offset + line.size() + (terminated ? 1 : 0);
    JournalRecord rec;
    const auto problem = check_line(line, r.last_seq + 1, r.head_digest, rec);
    if (problem) {
      if (!terminated) {
        // A write interrupted before its newline: not an accepted record.
        r.truncated_tail = true;
        r.detail = "torn record after seq " + std::to_string(r.last_seq) + ": " + *problem;
      } else {
        r.corrupt_seq = r.last_seq + 1;
        r.detail = "seq " + std::to_string(*r.corrupt_seq) + ": " + *problem;
      }
      return r;
    }
    if (!terminated) r.unterminated_tail = true;
    r.last_seq = rec.seq;
    r.head_digest = rec.digest;
    r.valid_bytes = terminated ? next_offset : offset;
    if (visit) visit(rec);
    offset = next_offset;
    if (!terminated) break;
  }
  return r;
}

Journal::Journal(JournalOptions options) : options_(std::move(options)) {
  if (options_.path.empty()) return;
  if (options_.path.has_parent_path()) fs::create_directories(options_.path.parent_path());

  std::string tail_line;
  if (options_.resume && fs::exists(options_.path)) {
    ScanResult scan = scan_journal(options_.path, [&](const JournalRecord& rec) {
      if (options_.retain) {
        retained_.push_back({rec.seq, rec.kind, record_line(rec.seq, rec.ts_ms, rec.kind, rec.body.dump(), rec.digest)});
      }
      tail_line = record_line(rec.seq, rec.ts_ms, rec.kind, rec.body.dump(), rec.digest);
    });
    if (!scan.ok()) throw Error(ErrorCode::JournalCorrupt, scan.detail);
    last_seq_ = scan.last_seq;
    head_ = scan.head_digest;
    fs::resize_file(options_.path, scan.valid_bytes);
    const bool rewrite_tail = scan.unterminated_tail;
    recovery_ = std::move(scan);
    out_.open(options_.path, std::ios::binary | std::ios::app);
    if (rewrite_tail) out_ << tail_line << '\n';
  } else {
    out_.open(options_.path, std::ios::binary | std::ios::trunc);
  }
  if (!out_) throw Error(ErrorCode::Io, "cannot open journal " + options_.path.string() + " for writing");
}

Journal::~Journal() {
  if (out_.is_open()) out_.flush();
}

std::uint64_t Journal::append(std::string_view kind, std::int64_t ts_ms, const Json& body) {
  if (!is_record_kind(kind)) {
    throw Error(ErrorCode::InvalidArgument, "unknown journal record kind '" + std::string(kind) + "'");
  }
  const std::string body_json = body.dump();
  std::string line;
  std::uint64_t seq = 0;
  std::string digest;
  {
    std::lock_guard lock(mu_);
    seq = last_seq_ + 1;
    digest = chain_digest(head_, seq, ts_ms, kind, body_json);
    line = record_line(seq, ts_ms, kind, body_json, digest);
    if (out_.is_open()) {
      out_ << line << '\n';
      if (!out_) throw Error(ErrorCode::Io, "journal write failed at seq " + std::to_string(seq));
    }
    last_seq_ = seq;
    head_ = digest;
    if (options_.retain) retained_.push_back({seq, std::string(kind), std::move(line)});
  }
  cv_.notify_all();
  if (observer_) observer_(seq, ts_ms, kind, body);
  return seq;
}

void Journal::flush() {
  std::lock_guard lock(mu_);
  if (out_.is_open()) {
    out_.flush();
    if (!out_) throw Error(ErrorCode::Io, "journal flush failed");
  }
}

std::uint64_t Journal::last_seq() const {
  std::lock_guard lock(mu_);
  return last_seq_;
}

std::string Journal::head_digest() const {
  std::lock_guard lock(mu_);
  return head_;
}

std::vector<Journal::Line> Journal::since(std::uint64_t after_seq, const std::set<std::string>& kinds,
                                          std::size_t limit, std::uint64_t* scanned_to) const {
  std::vector<Line> out;
  std::lock_guard lock(mu_);
  std::uint64_t scanned = after_seq;
  if (!retained_.empty()) {
    const std::uint64_t first = retained_.front().seq;
    std::size_t i = after_seq + 1 > first ? static_cast<std::size_t>(after_seq + 1 - first) : 0;
    for (; i < retained_.size() && out.size() < limit; ++i) {
      scanned = retained_[i].seq;
      if (kinds.empty() || kinds.count(retained_[i].kind)) out.push_back(retained_[i]);
    }
  }
  if (scanned_to) *scanned_to = scanned;
  return out;
}

bool Journal::wait_for(std::uint64_t after_seq, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] { return last_seq_ > after_seq; });
}

ExportReceipt export_batch(const fs::path& journal, const std::set<std::string>& kinds, std::uint64_t since_seq,
                           const fs::path& sink) {
  std::ofstream out(sink, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write export sink " + sink.string());
  ExportReceipt receipt;
  Sha256 h;
  const ScanResult scan = scan_journal(journal, [&](const JournalRecord& rec) {
    if (rec.seq <= since_seq) return;
    if (!kinds.empty() && !kinds.count(rec.kind)) return;
    const std::string line = record_line(rec.seq, rec.ts_ms, rec.kind, rec.body.dump(), rec.digest) + "\n";
    out << line;
    h.update(line);
    ++receipt.count;
  });
  out.flush();
  const bool failed = !out || !scan.ok();
  out.close();
  if (failed) {
    std::error_code ec;
    fs::remove(sink, ec);
    throw Error(scan.ok() ? ErrorCode::Io : ErrorCode::JournalCorrupt,
                scan.ok() ? "export to " + sink.string() + " failed" : scan.detail);
  }
  receipt.digest = h.hex_digest();
  return receipt;
}

}  // namespace sentinel::gateway
