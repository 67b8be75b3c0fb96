#include "sentinel/gateway/server.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

namespace sentinel::gateway {

namespace {

constexpr const char* kJson = "application/json";

void send(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void fail(httplib::Response& res, const ApiError& e) { send(res, e.status, to_json(e)); }

void fail(httplib::Response& res, int status, std::string code, std::string detail) {
  fail(res, ApiError{status, std::move(code), std::move(detail)});
}

std::string default_code(int status) {
  switch (status) {
    case 400: return "bad_request";
    case 401: return "unauthorized";
    case 404: return "not_found";
    case 405: return "method_not_allowed";
    case 409: return "conflict";
    case 413: return "payload_too_large";
    case 414: return "uri_too_long";
    case 416: return "range_not_satisfiable";
    default: return status >= 500 ? "internal" : "error";
  }
}

std::optional<Json> parse_body(const httplib::Request& req, httplib::Response& res) {
  Json j = Json::parse(req.body, nullptr, false);
  if (j.is_discarded()) {
    fail(res, 400, "bad_request", "body is not valid JSON");
    return std::nullopt;
  }
  return j;
}

std::optional<std::uint64_t> parse_uint(const std::string& text) {
  if (text.empty() || text.size() > 19) return std::nullopt;
  std::uint64_t v = 0;
  for (char c : text) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
  }
  return v;
}

std::size_t limit_param(const httplib::Request& req, std::size_t fallback) {
  if (!req.has_param("limit")) return fallback;
  const auto v = parse_uint(req.get_param_value("limit"));
  if (!v || *v == 0) throw Error(ErrorCode::InvalidArgument, "limit must be a positive integer");
  return static_cast<std::size_t>(*v);
}

// Writes one whole record or nothing for this round.
bool write_frame(httplib::DataSink& sink, const Journal::Line& line) {
  std::string frame = "id: " + std::to_string(line.seq) + "\nevent: " + line.kind + "\ndata: " + line.text + "\n\n";
  return sink.write(frame.data(), frame.size());
}

}  // namespace

Json to_json(const ApiError& e) { return {{"status", e.status}, {"code", e.code}, {"detail", e.detail}}; }

ApiError api_error(const Error& e) {
  const std::string code(to_string(e.code()));
  switch (e.code()) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::OutOfRange:
      return {400, e.code() == ErrorCode::InvalidArgument ? "bad_request" : code, e.what()};
    case ErrorCode::NotFound:
    case ErrorCode::UnknownTarget:
      return {404, code, e.what()};
    case ErrorCode::IllegalTransition:
    case ErrorCode::ImmutableRecord:
    case ErrorCode::NotInProgress:
    case ErrorCode::DuplicateId:
    case ErrorCode::ClassChange:
    case ErrorCode::OverlappingAttack:
      return {409, code, e.what()};
    case ErrorCode::InvalidAction:
    case ErrorCode::InvalidClass:
    case ErrorCode::SelfRelation:
    case ErrorCode::DependencyCycle:
    case ErrorCode::MissingSink:
      return {422, code, e.what()};
    case ErrorCode::JournalCorrupt:
    case ErrorCode::Io:
      return {500, code, e.what()};
  }
  return {500, "internal", e.what()};
}

ServerOptions options_from_env(ServerOptions base) {
  if (const char* p = std::getenv("SENTINEL_PORT")) {
    const auto v = parse_uint(p);
    if (!v || *v > 65535) throw Error(ErrorCode::InvalidArgument, std::string("SENTINEL_PORT is not a port: ") + p);
    base.port = static_cast<int>(*v);
  }
  if (const char* t = std::getenv("SENTINEL_TOKEN"); t && *t) base.token = t;
  return base;
}

Server::Server(core::Engine& engine, Journal& journal, ServerOptions options)
    : engine_(engine), journal_(journal), options_(std::move(options)), http_(std::make_unique<httplib::Server>()) {
  install_routes();
}

Server::~Server() { stop(); }

int Server::bind() {
  if (options_.port == 0) {
    port_ = http_->bind_to_any_port(options_.host);
    if (port_ < 0) throw Error(ErrorCode::Io, "cannot bind " + options_.host);
  } else {
    if (!http_->bind_to_port(options_.host, options_.port)) {
      throw Error(ErrorCode::Io, "cannot bind " + options_.host + ":" + std::to_string(options_.port));
    }
    port_ = options_.port;
  }
  return port_;
}

void Server::listen() {
  if (options_.realtime_factor > 0 && !ticker_.joinable()) ticker_ = std::thread([this] { realtime_loop(); });
  http_->listen_after_bind();
}

int Server::start_background() {
  const int port = bind();
  listener_ = std::thread([this] { listen(); });
  http_->wait_until_ready();
  return port;
}

void Server::stop() {
  if (stopping_.exchange(true)) return;
  journal_.notify_all();
  http_->stop();
  if (listener_.joinable()) listener_.join();
  if (ticker_.joinable()) ticker_.join();
  std::unique_lock lock(mu_);
  journal_.flush();
}

void Server::write_snapshot() {
  if (options_.snapshot_path.empty()) return;
  Json snap;
  {
    std::shared_lock lock(mu_);
    snap = {{"seq", journal_.last_seq()},
            {"head_digest", journal_.head_digest()},
            {"state_digest", engine_.state_digest()},
            {"cmdb", engine_.cmdb().to_json()},
            {"alerts", engine_.alerts().to_json()},
            {"incidents", engine_.desk().to_json()},
            {"stats", engine_.stats().to_json()}};
  }
  const auto tmp = options_.snapshot_path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << snap.dump();
    if (!out) throw Error(ErrorCode::Io, "cannot write snapshot " + tmp);
  }
  std::filesystem::rename(tmp, options_.snapshot_path);
}

void Server::realtime_loop() {
  using namespace std::chrono;
  constexpr auto tick = milliseconds(100);
  while (!stopping_) {
    std::this_thread::sleep_for(tick);
    std::unique_lock lock(mu_);
    if (engine_.finished()) continue;
    const auto step = static_cast<std::int64_t>(static_cast<double>(tick.count()) * options_.realtime_factor);
    const std::int64_t target = std::min(engine_.clock_ms() + std::max<std::int64_t>(step, 1),
                                         engine_.config().duration_ms);
    if (target > engine_.clock_ms()) engine_.advance_to(target);
    if (engine_.clock_ms() >= engine_.config().duration_ms) engine_.finish();
    journal_.flush();
  }
}

void Server::install_routes() {
  auto& s = *http_;
  s.set_payload_max_length(options_.max_body_bytes);

  s.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (!options_.token) return httplib::Server::HandlerResponse::Unhandled;
    if (req.get_header_value("Authorization") == "Bearer " + *options_.token) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    fail(res, 401, "unauthorized", "missing or wrong bearer token");
    return httplib::Server::HandlerResponse::Handled;
  });

  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    const std::string detail = httplib::status_message(res.status);
    res.set_content(to_json(ApiError{res.status, default_code(res.status), detail}).dump(), kJson);
    return httplib::Server::HandlerResponse::Handled;
  });

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      fail(res, api_error(e));
    } catch (const Json::exception& e) {
      fail(res, 400, "bad_request", e.what());
    } catch (const std::exception& e) {
      fail(res, 500, "internal", e.what());
    } catch (...) {
      fail(res, 500, "internal", "unknown failure");
    }
  });

  s.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
    send(res, 200, {{"status", "ok"}, {"journal_seq", journal_.last_seq()}});
  });

  s.Post(R"(/api/import/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string table = req.matches[1];
    const auto body = parse_body(req, res);
    if (!body) return;
    if (!body->is_array()) return fail(res, 400, "bad_request", "body must be an array of flat objects");
    std::vector<FieldMap> rows;
    rows.reserve(body->size());
    for (std::size_t i = 0; i < body->size(); ++i) {
      const Json& row = (*body)[i];
      if (!row.is_object()) return fail(res, 400, "bad_request", "row " + std::to_string(i) + " is not an object");
      FieldMap fields;
      for (const auto& [k, v] : row.items()) {
        if (v.is_null()) continue;
        auto scalar = scalar_from_json(v);
        if (!scalar) {
          return fail(res, 400, "bad_request", "row " + std::to_string(i) + " field '" + k + "' is not a scalar");
        }
        fields.emplace(k, std::move(*scalar));
      }
      rows.push_back(std::move(fields));
    }
    std::unique_lock lock(mu_);
    if (!engine_.has_table(table)) return fail(res, 404, "unknown_table", "no transform map for table " + table);
    if (rows.size() > engine_.config().max_import_rows) {
      return fail(res, 413, "payload_too_large",
                  std::to_string(rows.size()) + " rows; the limit is " +
                      std::to_string(engine_.config().max_import_rows));
    }
    const auto result = engine_.import_rows(table, std::move(rows));
    journal_.flush();
    send(res, 200, ingest::to_json(result));
  });

  s.Get("/api/events", [this](const httplib::Request& req, httplib::Response& res) {
    const std::size_t limit = limit_param(req, 500);
    std::optional<events::EventType> type;
    if (req.has_param("type")) {
      type = events::parse_event_type(req.get_param_value("type"));
      if (!type) return fail(res, 400, "bad_request", "unknown event type");
    }
    const std::string source = req.get_param_value("source");
    Json out = Json::array();
    std::shared_lock lock(mu_);
    const auto& recent = engine_.recent_events();
    // Newest last, like the journal; the limit keeps the newest.
    std::vector<const events::Event*> picked;
    for (auto it = recent.rbegin(); it != recent.rend() && picked.size() < limit; ++it) {
      if (type && it->type != *type) continue;
      if (!source.empty() && it->source_id != source) continue;
      picked.push_back(&*it);
    }
    for (auto it = picked.rbegin(); it != picked.rend(); ++it) out.push_back(events::to_json(**it));
    send(res, 200, out);
  });

  s.Get("/api/alerts", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string state = req.get_param_value("state");
    if (!state.empty() && state != "open" && state != "closed") {
      return fail(res, 400, "bad_request", "state must be open or closed");
    }
    Json out = Json::array();
    std::shared_lock lock(mu_);
    for (const auto& [id, a] : engine_.alerts().alerts()) {
      if (state == "open" && a.state != events::AlertState::Open) continue;
      if (state == "closed" && a.state != events::AlertState::Closed) continue;
      out.push_back(events::to_json(a));
    }
    send(res, 200, out);
  });

  s.Get("/api/incidents", [this](const httplib::Request& req, httplib::Response& res) {
    std::optional<incidents::IncidentState> state;
    if (req.has_param("state")) {
      state = incidents::parse_incident_state(req.get_param_value("state"));
      if (!state) return fail(res, 400, "bad_request", "unknown incident state");
    }
    Json out = Json::array();
    std::shared_lock lock(mu_);
    for (const auto& [ref, inc] : engine_.desk().incidents()) {
      if (state && inc.state != *state) continue;
      out.push_back(incidents::to_json(inc));
    }
    send(res, 200, out);
  });

  s.Get(R"(/api/incidents/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    std::shared_lock lock(mu_);
    const auto* inc = engine_.desk().find(req.matches[1]);
    if (!inc) return fail(res, 404, "not_found", "no incident " + std::string(req.matches[1]));
    send(res, 200, incidents::to_json(*inc));
  });

  s.Patch(R"(/api/incidents/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req, res);
    if (!body) return;
    if (!body->is_object()) return fail(res, 400, "bad_request", "body must be an object");
    std::optional<incidents::IncidentState> to;
    if (body->contains("state")) {
      if (!(*body)["state"].is_string()) return fail(res, 400, "bad_request", "state must be a string");
      to = incidents::parse_incident_state((*body)["state"].get<std::string>());
      if (!to) return fail(res, 400, "bad_request", "unknown incident state");
    }
    const std::string actor = body->value("actor", std::string{"analyst"});
    const std::string note = body->value("note", std::string{});
    std::unique_lock lock(mu_);
    const auto& inc = engine_.update_incident(req.matches[1], to, actor, note);
    journal_.flush();
    send(res, 200, incidents::to_json(inc));
  });

  s.Post("/api/actions", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req, res);
    if (!body) return;
    if (!body->is_object()) return fail(res, 400, "bad_request", "body must be an object");
    ResponseAction a;
    const auto kind = parse_action_kind(body->value("action", std::string{}));
    if (!kind) return fail(res, 400, "bad_request", "action must be quarantine, power_off, patch or add_exception");
    a.action = *kind;
    a.target = body->value("target", std::string{});
    a.incident_ref = body->value("incident_ref", std::string{});
    a.requested_by = body->value("requested_by", std::string{"analyst"});
    a.reason = body->value("reason", std::string{});
    if (a.target.empty() || a.incident_ref.empty()) {
      return fail(res, 400, "bad_request", "target and incident_ref are required");
    }
    if (a.action == ActionKind::AddException) {
      const Json exp = body->value("expires_ms", Json("never"));
      if (exp.is_number_integer()) {
        a.expires_ms = exp.get<std::int64_t>();
      } else if (!(exp.is_string() && exp.get<std::string>() == "never")) {
        return fail(res, 400, "bad_request", "expires_ms must be an integer or \"never\"");
      }
    }
    std::unique_lock lock(mu_);
    const auto receipt = engine_.execute(a);
    journal_.flush();
    send(res, 200, incidents::to_json(receipt));
  });

  s.Get("/api/cmdb/ci", [this](const httplib::Request& req, httplib::Response& res) {
    std::optional<cmdb::CiClass> cls;
    if (req.has_param("class")) {
      cls = cmdb::parse_ci_class(req.get_param_value("class"));
      if (!cls) return fail(res, 400, "bad_request", "unknown CI class");
    }
    Json out = Json::array();
    std::shared_lock lock(mu_);
    for (const auto& [id, ci] : engine_.cmdb().items()) {
      if (cls && ci.ci_class != *cls) continue;
      out.push_back(cmdb::to_json(ci));
    }
    send(res, 200, out);
  });

  s.Get(R"(/api/cmdb/ci/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    std::shared_lock lock(mu_);
    const std::string id = req.matches[1];
    const auto& db = engine_.cmdb();
    const auto* ci = db.find(id);
    if (!ci) ci = db.find_by_node(id);
    if (!ci) return fail(res, 404, "not_found", "no CI " + id);
    Json rels = Json::array();
    for (const auto& r : db.relationships()) {
      if (r.parent_ci == ci->ci_id || r.child_ci == ci->ci_id) {
        rels.push_back({{"parent_ci", r.parent_ci}, {"child_ci", r.child_ci}, {"rel_type", cmdb::to_string(r.rel_type)}});
      }
    }
    Json out = cmdb::to_json(*ci);
    out["relationships"] = std::move(rels);
    send(res, 200, out);
  });

  s.Get("/api/sim/status", [this](const httplib::Request&, httplib::Response& res) {
    std::shared_lock lock(mu_);
    send(res, 200, engine_.sim_status());
  });

  s.Post("/api/sim/advance", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req, res);
    if (!body) return;
    if (!body->is_object() || !body->contains("until_ms") || !(*body)["until_ms"].is_number_integer()) {
      return fail(res, 400, "bad_request", "body must be {\"until_ms\": <integer>}");
    }
    const auto until = (*body)["until_ms"].get<std::int64_t>();
    {
      std::unique_lock lock(mu_);
      engine_.advance_to(until);
      if (engine_.clock_ms() >= engine_.config().duration_ms && engine_.config().duration_ms > 0) engine_.finish();
      journal_.flush();
      send(res, 200, {{"clock_ms", engine_.clock_ms()}, {"journal_seq", journal_.last_seq()}, {"finished", engine_.finished()}});
    }
    write_snapshot();
  });

  s.Get("/api/stream", [this](const httplib::Request& req, httplib::Response& res) {
    std::set<std::string> kinds;
    if (req.has_param("kinds")) {
      std::stringstream ss(req.get_param_value("kinds"));
      std::string k;
      while (std::getline(ss, k, ',')) {
        if (k.empty()) continue;
        if (!is_record_kind(k)) return fail(res, 400, "bad_request", "unknown record kind " + k);
        kinds.insert(k);
      }
    }
    std::uint64_t last_seq = 0;
    if (req.has_param("last_seq")) {
      const auto v = parse_uint(req.get_param_value("last_seq"));
      if (!v) return fail(res, 400, "bad_request", "last_seq must be a non-negative integer");
      last_seq = *v;
    } else if (req.has_header("Last-Event-ID")) {
      const auto v = parse_uint(req.get_header_value("Last-Event-ID"));
      if (!v) return fail(res, 400, "bad_request", "Last-Event-ID must be a non-negative integer");
      last_seq = *v;
    }
    if (last_seq > journal_.last_seq()) {
      return fail(res, 400, "bad_request",
                  "last_seq " + std::to_string(last_seq) + " is ahead of the journal (" +
                      std::to_string(journal_.last_seq()) + ")");
    }
    // follow=0 ends the stream once the backlog is delivered.
    const bool follow = req.get_param_value("follow") != "0";
    const std::size_t max_records = req.has_param("limit") ? limit_param(req, 0) : 0;

    struct Cursor {
      std::uint64_t scanned = 0;
      std::size_t sent = 0;
    };
    auto cursor = std::make_shared<Cursor>(Cursor{last_seq, 0});
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream", [this, kinds, follow, max_records, cursor](std::size_t, httplib::DataSink& sink) {
          if (stopping_) return false;
          std::uint64_t scanned = cursor->scanned;
          const auto lines = journal_.since(cursor->scanned, kinds, 256, &scanned);
          for (const auto& line : lines) {
            if (!write_frame(sink, line)) return false;
            ++cursor->sent;
            cursor->scanned = line.seq;
            if (max_records && cursor->sent >= max_records) {
              sink.done();
              return true;
            }
          }
          cursor->scanned = scanned;
          if (lines.empty()) {
            if (!follow) {
              sink.done();
              return true;
            }
            if (!journal_.wait_for(cursor->scanned, std::chrono::milliseconds(1000))) {
              static constexpr char kKeepAlive[] = ": keepalive\n\n";
              if (!sink.write(kKeepAlive, sizeof(kKeepAlive) - 1)) return false;
            }
          }
          return true;
        });
  });
}

}  // namespace sentinel::gateway
