#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>

#include "sentinel/common/error.hpp"
#include "sentinel/common/json.hpp"
#include "sentinel/core/engine.hpp"
#include "sentinel/gateway/journal.hpp"

namespace httplib {
class Server;
}

namespace sentinel::gateway {

struct ApiError {
  int status = 500;
  std::string code;
  std::string detail;
};

Json to_json(const ApiError& e);
/// HTTP status and machine code for a domain error.
ApiError api_error(const Error& e);

struct ServerOptions {
  std::string host = "0.0.0.0";
  int port = 8080;                   // 0: pick a free port
  std::optional<std::string> token;  // static bearer token
  double realtime_factor = 0.0;      // simulated ms per wall ms; 0 = advance only on request
  std::filesystem::path snapshot_path;
  std::size_t max_body_bytes = 8u << 20;
};

/// Reads SENTINEL_PORT / SENTINEL_TOKEN over the given defaults.
ServerOptions options_from_env(ServerOptions base = {});

/// HTTP facade over one engine. Requests that change state are serialized
/// through a writer lock and journaled (and flushed) before the response.
class Server {
 public:
  Server(core::Engine& engine, Journal& journal, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and returns the bound port. Throws Io on failure.
  int bind();
  /// Serves until stop(). Call after bind().
  void listen();
  /// bind() + listen() on a background thread; returns the port.
  int start_background();
  void stop();

  /// Writes the fast-restart snapshot if a path was configured.
  void write_snapshot();

 private:
  void install_routes();
  void realtime_loop();

  core::Engine& engine_;
  Journal& journal_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> http_;
  std::shared_mutex mu_;
  std::atomic<bool> stopping_{false};
  std::thread listener_;
  std::thread ticker_;
  int port_ = 0;
};

}  // namespace sentinel::gateway
