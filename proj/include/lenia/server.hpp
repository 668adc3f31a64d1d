#pragma once

// Websocket + static-asset server around a SessionHub.

#include "lenia/service.hpp"

#include <memory>
#include <string>

namespace lenia {

struct ServerConfig {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  ///< 0 picks a free port
  fs::path asset_dir;          ///< served over HTTP GET; empty disables asset serving
  fs::path params_dir;         ///< resolves "params_file" in create and load_params
  bool handle_signals = false; ///< stop cleanly on SIGINT / SIGTERM
};

/// Parses "host:port" (or ":port", or a bare port) into the address fields of `config`.
void parse_bind(const std::string& bind, ServerConfig& config);

/// One listening socket on one I/O thread; each live session steps on its own clock thread.
class Server {
 public:
  explicit Server(ServerConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Port actually bound (useful with port 0).
  unsigned short port() const;
  SessionHub& hub();

  /// Serves until stop() is called.
  void run();
  /// Thread-safe.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lenia
