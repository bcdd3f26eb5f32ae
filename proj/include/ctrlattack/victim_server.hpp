#pragma once

#include <atomic>
#include <functional>
#include <istream>
#include <memory>
#include <ostream>
#include <string>

#include "ctrlattack/victims.hpp"

namespace ctrlattack {

/// Builds a fresh victim; each server worker owns one.
using VictimFactory = std::function<std::unique_ptr<Victim>()>;

/// Answers one protocol line. Never throws: failures become error responses
/// carrying the request id (or "" when it cannot be recovered).
std::string handle_request_line(const std::string& line, Victim& victim);

/// Reads request lines from `in` until EOF and writes one response line per
/// request to `out`. Requests are handled by `workers` threads; writes are
/// serialized, so responses may be reordered but never interleaved.
void serve_stream(std::istream& in, std::ostream& out, const VictimFactory& factory, std::size_t workers = 4);

/// HTTP transport: POST /generate with a request line as body.
class HttpVictimServer {
 public:
  explicit HttpVictimServer(VictimFactory factory);
  ~HttpVictimServer();
  HttpVictimServer(const HttpVictimServer&) = delete;
  HttpVictimServer& operator=(const HttpVictimServer&) = delete;

  /// Binds to host:port (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop() is called.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ctrlattack
