#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ctrlattack/victims.hpp"

namespace ctrlattack {

/// One request/response exchange of wire-protocol lines.
class Transport {
 public:
  virtual ~Transport() = default;
  /// Sends `line` and returns the response line whose id equals `id`.
  virtual std::string exchange(const std::string& id, const std::string& line,
                               std::chrono::milliseconds timeout) = 0;
};

/// Spawns a child process and speaks the protocol over its stdin/stdout.
class SubprocessTransport : public Transport {
 public:
  explicit SubprocessTransport(std::vector<std::string> argv);
  ~SubprocessTransport() override;
  SubprocessTransport(const SubprocessTransport&) = delete;
  SubprocessTransport& operator=(const SubprocessTransport&) = delete;

  std::string exchange(const std::string& id, const std::string& line,
                       std::chrono::milliseconds timeout) override;

 private:
  void start();
  void stop();
  std::string read_line(std::chrono::steady_clock::time_point deadline);

  std::vector<std::string> argv_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  // Responses that arrived for other ids.
  std::map<std::string, std::string> pending_;
};

/// POSTs each request line to <base_url>/generate.
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(std::string base_url) : base_url_(std::move(base_url)) {}
  std::string exchange(const std::string& id, const std::string& line,
                       std::chrono::milliseconds timeout) override;

 private:
  std::string base_url_;
};

struct RetryPolicy {
  // Extra attempts after a transport failure. Protocol errors are never retried.
  std::size_t max_retries = 2;
};

/// Client for a victim reached over the wire protocol. Requests on one
/// instance are serialized.
class ExternalVictim : public Victim {
 public:
  ExternalVictim(std::unique_ptr<Transport> transport,
                 std::chrono::milliseconds timeout = std::chrono::seconds(120), RetryPolicy retry = {});

  ObservedTracks generate(const GenerationRequest& request) override;
  std::string name() const override { return "external"; }
  std::size_t queries() const { return queries_; }

 private:
  std::unique_ptr<Transport> transport_;
  std::chrono::milliseconds timeout_;
  RetryPolicy retry_;
  std::size_t queries_ = 0;
  std::size_t next_id_ = 0;
  std::mutex mutex_;
};

}  // namespace ctrlattack
