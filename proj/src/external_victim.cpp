#include "ctrlattack/external_victim.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <httplib.h>
#include <json.hpp>

#include "ctrlattack/wire_protocol.hpp"

namespace ctrlattack {

SubprocessTransport::SubprocessTransport(std::vector<std::string> argv) : argv_(std::move(argv)) {
  if (argv_.empty()) throw InvalidArgument("subprocess transport needs a command");
  // Writes to a dead child must surface as EPIPE, not kill us.
  std::signal(SIGPIPE, SIG_IGN);
}

SubprocessTransport::~SubprocessTransport() { stop(); }

void SubprocessTransport::start() {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0) throw TransportError(std::string("pipe: ") + std::strerror(errno));
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw TransportError(std::string("pipe: ") + std::strerror(errno));
  }
  const pid_t pid = fork();
  if (pid < 0) throw TransportError(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    std::vector<char*> args;
    for (auto& a : argv_) args.push_back(a.data());
    args.push_back(nullptr);
    execvp(args[0], args.data());
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  fcntl(from_child_, F_SETFD, FD_CLOEXEC);
  buffer_.clear();
}

void SubprocessTransport::stop() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    // Closing stdin lets a well-behaved server exit on EOF; terminate otherwise.
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      usleep(10000);
    }
    kill(pid_, SIGTERM);
    waitpid(pid_, &status, 0);
  }
  pid_ = -1;
}

std::string SubprocessTransport::read_line(std::chrono::steady_clock::time_point deadline) {
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) throw TimeoutError("timed out waiting for the victim process");
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("poll: ") + std::strerror(errno));
    }
    if (ready == 0) continue;
    char chunk[4096];
    const ssize_t n = read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      stop();
      throw TransportError(std::string("read: ") + std::strerror(errno));
    }
    if (n == 0) {
      stop();
      throw TransportError("victim process closed its output");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::string SubprocessTransport::exchange(const std::string& id, const std::string& line,
                                          std::chrono::milliseconds timeout) {
  if (pid_ < 0) start();
  const std::string payload = line + "\n";
  std::size_t written = 0;
  while (written < payload.size()) {
    const ssize_t n = write(to_child_, payload.data() + written, payload.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string why = std::strerror(errno);
      stop();
      throw TransportError("write to victim process: " + why);
    }
    written += static_cast<std::size_t>(n);
  }
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (auto it = pending_.find(id); it != pending_.end()) {
      std::string found = std::move(it->second);
      pending_.erase(it);
      return found;
    }
    std::string response = read_line(deadline);
    if (response.empty()) continue;
    std::string other;
    try {
      const auto doc = nlohmann::json::parse(response);
      if (doc.is_object() && doc.contains("id") && doc["id"].is_string()) other = doc["id"].get<std::string>();
    } catch (const nlohmann::json::exception&) {
      // Unmatchable; with one request in flight it can only be ours.
      return response;
    }
    if (other == id) return response;
    pending_.emplace(std::move(other), std::move(response));
  }
}

std::string HttpTransport::exchange(const std::string& /*id*/, const std::string& line,
                                    std::chrono::milliseconds timeout) {
  httplib::Client client(base_url_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  const auto started = std::chrono::steady_clock::now();
  auto res = client.Post("/generate", line + "\n", "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout ||
        (err == httplib::Error::Read && std::chrono::steady_clock::now() - started >= timeout)) {
      throw TimeoutError("HTTP victim timed out: " + httplib::to_string(err));
    }
    throw TransportError("HTTP victim request failed: " + httplib::to_string(err));
  }
  if (res->status != 200) throw TransportError("HTTP victim returned status " + std::to_string(res->status));
  std::string body = res->body;
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
  return body;
}

ExternalVictim::ExternalVictim(std::unique_ptr<Transport> transport, std::chrono::milliseconds timeout,
                               RetryPolicy retry)
    : transport_(std::move(transport)), timeout_(timeout), retry_(retry) {}

ObservedTracks ExternalVictim::generate(const GenerationRequest& request) {
  request.validate();
  std::lock_guard lock(mutex_);
  ++queries_;
  const std::string id = "q" + std::to_string(next_id_++);
  const std::string line = wire::encode_request(id, request);
  for (std::size_t attempt = 0;; ++attempt) {
    std::string response;
    try {
      response = transport_->exchange(id, line, timeout_);
    } catch (const TimeoutError&) {
      throw;
    } catch (const TransportError&) {
      if (attempt >= retry_.max_retries) throw;
      continue;
    }
    const wire::DecodedResponse decoded = wire::decode_response(response);
    if (decoded.id != id) {
      throw ProtocolError("response id '" + decoded.id + "' does not match request '" + id + "'",
                          wire::excerpt(response));
    }
    if (decoded.error) throw ProtocolError("victim reported an error: " + *decoded.error, wire::excerpt(response));
    if (decoded.tracks->frame_count() != request.trajectory.frame_count()) {
      throw ProtocolError("victim returned " + std::to_string(decoded.tracks->frame_count()) + " frames, expected " +
                              std::to_string(request.trajectory.frame_count()),
                          wire::excerpt(response));
    }
    return *decoded.tracks;
  }
}

}  // namespace ctrlattack
