#include "ctrlattack/victim_server.hpp"

#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <thread>

#include <httplib.h>

#include "ctrlattack/wire_protocol.hpp"

namespace ctrlattack {

std::string handle_request_line(const std::string& line, Victim& victim) {
  std::string id;
  try {
    const wire::DecodedRequest decoded = wire::decode_request(line, &id);
    return wire::encode_tracks(decoded.id, victim.generate(decoded.request));
  } catch (const std::exception& e) {
    return wire::encode_error(id, e.what());
  } catch (...) {
    return wire::encode_error(id, "unknown error");
  }
}

void serve_stream(std::istream& in, std::ostream& out, const VictimFactory& factory, std::size_t workers) {
  workers = std::max<std::size_t>(workers, 1);
  std::mutex queue_mutex;
  std::condition_variable ready;
  std::deque<std::string> queue;
  bool done = false;
  std::mutex out_mutex;

  auto worker = [&] {
    std::unique_ptr<Victim> victim = factory();
    for (;;) {
      std::string line;
      {
        std::unique_lock lock(queue_mutex);
        ready.wait(lock, [&] { return done || !queue.empty(); });
        if (queue.empty()) return;
        line = std::move(queue.front());
        queue.pop_front();
      }
      const std::string response = handle_request_line(line, *victim);
      std::lock_guard lock(out_mutex);
      out << response << '\n';
      out.flush();
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);

  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    {
      std::lock_guard lock(queue_mutex);
      queue.push_back(std::move(line));
    }
    ready.notify_one();
  }
  {
    std::lock_guard lock(queue_mutex);
    done = true;
  }
  ready.notify_all();
  for (auto& t : pool) t.join();
}

struct HttpVictimServer::Impl {
  VictimFactory factory;
  httplib::Server server;
};

HttpVictimServer::HttpVictimServer(VictimFactory factory) : impl_(std::make_unique<Impl>()) {
  impl_->factory = std::move(factory);
  impl_->server.Post("/generate", [this](const httplib::Request& req, httplib::Response& res) {
    std::string body = req.body;
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    const auto victim = impl_->factory();
    res.set_content(handle_request_line(body, *victim) + "\n", "application/json");
  });
}

HttpVictimServer::~HttpVictimServer() { stop(); }

int HttpVictimServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw TransportError("cannot bind HTTP victim server on " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw TransportError("cannot bind HTTP victim server on " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpVictimServer::listen() { impl_->server.listen_after_bind(); }

void HttpVictimServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace ctrlattack
