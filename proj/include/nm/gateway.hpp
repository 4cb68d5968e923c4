#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "json.hpp"
#include "nm/manager.hpp"

namespace httplib {
class Server;
}

namespace nm {

struct GatewayConfig {
  std::string bind_address = "127.0.0.1";
  std::uint16_t port = 8080;  // 0: any free port
  std::string broadcast_address = "255.255.255.255";
  std::chrono::milliseconds discovery_timeout{2000};
  ManagerConfig manager;
};

/// Fan-out of JSON events to server-push subscribers. Each subscriber has a
/// bounded queue; the oldest events are dropped when a reader falls behind.
class EventHub {
 public:
  static constexpr std::size_t kQueueLimit = 1024;

  std::uint64_t subscribe();
  void unsubscribe(std::uint64_t id);
  void publish(const std::string& event, nlohmann::json data);
  /// Waits up to timeout; returns false once the hub is closed.
  bool next(std::uint64_t id, std::chrono::milliseconds timeout, std::vector<std::string>& out);
  std::size_t subscriber_count() const;
  void close();

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::uint64_t, std::deque<std::string>> queues_;
  std::uint64_t next_id_ = 1;
  std::uint64_t sequence_ = 0;
  bool closed_ = false;
};

/// HTTP front-end over a Manager. Routes:
///   GET /agents, POST /discover, POST /sessions, DELETE /sessions/{id},
///   GET /sessions/{id}/level?oid=, GET /sessions/{id}/upper?oid=,
///   POST /sessions/{id}/request, PUT /sessions/{id}/settings,
///   POST /sessions/{id}/polls, PUT /polls/{pid}, DELETE /polls/{pid},
///   POST /sessions/{id}/traps, GET /events, GET /log?tail=N
class Gateway {
 public:
  explicit Gateway(GatewayConfig config);
  ~Gateway();

  /// Binds and serves on a background thread. Throws PortInUse.
  void start();
  void stop();
  std::uint16_t port() const { return port_; }

  Manager& manager() { return *manager_; }
  EventHub& events() { return hub_; }
  std::size_t session_count() const;

 private:
  struct SessionSlot {
    std::shared_ptr<ManagerSession> session;
    std::vector<std::string> polls;
  };

  void install_routes();
  std::shared_ptr<ManagerSession> session(const std::string& id) const;

  GatewayConfig config_;
  std::unique_ptr<Manager> manager_;
  std::unique_ptr<httplib::Server> server_;
  EventHub hub_;
  std::thread thread_;
  std::uint16_t port_ = 0;
  std::size_t directory_listener_ = 0;

  mutable std::mutex mu_;
  std::map<std::string, SessionSlot> sessions_;
  std::map<std::string, std::unique_ptr<PollTask>> polls_;
};

/// 128-bit random identifier as 32 hex digits.
std::string random_id();

}  // namespace nm
