#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "nm/agent.hpp"
#include "nm/mib_tree.hpp"
#include "nm/net.hpp"
#include "nm/security.hpp"
#include "nm/wire_protocol.hpp"

namespace nm {

enum class Transport { Tcp, Udp };

std::string_view transport_name(Transport t) noexcept;
std::optional<Transport> parse_transport(std::string_view s) noexcept;

using SystemClock = std::chrono::system_clock;

/// ISO-8601 UTC with microseconds, e.g. 2026-10-14T09:30:00.123456Z.
std::string iso8601(SystemClock::time_point t);

// ---- directory ----

struct AgentEntry {
  std::string host;
  std::uint16_t tcp_port = 0;
  std::uint16_t udp_port = 0;
  SystemClock::time_point first_seen{};
  SystemClock::time_point last_seen{};

  std::string key() const { return host + ":" + std::to_string(tcp_port); }
};

struct DirectoryChange {
  enum class Kind { Added, Refreshed, Removed };
  Kind kind = Kind::Added;
  AgentEntry entry;
};

std::string_view change_kind_name(DirectoryChange::Kind k) noexcept;

/// Agents keyed by (host, tcp_port). Readers run concurrently; mutations are
/// exclusive and recorded in the mutation log.
class AgentDirectory {
 public:
  using Listener = std::function<void(const DirectoryChange&)>;

  /// Returns true when the entry is new.
  bool upsert(const std::string& host, std::uint16_t tcp_port, std::uint16_t udp_port);
  /// Removes the matching entry; false when there was none.
  bool remove(const std::string& host, std::uint16_t tcp_port);

  std::vector<AgentEntry> entries() const;
  std::optional<AgentEntry> find(const std::string& host, std::uint16_t tcp_port) const;
  std::vector<DirectoryChange> mutation_log() const;

  std::size_t add_listener(Listener l);
  void remove_listener(std::size_t id);

 private:
  void notify(const DirectoryChange& c);

  mutable std::shared_mutex mu_;
  std::vector<AgentEntry> entries_;
  std::vector<DirectoryChange> log_;

  std::mutex listeners_mu_;
  std::map<std::size_t, Listener> listeners_;
  std::size_t next_listener_ = 1;
};

// ---- operation log ----

struct LogEntry {
  SystemClock::time_point timestamp{};
  std::string agent;
  MessageType type = MessageType::Get;
  std::string oid;
  std::string outcome;
  std::int64_t round_trip_us = 0;
};

/// timestamp, agent, type, oid, outcome, round_trip_us separated by tabs.
std::string format_log_line(const LogEntry& e);

/// Append-only; timestamps are kept monotone within a run. When a path is
/// given every entry is also appended to that file as one line.
class OperationLog {
 public:
  explicit OperationLog(std::string path = "");

  void append(LogEntry e);
  std::vector<LogEntry> tail(std::size_t n) const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::string path_;
  std::vector<LogEntry> entries_;
};

// ---- sessions ----

/// ERROR_RESPONSE from an agent. code() is DeniedByAgent for access
/// denials and AgentError otherwise; reason() carries the agent's code.
class AgentErrorResponse : public Error {
 public:
  AgentErrorResponse(Errc code, std::string reason, const std::string& detail)
      : Error(code, reason + ": " + detail), reason_(std::move(reason)) {}
  const std::string& reason() const { return reason_; }

 private:
  std::string reason_;
};

struct Result {
  MessageType request = MessageType::Get;
  std::vector<std::string> fields;  // decrypted
  std::int64_t round_trip_us = 0;
  bool was_encrypted = false;

  std::vector<LevelEntry> levels() const { return decode_level_listing(fields.at(0)); }
  const std::string& instance() const { return fields.at(0); }
  const std::string& value_type() const { return fields.at(1); }
  const std::string& value() const { return fields.at(2); }
};

struct SessionOptions {
  Transport transport = Transport::Tcp;
  std::string community = "public";
  bool secure = false;
  std::shared_ptr<const RsaKeyPair> key;
  std::shared_ptr<OperationLog> log;
  std::chrono::milliseconds timeout{1000};
  int udp_retries = 3;
  std::chrono::milliseconds connect_timeout{2000};
};

/// One manager-to-agent conversation. Requests on a session are serialized;
/// distinct sessions are independent.
class ManagerSession {
 public:
  using WireTap = std::function<void(bool outbound, std::span<const std::uint8_t> payload)>;

  /// Connects (TCP) or binds a local endpoint (UDP) and sends INITIALISE.
  /// Throws ConnectTimeout or DeniedByAgent.
  static std::shared_ptr<ManagerSession> open(const AgentEntry& agent, SessionOptions options,
                                              WireTap tap = nullptr);
  ~ManagerSession();

  /// Throws InvalidOid before transmission, Timeout, StoppedSession,
  /// DeniedByAgent or AgentError. Logs exactly one entry per call.
  Result request(MessageType type, const std::string& oid = "", const std::string& value = "");

  Result get(const std::string& oid) { return request(MessageType::Get, oid); }
  Result get_next(const std::string& oid) { return request(MessageType::GetNext, oid); }
  Result set(const std::string& oid, const std::string& value) { return request(MessageType::Set, oid, value); }
  Result describe(const std::string& oid) { return request(MessageType::Describe, oid); }
  std::vector<LevelEntry> next_level(const std::string& oid) { return request(MessageType::NextLevel, oid).levels(); }
  std::vector<LevelEntry> upper_level(const std::string& oid) { return request(MessageType::UpperLevel, oid).levels(); }

  /// Registers a threshold monitor; report_address is "host:port" or
  /// ":port" (the agent fills in this session's address). Returns the
  /// agent's subscription id.
  std::uint32_t subscribe_trap(const std::string& oid, double threshold, std::chrono::milliseconds period,
                               const std::string& report_address);

  /// Sends CONNECTION_RELEASE and closes the transport.
  void close();
  bool closed() const;

  void set_secure(bool on);
  bool secure() const;
  void set_community(const std::string& c);
  std::string community() const;
  /// Releases the current transport and reconnects over the other one.
  void set_transport(Transport t);
  Transport transport() const;

  const AgentEntry& agent() const { return agent_; }
  std::vector<LevelEntry> root_level() const;
  std::uint32_t last_correlation_id() const;

 private:
  ManagerSession(const AgentEntry& agent, SessionOptions options, WireTap tap);

  void connect_locked();
  Message exchange_locked(Message m);
  Message await_tcp(std::uint32_t corr, std::chrono::steady_clock::time_point deadline);
  Result request_locked(MessageType type, const std::string& oid, const std::string& value,
                        std::vector<std::string> extra = {});

  AgentEntry agent_;
  SessionOptions opt_;
  WireTap tap_;

  mutable std::mutex mu_;
  net::Socket sock_;
  std::vector<LevelEntry> root_level_;
  std::uint32_t next_corr_ = 1;
  bool closed_ = false;
};

// ---- polling ----

struct PollSample {
  SystemClock::time_point timestamp{};
  bool ok = false;
  std::string value;  // value, or the error text when !ok
};

/// Issues GET every period on a background thread. The period may be
/// changed while running and applies from the next tick.
class PollTask {
 public:
  using Sink = std::function<void(const PollSample&)>;

  /// Throws StoppedSession when the session is already closed.
  PollTask(std::shared_ptr<ManagerSession> session, std::string oid, std::chrono::milliseconds period, Sink sink);
  ~PollTask();

  void set_period(std::chrono::milliseconds period);
  std::chrono::milliseconds period() const;
  void stop();
  const std::string& oid() const { return oid_; }

 private:
  void run();

  std::shared_ptr<ManagerSession> session_;
  std::string oid_;
  Sink sink_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::chrono::milliseconds period_;
  bool stop_ = false;
  std::thread thread_;
};

// ---- traps ----

struct TrapEvent {
  std::uint32_t subscription_id = 0;
  std::string instance;
  std::string value;
  std::string threshold;
  std::int64_t agent_unix_ms = 0;
  SystemClock::time_point received{};
  net::Endpoint from;
};

/// UDP listener for EVENT_REPORTs. Reports are routed by subscription id and
/// sending host; reports arriving before their registration are held briefly.
class TrapReceiver {
 public:
  using Sink = std::function<void(const TrapEvent&)>;

  explicit TrapReceiver(std::uint16_t port = 0, const std::string& host = "0.0.0.0");
  ~TrapReceiver();

  std::uint16_t port() const { return port_; }
  void add(std::uint32_t subscription_id, const std::string& agent_host, Sink sink);
  void remove(std::uint32_t subscription_id);

 private:
  void run();

  net::Socket sock_;
  std::uint16_t port_ = 0;
  std::atomic<bool> stop_{false};
  std::mutex mu_;
  std::multimap<std::uint32_t, std::pair<std::string, Sink>> sinks_;
  std::deque<TrapEvent> pending_;
  std::thread thread_;
};

// ---- manager ----

struct ManagerConfig {
  std::string community = "public";
  std::shared_ptr<const RsaKeyPair> key;
  std::string log_path;
  std::uint16_t discovery_port = kDefaultDiscoveryPort;
  std::uint16_t announce_port = kDefaultAnnouncePort;
  std::chrono::milliseconds request_timeout{1000};
  int udp_retries = 3;
  std::chrono::milliseconds connect_timeout{2000};
};

class Manager {
 public:
  explicit Manager(ManagerConfig config = {});
  ~Manager();

  /// Broadcasts a DISCOVERY_PROBE and collects replies until the timeout.
  /// Also starts the announce listener once.
  std::vector<AgentEntry> discover(const std::string& broadcast_address = "255.255.255.255",
                                   std::chrono::milliseconds timeout = std::chrono::milliseconds(2000),
                                   std::optional<std::string> community = std::nullopt);

  /// Applies AGENT_ANNOUNCE and AGENT_FAREWELL to the directory. Idempotent.
  void start_listener();
  std::uint16_t listener_port() const;

  std::shared_ptr<ManagerSession> open_session(const AgentEntry& agent, Transport transport,
                                               std::optional<std::string> community = std::nullopt,
                                               bool secure = false, ManagerSession::WireTap tap = nullptr);

  std::unique_ptr<PollTask> start_poll(std::shared_ptr<ManagerSession> session, const std::string& oid,
                                       std::chrono::milliseconds period, PollTask::Sink sink);

  /// Binds (or reuses) a receiver on report_port (0: any free port) and
  /// subscribes. Events surface on sink.
  std::uint32_t subscribe_trap(ManagerSession& session, const std::string& oid, double threshold,
                               std::chrono::milliseconds period, std::uint16_t report_port, TrapReceiver::Sink sink,
                               std::uint16_t* bound_port = nullptr);

  AgentDirectory& directory() { return directory_; }
  std::shared_ptr<OperationLog> log() const { return log_; }
  const ManagerConfig& config() const { return config_; }
  SessionOptions session_options(Transport transport, std::optional<std::string> community, bool secure) const;

 private:
  void listen_loop();

  ManagerConfig config_;
  AgentDirectory directory_;
  std::shared_ptr<OperationLog> log_;

  mutable std::mutex listener_mu_;
  net::Socket listener_sock_;
  std::thread listener_thread_;
  std::atomic<bool> stopping_{false};

  std::mutex traps_mu_;
  std::map<std::uint16_t, std::unique_ptr<TrapReceiver>> receivers_;
};

// ---- bench ----

struct BenchCell {
  MessageType type = MessageType::Get;
  std::string group;  // "system" or "other"
  bool secure = false;
  Transport transport = Transport::Tcp;
  bool available = false;
  std::size_t samples = 0;
  double mean_us = 0;
  double median_us = 0;
  double p95_us = 0;
};

struct BenchReport {
  std::vector<BenchCell> cells;

  bool any_available() const;
  /// Aligned table.
  std::string text() const;
  /// bench\t<type>\t<group>\t<secure>\t<transport>\t<n>\t<mean>\t<median>\t<p95>
  std::vector<std::string> machine_lines() const;
};

struct BenchConfig {
  std::size_t samples = 30;
  std::size_t warmup = 5;
  std::optional<std::string> community;
  std::vector<std::string> system_oids;  // empty: found by walking mib-2
  std::vector<std::string> other_oids;
  std::size_t max_consecutive_timeouts = 10;
};

struct BenchStats {
  double mean = 0, median = 0, p95 = 0;
};
/// Mean, median and nearest-rank 95th percentile.
BenchStats bench_stats(std::vector<double> samples);

/// GET on system-group and other objects x security off/on x TCP/UDP.
BenchReport run_bench(Manager& manager, const std::optional<AgentEntry>& agent, const BenchConfig& config);

}  // namespace nm
