#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "nm/device.hpp"
#include "nm/mib_tree.hpp"
#include "nm/net.hpp"
#include "nm/raf_store.hpp"
#include "nm/security.hpp"
#include "nm/wire_protocol.hpp"

namespace nm {

inline constexpr std::uint16_t kDefaultTcpPort = 7770;
inline constexpr std::uint16_t kDefaultUdpPort = 7771;
inline constexpr std::uint16_t kDefaultDiscoveryPort = 7772;
inline constexpr std::uint16_t kDefaultAnnouncePort = 7773;

struct AgentConfig {
  std::string raf_path;
  std::string bind_address = "0.0.0.0";
  std::string advertise_address;  // empty: the address facing each peer
  std::uint16_t tcp_port = kDefaultTcpPort;
  std::uint16_t udp_port = kDefaultUdpPort;
  std::uint16_t discovery_port = kDefaultDiscoveryPort;
  std::string community = "public";
  std::optional<RsaPublicKey> public_key;
  bool require_security = false;  // reject requests without a valid signature
  std::string device_state_path;
  std::vector<net::Endpoint> announce_targets;
  std::size_t max_sessions = 64;
  std::chrono::milliseconds udp_idle_expiry{60000};

  /// Throws BadConfig. Port 0 means "any free port".
  void validate() const;

  /// key=value lines: raf, bind, advertise, tcp_port, udp_port,
  /// discovery_port, community, key_file, security (off|required),
  /// device_state, announce (comma-separated host:port), max_sessions,
  /// udp_idle_ms. Relative paths resolve against base_dir.
  static AgentConfig parse(std::string_view text, const std::string& base_dir = "");
  static AgentConfig load(const std::string& path);
};

struct AuthResult {
  bool accepted = false;
  std::string reason;  // "community" or "signature" on denial
  bool verified = false;
};

/// Community first, then the signature when SIGNED is set (or required).
AuthResult authenticate_request(const Message& m, const AgentConfig& config, bool security_enabled);

struct TrapSubscription {
  std::uint64_t id = 0;
  Oid instance;
  double threshold = 0;
  std::chrono::milliseconds period{1000};
  net::Endpoint report_to;
  bool last_sample_above = false;
  std::chrono::steady_clock::time_point next_due{};
};

struct TrapReport {
  net::Endpoint to;
  Message message;
};

/// Samples every due subscription once. A report is produced on each
/// transition from not-above to above the threshold.
std::vector<TrapReport> trap_monitor_tick(std::vector<TrapSubscription>& subs, DeviceStateProvider& provider,
                                          std::chrono::steady_clock::time_point now, std::int64_t unix_ms,
                                          std::uint64_t* read_failures = nullptr);

struct AgentStats {
  std::atomic<std::uint64_t> requests{0};
  std::atomic<std::uint64_t> denied_community{0};
  std::atomic<std::uint64_t> denied_signature{0};
  std::atomic<std::uint64_t> dispatched{0};
  std::atomic<std::uint64_t> dispatched_unverified{0};  // must stay 0 while security is required
  std::atomic<std::uint64_t> error_responses{0};
  std::atomic<std::uint64_t> sessions_opened{0};
  std::atomic<std::uint64_t> sessions_active{0};
  std::atomic<std::uint64_t> busy_rejections{0};
  std::atomic<std::uint64_t> trap_reports{0};
  std::atomic<std::uint64_t> trap_read_failures{0};
  std::atomic<std::uint64_t> discovery_replies{0};
};

/// Per-session state: a private RAF handle and the peer's address.
struct SessionContext {
  net::Endpoint peer;
  std::unique_ptr<ByteSource> raf;
  std::unique_ptr<RafReader> reader;
  bool released = false;
};

/// Request processing shared by all sessions. The tree is immutable; the
/// provider and subscription list carry their own locks.
class AgentCore {
 public:
  using RafOpener = std::function<std::unique_ptr<ByteSource>()>;

  AgentCore(AgentConfig config, MibTree tree, RafOpener open_raf, std::shared_ptr<DeviceStateProvider> provider);

  /// Loads RAF, key and device state named by the config. Throws
  /// CorruptImage (RAF), BadKeyFile or BadConfig.
  static std::unique_ptr<AgentCore> from_config(const AgentConfig& config);

  /// Authenticates and dispatches; always returns exactly one response.
  Message process(SessionContext& ctx, const Message& request);

  /// Dispatch without authentication.
  Message handle_request(SessionContext& ctx, const Message& request, bool verified);

  std::vector<TrapReport> tick(std::chrono::steady_clock::time_point now, std::int64_t unix_ms);
  std::optional<std::chrono::steady_clock::time_point> next_trap_due() const;
  std::size_t subscription_count() const;

  const AgentConfig& config() const { return config_; }
  const MibTree& tree() const { return tree_; }
  DeviceStateProvider& provider() { return *provider_; }
  AgentStats& stats() { return stats_; }

  static Message error_response(std::uint32_t correlation, const std::string& reason, const std::string& detail);

 private:
  RafReader& reader(SessionContext& ctx);
  Message dispatch(SessionContext& ctx, const Message& request, std::size_t nfields);
  Message value_response(const Message& request, const Oid& instance, const TypedValue& v);
  Oid instance_of(const Resolution& r) const;

  AgentConfig config_;
  MibTree tree_;
  RafOpener open_raf_;
  std::shared_ptr<DeviceStateProvider> provider_;
  AgentStats stats_;

  mutable std::mutex traps_mu_;
  std::vector<TrapSubscription> subs_;
  std::uint64_t next_sub_id_ = 1;
};

/// The daemon: TCP acceptor with one worker per connection, UDP dispatcher
/// with one worker per peer, discovery responder and trap monitor.
class Agent {
 public:
  explicit Agent(std::unique_ptr<AgentCore> core);
  explicit Agent(const AgentConfig& config) : Agent(AgentCore::from_config(config)) {}
  ~Agent();

  /// Binds all ports and starts the activities, then announces. Throws
  /// PortInUse.
  void start();
  /// Sends the farewell, stops every activity and joins all threads.
  void stop();
  bool running() const { return running_; }

  std::uint16_t tcp_port() const { return tcp_port_; }
  std::uint16_t udp_port() const { return udp_port_; }
  std::uint16_t discovery_port() const { return discovery_port_; }
  AgentCore& core() { return *core_; }
  AgentStats& stats() { return core_->stats(); }

 private:
  struct TcpWorker;
  struct UdpWorker;

  void accept_loop();
  void tcp_session(TcpWorker& w);
  void udp_loop();
  void udp_session(std::shared_ptr<UdpWorker> w);
  void discovery_loop();
  void trap_loop();
  void announce(MessageType type);
  std::string address_for(const std::string& peer_host) const;
  void reap_tcp();

  std::unique_ptr<AgentCore> core_;
  std::atomic<bool> running_{false};
  std::atomic<bool> stopping_{false};

  net::Socket tcp_listener_, udp_sock_, discovery_sock_, trap_sock_;
  std::uint16_t tcp_port_ = 0, udp_port_ = 0, discovery_port_ = 0;
  std::thread acceptor_, udp_thread_, discovery_thread_, trap_thread_;

  std::mutex tcp_mu_;
  std::list<std::unique_ptr<TcpWorker>> tcp_workers_;

  std::mutex udp_mu_;
  std::map<net::Endpoint, std::shared_ptr<UdpWorker>> udp_workers_;
  std::vector<std::shared_ptr<UdpWorker>> udp_finished_;

  std::mutex trap_mu_;
  std::condition_variable trap_cv_;
};

}  // namespace nm
