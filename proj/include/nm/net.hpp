#pragma once

#include <netinet/in.h>

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nm/wire_protocol.hpp"

namespace nm::net {

/// IPv4 host and port.
struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  sockaddr_in to_sockaddr() const;
  static Endpoint from_sockaddr(const sockaddr_in& sa);
  /// "host:port"; throws BadConfig on a malformed string.
  static Endpoint parse(std::string_view text, std::uint16_t default_port = 0);
  std::string str() const { return host + ":" + std::to_string(port); }

  bool operator==(const Endpoint&) const = default;
  auto operator<=>(const Endpoint&) const = default;
};

/// Owning file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(o.release()) {}
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release() {
    int f = fd_;
    fd_ = -1;
    return f;
  }
  void close();
  /// Wakes any thread blocked on this socket without releasing the fd.
  void shutdown() const;

  std::uint16_t local_port() const;
  Endpoint local_endpoint() const;

 private:
  int fd_ = -1;
};

/// Throws PortInUse when the port cannot be bound.
Socket tcp_listen(const std::string& host, std::uint16_t port, int backlog = 64);
/// Throws ConnectTimeout when the peer does not accept within the timeout.
Socket tcp_connect(const Endpoint& peer, std::chrono::milliseconds timeout);
/// Returns an invalid socket when the listener is shut down.
std::optional<std::pair<Socket, Endpoint>> tcp_accept(const Socket& listener);

/// reuse allows several sockets on one port (shared discovery port);
/// broadcast enables sending to broadcast addresses.
Socket udp_bind(const std::string& host, std::uint16_t port, bool reuse = false, bool broadcast = false);

void send_all(const Socket& s, std::span<const std::uint8_t> bytes);
void send_frame(const Socket& s, std::span<const std::uint8_t> payload);
void send_to(const Socket& s, std::span<const std::uint8_t> bytes, const Endpoint& to);

struct Datagram {
  std::vector<std::uint8_t> bytes;
  Endpoint from;
};

/// Waits up to timeout; nullopt on timeout or shutdown.
std::optional<Datagram> recv_from(const Socket& s, std::chrono::milliseconds timeout);
bool wait_readable(const Socket& s, std::chrono::milliseconds timeout);

/// The local address the kernel would use to reach target.
std::string local_address_for(const std::string& target_host);

class SocketStream final : public ByteStream {
 public:
  explicit SocketStream(const Socket& s) : sock_(s) {}
  std::size_t read_some(std::span<std::uint8_t> out) override;

 private:
  const Socket& sock_;
};

}  // namespace nm::net
