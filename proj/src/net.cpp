#include "nm/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace nm::net {

namespace {

[[noreturn]] void fail(Errc code, const std::string& what) {
  throw Error(code, what + ": " + std::strerror(errno));
}

void set_flag(int fd, int level, int opt) {
  int one = 1;
  if (::setsockopt(fd, level, opt, &one, sizeof one) != 0) fail(Errc::Io, "setsockopt");
}

sockaddr_in bind_addr(const std::string& host, std::uint16_t port) {
  return Endpoint{host.empty() ? "0.0.0.0" : host, port}.to_sockaddr();
}

}  // namespace

sockaddr_in Endpoint::to_sockaddr() const {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(port);
  if (::inet_pton(AF_INET, host == "localhost" ? "127.0.0.1" : host.c_str(), &sa.sin_addr) != 1)
    throw Error(Errc::BadConfig, "not an IPv4 address: " + host);
  return sa;
}

Endpoint Endpoint::from_sockaddr(const sockaddr_in& sa) {
  char buf[INET_ADDRSTRLEN];
  ::inet_ntop(AF_INET, &sa.sin_addr, buf, sizeof buf);
  return {buf, ntohs(sa.sin_port)};
}

Endpoint Endpoint::parse(std::string_view text, std::uint16_t default_port) {
  auto colon = text.rfind(':');
  Endpoint ep;
  ep.host = std::string(text.substr(0, colon));
  ep.port = default_port;
  if (colon != std::string_view::npos) {
    auto p = text.substr(colon + 1);
    unsigned long v = 0;
    if (p.empty() || p.size() > 5 || p.find_first_not_of("0123456789") != std::string_view::npos ||
        (v = std::stoul(std::string(p))) > 65535)
      throw Error(Errc::BadConfig, "bad port in '" + std::string(text) + "'");
    ep.port = static_cast<std::uint16_t>(v);
  }
  if (ep.host.empty()) throw Error(Errc::BadConfig, "missing host in '" + std::string(text) + "'");
  ep.to_sockaddr();
  return ep;
}

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.release();
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Socket::shutdown() const {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Endpoint Socket::local_endpoint() const {
  sockaddr_in sa{};
  socklen_t len = sizeof sa;
  if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len) != 0) fail(Errc::Io, "getsockname");
  return Endpoint::from_sockaddr(sa);
}

std::uint16_t Socket::local_port() const { return local_endpoint().port; }

Socket tcp_listen(const std::string& host, std::uint16_t port, int backlog) {
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) fail(Errc::Io, "socket");
  set_flag(s.fd(), SOL_SOCKET, SO_REUSEADDR);
  auto sa = bind_addr(host, port);
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0)
    fail(Errc::PortInUse, "bind tcp " + std::to_string(port));
  if (::listen(s.fd(), backlog) != 0) fail(Errc::Io, "listen");
  return s;
}

Socket tcp_connect(const Endpoint& peer, std::chrono::milliseconds timeout) {
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0));
  if (!s.valid()) fail(Errc::Io, "socket");
  auto sa = peer.to_sockaddr();
  if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
    if (errno != EINPROGRESS) fail(Errc::ConnectTimeout, "connect " + peer.str());
    pollfd p{s.fd(), POLLOUT, 0};
    int r = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (r == 0) throw Error(Errc::ConnectTimeout, "connect " + peer.str() + ": timed out");
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (r < 0 || err != 0) {
      errno = err ? err : errno;
      fail(Errc::ConnectTimeout, "connect " + peer.str());
    }
  }
  ::fcntl(s.fd(), F_SETFL, ::fcntl(s.fd(), F_GETFL) & ~O_NONBLOCK);
  set_flag(s.fd(), IPPROTO_TCP, TCP_NODELAY);
  return s;
}

std::optional<std::pair<Socket, Endpoint>> tcp_accept(const Socket& listener) {
  while (true) {
    sockaddr_in sa{};
    socklen_t len = sizeof sa;
    int fd = ::accept4(listener.fd(), reinterpret_cast<sockaddr*>(&sa), &len, SOCK_CLOEXEC);
    if (fd >= 0) {
      Socket s(fd);
      set_flag(fd, IPPROTO_TCP, TCP_NODELAY);
      return std::make_pair(std::move(s), Endpoint::from_sockaddr(sa));
    }
    if (errno == EINTR || errno == ECONNABORTED || errno == EMFILE || errno == ENFILE) continue;
    return std::nullopt;
  }
}

Socket udp_bind(const std::string& host, std::uint16_t port, bool reuse, bool broadcast) {
  Socket s(::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) fail(Errc::Io, "socket");
  if (reuse) set_flag(s.fd(), SOL_SOCKET, SO_REUSEADDR);
  if (broadcast) set_flag(s.fd(), SOL_SOCKET, SO_BROADCAST);
  auto sa = bind_addr(host, port);
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0)
    fail(Errc::PortInUse, "bind udp " + std::to_string(port));
  return s;
}

void send_all(const Socket& s, std::span<const std::uint8_t> bytes) {
  while (!bytes.empty()) {
    ssize_t n = ::send(s.fd(), bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(Errc::PeerClosed, "send");
    }
    bytes = bytes.subspan(static_cast<std::size_t>(n));
  }
}

void send_frame(const Socket& s, std::span<const std::uint8_t> payload) { send_all(s, make_frame(payload)); }

void send_to(const Socket& s, std::span<const std::uint8_t> bytes, const Endpoint& to) {
  auto sa = to.to_sockaddr();
  while (::sendto(s.fd(), bytes.data(), bytes.size(), 0, reinterpret_cast<sockaddr*>(&sa), sizeof sa) < 0) {
    if (errno != EINTR) fail(Errc::Io, "sendto " + to.str());
  }
}

bool wait_readable(const Socket& s, std::chrono::milliseconds timeout) {
  pollfd p{s.fd(), POLLIN, 0};
  while (true) {
    int r = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (r < 0 && errno == EINTR) continue;
    return r > 0;
  }
}

std::optional<Datagram> recv_from(const Socket& s, std::chrono::milliseconds timeout) {
  if (!wait_readable(s, timeout)) return std::nullopt;
  Datagram d;
  d.bytes.resize(65536);
  sockaddr_in sa{};
  socklen_t len = sizeof sa;
  ssize_t n = ::recvfrom(s.fd(), d.bytes.data(), d.bytes.size(), MSG_DONTWAIT, reinterpret_cast<sockaddr*>(&sa), &len);
  if (n < 0 || len == 0) return std::nullopt;
  d.bytes.resize(static_cast<std::size_t>(n));
  d.from = Endpoint::from_sockaddr(sa);
  return d;
}

std::string local_address_for(const std::string& target_host) {
  Socket s(::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) fail(Errc::Io, "socket");
  set_flag(s.fd(), SOL_SOCKET, SO_BROADCAST);
  auto sa = Endpoint{target_host, 9}.to_sockaddr();
  if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) return "127.0.0.1";
  auto host = s.local_endpoint().host;
  return host == "0.0.0.0" ? "127.0.0.1" : host;
}

std::size_t SocketStream::read_some(std::span<std::uint8_t> out) {
  while (true) {
    ssize_t n = ::recv(sock_.fd(), out.data(), out.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    if (errno == ECONNRESET || errno == EBADF || errno == ENOTCONN) return 0;
    fail(Errc::Io, "recv");
  }
}

}  // namespace nm::net
