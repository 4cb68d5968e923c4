#include "nm/manager.hpp"

#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

namespace nm {

namespace {

using Steady = std::chrono::steady_clock;

std::int64_t micros_since(Steady::time_point t0) {
  return std::chrono::duration_cast<std::chrono::microseconds>(Steady::now() - t0).count();
}

std::uint16_t to_port(const std::string& s) {
  unsigned long v = 0;
  try {
    std::size_t used = 0;
    v = std::stoul(s, &used);
    if (used != s.size() || v > 65535) throw Error(Errc::ProtocolError, "bad port '" + s + "'");
  } catch (const std::logic_error&) {
    throw Error(Errc::ProtocolError, "bad port '" + s + "'");
  }
  return static_cast<std::uint16_t>(v);
}

std::uint32_t random_u32() {
  static thread_local std::mt19937 rng{std::random_device{}()};
  return std::uniform_int_distribution<std::uint32_t>(1, 0x7FFFFFFF)(rng);
}

// Reads from a socket, giving up at a deadline.
class DeadlineStream final : public ByteStream {
 public:
  DeadlineStream(const net::Socket& s, Steady::time_point deadline) : sock_(s), deadline_(deadline), inner_(s) {}
  std::size_t read_some(std::span<std::uint8_t> out) override {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline_ - Steady::now());
    if (left.count() < 0 || !net::wait_readable(sock_, left)) throw Error(Errc::Timeout, "no response before timeout");
    return inner_.read_some(out);
  }

 private:
  const net::Socket& sock_;
  Steady::time_point deadline_;
  net::SocketStream inner_;
};

bool needs_oid(MessageType t) { return t != MessageType::Initialise && t != MessageType::ConnectionRelease; }

}  // namespace

std::string_view transport_name(Transport t) noexcept { return t == Transport::Tcp ? "tcp" : "udp"; }

std::optional<Transport> parse_transport(std::string_view s) noexcept {
  if (s == "tcp" || s == "TCP") return Transport::Tcp;
  if (s == "udp" || s == "UDP") return Transport::Udp;
  return std::nullopt;
}

std::string iso8601(SystemClock::time_point t) {
  using namespace std::chrono;
  auto us = duration_cast<microseconds>(t.time_since_epoch()).count();
  std::time_t secs = static_cast<std::time_t>(us / 1000000);
  long frac = static_cast<long>(us % 1000000);
  if (frac < 0) {
    frac += 1000000;
    --secs;
  }
  std::tm tm{};
  ::gmtime_r(&secs, &tm);
  char buf[48];
  std::size_t n = std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  std::snprintf(buf + n, sizeof buf - n, ".%06ldZ", frac);
  return buf;
}

// ---- directory ----

std::string_view change_kind_name(DirectoryChange::Kind k) noexcept {
  switch (k) {
    case DirectoryChange::Kind::Added: return "added";
    case DirectoryChange::Kind::Refreshed: return "refreshed";
    case DirectoryChange::Kind::Removed: return "removed";
  }
  return "?";
}

bool AgentDirectory::upsert(const std::string& host, std::uint16_t tcp_port, std::uint16_t udp_port) {
  DirectoryChange change;
  {
    std::unique_lock lock(mu_);
    auto now = SystemClock::now();
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [&](const AgentEntry& e) { return e.host == host && e.tcp_port == tcp_port; });
    if (it == entries_.end()) {
      entries_.push_back({host, tcp_port, udp_port, now, now});
      change = {DirectoryChange::Kind::Added, entries_.back()};
    } else {
      it->udp_port = udp_port;
      it->last_seen = now;
      change = {DirectoryChange::Kind::Refreshed, *it};
    }
    log_.push_back(change);
  }
  notify(change);
  return change.kind == DirectoryChange::Kind::Added;
}

bool AgentDirectory::remove(const std::string& host, std::uint16_t tcp_port) {
  DirectoryChange change{DirectoryChange::Kind::Removed, {}};
  {
    std::unique_lock lock(mu_);
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [&](const AgentEntry& e) { return e.host == host && e.tcp_port == tcp_port; });
    if (it == entries_.end()) return false;
    change.entry = *it;
    entries_.erase(it);
    log_.push_back(change);
  }
  notify(change);
  return true;
}

std::vector<AgentEntry> AgentDirectory::entries() const {
  std::shared_lock lock(mu_);
  return entries_;
}

std::optional<AgentEntry> AgentDirectory::find(const std::string& host, std::uint16_t tcp_port) const {
  std::shared_lock lock(mu_);
  for (const auto& e : entries_)
    if (e.host == host && e.tcp_port == tcp_port) return e;
  return std::nullopt;
}

std::vector<DirectoryChange> AgentDirectory::mutation_log() const {
  std::shared_lock lock(mu_);
  return log_;
}

std::size_t AgentDirectory::add_listener(Listener l) {
  std::lock_guard lock(listeners_mu_);
  listeners_[next_listener_] = std::move(l);
  return next_listener_++;
}

void AgentDirectory::remove_listener(std::size_t id) {
  std::lock_guard lock(listeners_mu_);
  listeners_.erase(id);
}

void AgentDirectory::notify(const DirectoryChange& c) {
  std::lock_guard lock(listeners_mu_);
  for (auto& [id, l] : listeners_) l(c);
}

// ---- log ----

std::string format_log_line(const LogEntry& e) {
  return iso8601(e.timestamp) + "\t" + e.agent + "\t" + std::string(message_type_name(e.type)) + "\t" + e.oid + "\t" +
         e.outcome + "\t" + std::to_string(e.round_trip_us);
}

OperationLog::OperationLog(std::string path) : path_(std::move(path)) {}

void OperationLog::append(LogEntry e) {
  std::lock_guard lock(mu_);
  if (!entries_.empty() && e.timestamp < entries_.back().timestamp) e.timestamp = entries_.back().timestamp;
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    out << format_log_line(e) << "\n";
  }
  entries_.push_back(std::move(e));
}

std::vector<LogEntry> OperationLog::tail(std::size_t n) const {
  std::lock_guard lock(mu_);
  auto first = entries_.size() > n ? entries_.end() - static_cast<std::ptrdiff_t>(n) : entries_.begin();
  return {first, entries_.end()};
}

std::size_t OperationLog::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// ---- session ----

ManagerSession::ManagerSession(const AgentEntry& agent, SessionOptions options, WireTap tap)
    : agent_(agent), opt_(std::move(options)), tap_(std::move(tap)) {
  if (!opt_.log) opt_.log = std::make_shared<OperationLog>();
}

std::shared_ptr<ManagerSession> ManagerSession::open(const AgentEntry& agent, SessionOptions options, WireTap tap) {
  std::shared_ptr<ManagerSession> s(new ManagerSession(agent, std::move(options), std::move(tap)));
  std::lock_guard lock(s->mu_);
  s->connect_locked();
  try {
    s->root_level_ = s->request_locked(MessageType::Initialise, "", "").levels();
  } catch (const Error& e) {
    s->sock_.close();
    s->closed_ = true;
    if (e.code() == Errc::Timeout || e.code() == Errc::PeerClosed || e.code() == Errc::Truncated)
      throw Error(Errc::ConnectTimeout, std::string("no INITIALISE response: ") + e.what());
    throw;
  }
  return s;
}

ManagerSession::~ManagerSession() {
  std::lock_guard lock(mu_);
  if (closed_ || !sock_.valid()) return;
  // Best effort: tell the agent without waiting for the acknowledgement.
  try {
    Message m{MessageType::ConnectionRelease, 0, next_corr_++, {opt_.community}};
    auto bytes = encode_message(m);
    if (opt_.transport == Transport::Tcp)
      net::send_frame(sock_, bytes);
    else
      net::send_to(sock_, bytes, {agent_.host, agent_.udp_port});
  } catch (const Error&) {
  }
}

void ManagerSession::connect_locked() {
  if (opt_.transport == Transport::Tcp)
    sock_ = net::tcp_connect({agent_.host, agent_.tcp_port}, opt_.connect_timeout);
  else
    sock_ = net::udp_bind("0.0.0.0", 0);
}

Message ManagerSession::await_tcp(std::uint32_t corr, Steady::time_point deadline) {
  DeadlineStream in(sock_, deadline);
  while (true) {
    auto payload = read_frame(in);
    if (tap_) tap_(false, payload);
    Message m;
    try {
      m = decode_message(payload);
    } catch (const DecodeError& e) {
      throw Error(Errc::ProtocolError, e.what());
    }
    // uncorrelated errors (busy, undecodable request) come back with id 0
    if (m.correlation_id == corr || (m.correlation_id == 0 && m.type == MessageType::ErrorResponse)) return m;
  }
}

Message ManagerSession::exchange_locked(Message m) {
  auto bytes = encode_message(m);
  if (opt_.transport == Transport::Tcp) {
    try {
      if (!sock_.valid()) connect_locked();
      if (tap_) tap_(true, bytes);
      net::send_frame(sock_, bytes);
      return await_tcp(m.correlation_id, Steady::now() + opt_.timeout);
    } catch (const Error&) {
      // the stream position is unknown after a failure; reconnect next time
      sock_.close();
      throw;
    }
  }
  if (bytes.size() > kMaxUdpPayload) throw Error(Errc::FieldTooLong, "request exceeds the datagram limit");
  net::Endpoint peer{agent_.host, agent_.udp_port};
  for (int attempt = 0; attempt <= opt_.udp_retries; ++attempt) {
    if (tap_) tap_(true, bytes);
    net::send_to(sock_, bytes, peer);
    auto deadline = Steady::now() + opt_.timeout;
    while (true) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Steady::now());
      if (left.count() <= 0) break;
      auto d = net::recv_from(sock_, left);
      if (!d) break;
      if (d->from.port != peer.port) continue;
      if (tap_) tap_(false, d->bytes);
      try {
        auto resp = decode_message(d->bytes);
        if (resp.correlation_id == m.correlation_id) return resp;
      } catch (const DecodeError&) {
      }
    }
  }
  throw Error(Errc::Timeout, "no response after " + std::to_string(opt_.udp_retries + 1) + " attempts");
}

Result ManagerSession::request_locked(MessageType type, const std::string& oid, const std::string& value,
                                      std::vector<std::string> extra) {
  LogEntry entry;
  entry.timestamp = SystemClock::now();
  entry.agent = agent_.key();
  entry.type = type;
  entry.oid = oid;
  auto t0 = Steady::now();
  auto finish = [&](std::string outcome) {
    entry.outcome = std::move(outcome);
    entry.round_trip_us = micros_since(t0);
    opt_.log->append(entry);
  };
  try {
    if (closed_) throw Error(Errc::StoppedSession, "session is closed");
    Message m{type, 0, next_corr_++, {opt_.community}};
    if (needs_oid(type)) {
      if (!OidPath::valid(oid)) throw Error(Errc::InvalidOid, "invalid OID '" + oid + "'");
      m.fields.push_back(oid);
    }
    if (type == MessageType::Set) m.fields.push_back(value);
    for (auto& f : extra) m.fields.push_back(std::move(f));
    if (opt_.secure) {
      if (!opt_.key || !opt_.key->has_private())
        throw Error(Errc::MissingPrivateExponent, "secure mode needs a private key");
      m.flags = flags::kEncrypted;
      auto sig = sign(signed_span(m), *opt_.key);
      m.flags |= flags::kSigned;
      m.fields.push_back(to_string(sig));
    }
    auto resp = exchange_locked(std::move(m));
    std::int64_t rtt = micros_since(t0);
    if (resp.type == MessageType::ErrorResponse) {
      std::string reason = resp.fields.size() > 0 ? resp.fields[0] : "unknown";
      std::string detail = resp.fields.size() > 1 ? resp.fields[1] : "";
      throw AgentErrorResponse(reason == "AccessDenied" ? Errc::DeniedByAgent : Errc::AgentError, reason, detail);
    }
    if (resp.type != MessageType::Response) throw Error(Errc::ProtocolError, "unexpected response type");
    Result r{type, std::move(resp.fields), rtt, resp.has_flag(flags::kEncrypted)};
    if (r.was_encrypted) {
      if (!opt_.key || !opt_.key->has_private()) throw Error(Errc::ProtocolError, "encrypted response without a key");
      for (auto& f : r.fields) f = to_string(decrypt(as_bytes(f), *opt_.key));
    }
    r.round_trip_us = micros_since(t0);
    finish("ok");
    return r;
  } catch (const AgentErrorResponse& e) {
    finish("AgentError:" + e.reason());
    throw;
  } catch (const Error& e) {
    finish(std::string(errc_name(e.code())));
    throw;
  }
}

Result ManagerSession::request(MessageType type, const std::string& oid, const std::string& value) {
  if (!is_request_type(type) || type == MessageType::SubscribeTrap || type == MessageType::DiscoveryProbe)
    throw Error(Errc::BadRequest, "not a session request type");
  std::lock_guard lock(mu_);
  auto r = request_locked(type, oid, value);
  if (type == MessageType::ConnectionRelease) {
    sock_.close();
    closed_ = true;
  }
  return r;
}

std::uint32_t ManagerSession::subscribe_trap(const std::string& oid, double threshold,
                                             std::chrono::milliseconds period, const std::string& report_address) {
  std::lock_guard lock(mu_);
  std::ostringstream th;
  th.precision(17);
  th << threshold;
  auto r = request_locked(MessageType::SubscribeTrap, oid, "",
                          {th.str(), std::to_string(period.count()), report_address});
  try {
    return static_cast<std::uint32_t>(std::stoul(r.fields.at(0)));
  } catch (const std::exception&) {
    throw Error(Errc::ProtocolError, "bad subscription id");
  }
}

void ManagerSession::close() {
  std::lock_guard lock(mu_);
  if (closed_) return;
  try {
    request_locked(MessageType::ConnectionRelease, "", "");
  } catch (const Error&) {
  }
  sock_.close();
  closed_ = true;
}

bool ManagerSession::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

void ManagerSession::set_secure(bool on) {
  std::lock_guard lock(mu_);
  opt_.secure = on;
}

bool ManagerSession::secure() const {
  std::lock_guard lock(mu_);
  return opt_.secure;
}

void ManagerSession::set_community(const std::string& c) {
  std::lock_guard lock(mu_);
  opt_.community = c;
}

std::string ManagerSession::community() const {
  std::lock_guard lock(mu_);
  return opt_.community;
}

void ManagerSession::set_transport(Transport t) {
  std::lock_guard lock(mu_);
  if (closed_) throw Error(Errc::StoppedSession, "session is closed");
  if (t == opt_.transport) return;
  try {
    request_locked(MessageType::ConnectionRelease, "", "");
  } catch (const Error&) {
  }
  sock_.close();
  opt_.transport = t;
  connect_locked();
  root_level_ = request_locked(MessageType::Initialise, "", "").levels();
}

Transport ManagerSession::transport() const {
  std::lock_guard lock(mu_);
  return opt_.transport;
}

std::vector<LevelEntry> ManagerSession::root_level() const {
  std::lock_guard lock(mu_);
  return root_level_;
}

std::uint32_t ManagerSession::last_correlation_id() const {
  std::lock_guard lock(mu_);
  return next_corr_ - 1;
}

// ---- polling ----

PollTask::PollTask(std::shared_ptr<ManagerSession> session, std::string oid, std::chrono::milliseconds period,
                   Sink sink)
    : session_(std::move(session)), oid_(std::move(oid)), sink_(std::move(sink)), period_(period) {
  if (!session_ || session_->closed()) throw Error(Errc::StoppedSession, "session is closed");
  if (period < std::chrono::milliseconds(100)) throw Error(Errc::BadConfig, "poll period must be >= 100 ms");
  if (!OidPath::valid(oid_)) throw Error(Errc::InvalidOid, "invalid OID '" + oid_ + "'");
  thread_ = std::thread(&PollTask::run, this);
}

PollTask::~PollTask() { stop(); }

void PollTask::set_period(std::chrono::milliseconds period) {
  if (period < std::chrono::milliseconds(100)) throw Error(Errc::BadConfig, "poll period must be >= 100 ms");
  std::lock_guard lock(mu_);
  period_ = period;
  cv_.notify_all();
}

std::chrono::milliseconds PollTask::period() const {
  std::lock_guard lock(mu_);
  return period_;
}

void PollTask::stop() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
    cv_.notify_all();
  }
  if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) thread_.join();
}

void PollTask::run() {
  auto tick = Steady::now();
  while (true) {
    PollSample s;
    s.timestamp = SystemClock::now();
    bool ended = false;
    try {
      s.value = session_->get(oid_).value();
      s.ok = true;
    } catch (const Error& e) {
      s.value = e.what();
      ended = e.code() == Errc::StoppedSession;
    }
    if (sink_) sink_(s);
    std::unique_lock lk(mu_);
    if (ended) stop_ = true;
    while (!stop_ && Steady::now() < tick + period_) cv_.wait_until(lk, tick + period_);
    if (stop_) break;
    auto due = tick + period_;
    tick = Steady::now() - due > period_ ? Steady::now() : due;
  }
}

// ---- traps ----

TrapReceiver::TrapReceiver(std::uint16_t port, const std::string& host) : sock_(net::udp_bind(host, port)) {
  port_ = sock_.local_port();
  thread_ = std::thread(&TrapReceiver::run, this);
}

TrapReceiver::~TrapReceiver() {
  stop_ = true;
  sock_.shutdown();
  if (thread_.joinable()) thread_.join();
}

void TrapReceiver::add(std::uint32_t subscription_id, const std::string& host, Sink sink) {
  std::lock_guard lock(mu_);
  // Reports that raced ahead of the registration are replayed first.
  for (auto it = pending_.begin(); it != pending_.end();) {
    if (it->subscription_id == subscription_id && (host.empty() || it->from.host == host)) {
      sink(*it);
      it = pending_.erase(it);
    } else {
      ++it;
    }
  }
  sinks_.emplace(subscription_id, std::make_pair(host, std::move(sink)));
}

void TrapReceiver::remove(std::uint32_t subscription_id) {
  std::lock_guard lock(mu_);
  sinks_.erase(subscription_id);
}

void TrapReceiver::run() {
  while (!stop_) {
    auto d = net::recv_from(sock_, std::chrono::milliseconds(100));
    if (!d) continue;
    Message m;
    try {
      m = decode_message(d->bytes);
    } catch (const DecodeError&) {
      continue;
    }
    if (m.type != MessageType::EventReport || m.fields.size() < 4) continue;
    TrapEvent ev;
    ev.subscription_id = m.correlation_id;
    ev.instance = m.fields[0];
    ev.value = m.fields[1];
    ev.threshold = m.fields[2];
    try {
      ev.agent_unix_ms = std::stoll(m.fields[3]);
    } catch (const std::exception&) {
    }
    ev.received = SystemClock::now();
    ev.from = d->from;
    std::lock_guard lock(mu_);
    bool routed = false;
    auto [lo, hi] = sinks_.equal_range(ev.subscription_id);
    for (auto it = lo; it != hi; ++it) {
      if (!it->second.first.empty() && it->second.first != ev.from.host) continue;
      it->second.second(ev);
      routed = true;
    }
    if (!routed) {
      pending_.push_back(ev);
      if (pending_.size() > 256) pending_.pop_front();
    }
  }
}

// ---- manager ----

Manager::Manager(ManagerConfig config)
    : config_(std::move(config)), log_(std::make_shared<OperationLog>(config_.log_path)) {}

Manager::~Manager() {
  stopping_ = true;
  std::lock_guard lock(listener_mu_);
  listener_sock_.shutdown();
  if (listener_thread_.joinable()) listener_thread_.join();
}

SessionOptions Manager::session_options(Transport transport, std::optional<std::string> community, bool secure) const {
  SessionOptions o;
  o.transport = transport;
  o.community = community.value_or(config_.community);
  o.secure = secure;
  o.key = config_.key;
  o.log = log_;
  o.timeout = config_.request_timeout;
  o.udp_retries = config_.udp_retries;
  o.connect_timeout = config_.connect_timeout;
  return o;
}

std::shared_ptr<ManagerSession> Manager::open_session(const AgentEntry& agent, Transport transport,
                                                      std::optional<std::string> community, bool secure,
                                                      ManagerSession::WireTap tap) {
  return ManagerSession::open(agent, session_options(transport, std::move(community), secure), std::move(tap));
}

std::unique_ptr<PollTask> Manager::start_poll(std::shared_ptr<ManagerSession> session, const std::string& oid,
                                              std::chrono::milliseconds period, PollTask::Sink sink) {
  return std::make_unique<PollTask>(std::move(session), oid, period, std::move(sink));
}

std::uint32_t Manager::subscribe_trap(ManagerSession& session, const std::string& oid, double threshold,
                                      std::chrono::milliseconds period, std::uint16_t report_port,
                                      TrapReceiver::Sink sink, std::uint16_t* bound_port) {
  TrapReceiver* rx = nullptr;
  {
    std::lock_guard lock(traps_mu_);
    auto it = report_port ? receivers_.find(report_port) : receivers_.end();
    if (it != receivers_.end()) {
      rx = it->second.get();
    } else {
      auto r = std::make_unique<TrapReceiver>(report_port);
      rx = r.get();
      receivers_[r->port()] = std::move(r);
    }
  }
  if (bound_port) *bound_port = rx->port();
  auto id = session.subscribe_trap(oid, threshold, period, ":" + std::to_string(rx->port()));
  rx->add(id, session.agent().host, std::move(sink));
  return id;
}

void Manager::start_listener() {
  std::lock_guard lock(listener_mu_);
  if (listener_sock_.valid()) return;
  listener_sock_ = net::udp_bind("0.0.0.0", config_.announce_port, true, true);
  listener_thread_ = std::thread(&Manager::listen_loop, this);
}

std::uint16_t Manager::listener_port() const {
  std::lock_guard lock(listener_mu_);
  return listener_sock_.valid() ? listener_sock_.local_port() : 0;
}

void Manager::listen_loop() {
  while (!stopping_) {
    auto d = net::recv_from(listener_sock_, std::chrono::milliseconds(100));
    if (!d) continue;
    try {
      auto m = decode_message(d->bytes);
      if (m.fields.size() < 3) continue;
      if (m.type == MessageType::AgentAnnounce)
        directory_.upsert(m.fields[0], to_port(m.fields[1]), to_port(m.fields[2]));
      else if (m.type == MessageType::AgentFarewell)
        directory_.remove(m.fields[0], to_port(m.fields[1]));
    } catch (const Error&) {
    }
  }
}

std::vector<AgentEntry> Manager::discover(const std::string& broadcast_address, std::chrono::milliseconds timeout,
                                          std::optional<std::string> community) {
  try {
    start_listener();
  } catch (const Error&) {
    // another process may hold the announce port without SO_REUSEADDR
  }
  auto sock = net::udp_bind("0.0.0.0", 0, false, true);
  Message probe{MessageType::DiscoveryProbe, 0, random_u32(), {community.value_or(config_.community)}};
  net::send_to(sock, encode_message(probe), {broadcast_address, config_.discovery_port});

  std::vector<AgentEntry> found;
  auto deadline = Steady::now() + timeout;
  while (true) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Steady::now());
    if (left.count() <= 0) break;
    auto d = net::recv_from(sock, left);
    if (!d) continue;
    try {
      auto m = decode_message(d->bytes);
      if (m.type != MessageType::DiscoveryReply || m.correlation_id != probe.correlation_id || m.fields.size() < 3)
        continue;
      auto tcp = to_port(m.fields[1]);
      auto udp = to_port(m.fields[2]);
      directory_.upsert(m.fields[0], tcp, udp);
      bool dup = std::any_of(found.begin(), found.end(),
                             [&](const AgentEntry& e) { return e.host == m.fields[0] && e.tcp_port == tcp; });
      if (!dup) {
        auto e = directory_.find(m.fields[0], tcp);
        found.push_back(e ? *e : AgentEntry{m.fields[0], tcp, udp});
      }
    } catch (const Error&) {
    }
  }
  return found;
}

}  // namespace nm
