#include "nm/agent.hpp"

#include <charconv>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace nm {

namespace {

using Clock = std::chrono::steady_clock;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view text, const std::string& what) {
  T v{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) throw Error(Errc::BadConfig, "bad value for " + what);
  return v;
}

std::uint16_t parse_port(std::string_view text, const std::string& what) {
  auto v = parse_number<unsigned>(text, what);
  if (v > 65535) throw Error(Errc::BadConfig, what + " out of range");
  return static_cast<std::uint16_t>(v);
}

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

OidPath path_of(const Oid& oid) {
  OidPath p;
  for (auto c : oid) p.components.emplace_back(c);
  return p;
}

bool writable_access(const std::string& access) {
  return access == "read-write" || access == "write-only" || access == "read-create";
}

std::size_t expected_fields(MessageType t) {
  switch (t) {
    case MessageType::Initialise:
    case MessageType::ConnectionRelease:
      return 1;
    case MessageType::NextLevel:
    case MessageType::UpperLevel:
    case MessageType::Get:
    case MessageType::GetNext:
    case MessageType::Describe:
      return 2;
    case MessageType::Set:
      return 3;
    case MessageType::SubscribeTrap:
      return 5;
    default:
      return 0;
  }
}

std::int64_t unix_now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

// ---- configuration ----

void AgentConfig::validate() const {
  if (community.empty()) throw Error(Errc::BadConfig, "community must not be empty");
  std::vector<std::uint16_t> ports;
  for (auto p : {tcp_port, udp_port, discovery_port})
    if (p != 0) ports.push_back(p);
  std::sort(ports.begin(), ports.end());
  if (std::adjacent_find(ports.begin(), ports.end()) != ports.end())
    throw Error(Errc::BadConfig, "tcp_port, udp_port and discovery_port must be distinct");
  if (require_security && !public_key) throw Error(Errc::BadConfig, "security=required needs key_file");
  if (max_sessions == 0) throw Error(Errc::BadConfig, "max_sessions must be positive");
}

AgentConfig AgentConfig::parse(std::string_view text, const std::string& base_dir) {
  AgentConfig c;
  auto resolve_path = [&](std::string_view v) {
    std::filesystem::path p{std::string(v)};
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    return p.string();
  };
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(Errc::BadConfig, "expected key=value: " + std::string(line));
    std::string key(trim(line.substr(0, eq)));
    auto value = trim(line.substr(eq + 1));
    if (key == "raf") c.raf_path = resolve_path(value);
    else if (key == "bind") c.bind_address = value;
    else if (key == "advertise") c.advertise_address = value;
    else if (key == "tcp_port") c.tcp_port = parse_port(value, key);
    else if (key == "udp_port") c.udp_port = parse_port(value, key);
    else if (key == "discovery_port") c.discovery_port = parse_port(value, key);
    else if (key == "community") c.community = value;
    else if (key == "key_file") c.public_key = load_key_file(resolve_path(value)).public_key();
    else if (key == "device_state") c.device_state_path = resolve_path(value);
    else if (key == "max_sessions") c.max_sessions = parse_number<std::size_t>(value, key);
    else if (key == "udp_idle_ms") c.udp_idle_expiry = std::chrono::milliseconds(parse_number<long>(value, key));
    else if (key == "security") {
      if (value == "required") c.require_security = true;
      else if (value == "off") c.require_security = false;
      else throw Error(Errc::BadConfig, "security must be off or required");
    } else if (key == "announce") {
      std::string_view rest = value;
      while (!rest.empty()) {
        auto comma = rest.find(',');
        auto item = trim(rest.substr(0, comma));
        if (!item.empty()) c.announce_targets.push_back(net::Endpoint::parse(item, kDefaultAnnouncePort));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      }
    } else {
      throw Error(Errc::BadConfig, "unknown config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

AgentConfig AgentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::BadConfig, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), std::filesystem::path(path).parent_path().string());
}

// ---- authentication and traps ----

AuthResult authenticate_request(const Message& m, const AgentConfig& config, bool security_enabled) {
  if (m.fields.empty() || m.fields[0] != config.community) return {false, "community", false};
  if (!m.has_flag(flags::kSigned)) {
    if (security_enabled) return {false, "signature", false};
    return {true, "", false};
  }
  if (!config.public_key || m.fields.size() < 2) return {false, "signature", false};
  try {
    auto recovered = verify_recover(as_bytes(m.fields.back()), *config.public_key);
    if (recovered != signed_span(m)) return {false, "signature", false};
  } catch (const Error&) {
    return {false, "signature", false};
  }
  return {true, "", true};
}

std::vector<TrapReport> trap_monitor_tick(std::vector<TrapSubscription>& subs, DeviceStateProvider& provider,
                                          Clock::time_point now, std::int64_t unix_ms,
                                          std::uint64_t* read_failures) {
  std::vector<TrapReport> out;
  for (auto& s : subs) {
    if (now < s.next_due) continue;
    s.next_due += s.period;
    if (s.next_due <= now) s.next_due = now + s.period;
    std::optional<long long> value;
    try {
      value = provider.read(s.instance).number();
    } catch (const Error&) {
    }
    if (!value) {
      if (read_failures) ++*read_failures;
      continue;
    }
    bool above = static_cast<double>(*value) > s.threshold;
    if (above && !s.last_sample_above) {
      Message m{MessageType::EventReport, 0, static_cast<std::uint32_t>(s.id),
                {oid_to_string(s.instance), std::to_string(*value), format_double(s.threshold),
                 std::to_string(unix_ms)}};
      out.push_back({s.report_to, std::move(m)});
    }
    s.last_sample_above = above;
  }
  return out;
}

// ---- request handling ----

AgentCore::AgentCore(AgentConfig config, MibTree tree, RafOpener open_raf,
                     std::shared_ptr<DeviceStateProvider> provider)
    : config_(std::move(config)),
      tree_(std::move(tree)),
      open_raf_(std::move(open_raf)),
      provider_(provider ? std::move(provider) : std::make_shared<SimulatedDevice>()) {
  // Random base so subscription ids of agents sharing a host rarely collide.
  std::mt19937 rng{std::random_device{}()};
  next_sub_id_ = std::uniform_int_distribution<std::uint32_t>(1, 0x3FFFFFFF)(rng);
}

std::unique_ptr<AgentCore> AgentCore::from_config(const AgentConfig& config) {
  config.validate();
  MibTree tree;
  try {
    FileSource src(config.raf_path);
    tree = MibTree::build(src);
  } catch (const Error& e) {
    throw Error(Errc::CorruptImage, "bad RAF '" + config.raf_path + "': " + e.what());
  }
  std::shared_ptr<DeviceStateProvider> provider;
  if (!config.device_state_path.empty()) provider = SimulatedDevice::load(config.device_state_path);
  auto path = config.raf_path;
  return std::make_unique<AgentCore>(config, std::move(tree), [path] { return std::make_unique<FileSource>(path); },
                                     std::move(provider));
}

Message AgentCore::error_response(std::uint32_t correlation, const std::string& reason, const std::string& detail) {
  return Message{MessageType::ErrorResponse, 0, correlation, {reason, detail}};
}

RafReader& AgentCore::reader(SessionContext& ctx) {
  if (!ctx.reader) {
    ctx.raf = open_raf_();
    ctx.reader = std::make_unique<RafReader>(*ctx.raf);
  }
  return *ctx.reader;
}

Message AgentCore::process(SessionContext& ctx, const Message& request) {
  ++stats_.requests;
  if (!is_request_type(request.type) || request.type == MessageType::DiscoveryProbe) {
    ++stats_.error_responses;
    return error_response(request.correlation_id, "BadRequest", "not a session request");
  }
  auto auth = authenticate_request(request, config_, config_.require_security);
  if (!auth.accepted) {
    ++(auth.reason == "community" ? stats_.denied_community : stats_.denied_signature);
    ++stats_.error_responses;
    return error_response(request.correlation_id, "AccessDenied", "access to system information denied: " + auth.reason);
  }
  return handle_request(ctx, request, auth.verified);
}

Message AgentCore::handle_request(SessionContext& ctx, const Message& request, bool verified) {
  ++stats_.dispatched;
  if (config_.require_security && !verified) ++stats_.dispatched_unverified;
  std::size_t nfields = request.fields.size() - (request.has_flag(flags::kSigned) ? 1 : 0);
  Message resp;
  try {
    if (nfields != expected_fields(request.type))
      throw Error(Errc::BadRequest, std::string(message_type_name(request.type)) + " expects " +
                                        std::to_string(expected_fields(request.type)) + " fields");
    resp = dispatch(ctx, request, nfields);
    if (request.has_flag(flags::kEncrypted)) {
      if (!config_.public_key) throw Error(Errc::BadRequest, "agent has no key for encryption");
      for (auto& f : resp.fields) f = to_string(encrypt(as_bytes(f), *config_.public_key));
      resp.flags |= flags::kEncrypted;
    }
  } catch (const Error& e) {
    std::string reason;
    switch (e.code()) {
      case Errc::NoSuchObject:
      case Errc::NoSuchInstance:
      case Errc::NotWritable:
      case Errc::EndOfMib:
      case Errc::BadRequest:
        reason = errc_name(e.code());
        break;
      case Errc::InvalidOid:
        reason = "BadRequest";
        break;
      default:
        reason = "GenErr";
    }
    ++stats_.error_responses;
    resp = error_response(request.correlation_id, reason, e.what());
  }
  resp.correlation_id = request.correlation_id;
  return resp;
}

Oid AgentCore::instance_of(const Resolution& r) const {
  if (!r.node->is_leaf() || r.instance_suffix.empty())
    throw Error(Errc::NoSuchInstance, "'" + r.node->name + "' needs an instance suffix");
  Oid inst = MibTree::oid_of(*r.node);
  inst.insert(inst.end(), r.instance_suffix.begin(), r.instance_suffix.end());
  return inst;
}

Message AgentCore::value_response(const Message& request, const Oid& instance, const TypedValue& v) {
  return Message{MessageType::Response, 0, request.correlation_id,
                 {oid_to_string(instance), std::string(value_type_name(v.type)), v.text}};
}

Message AgentCore::dispatch(SessionContext& ctx, const Message& req, std::size_t nfields) {
  const auto& f = req.fields;
  auto listing = [&](const std::vector<LevelEntry>& level) {
    return Message{MessageType::Response, 0, req.correlation_id, {encode_level_listing(level)}};
  };
  (void)nfields;
  switch (req.type) {
    case MessageType::Initialise:
      return listing(tree_.initial_level());
    case MessageType::NextLevel:
      return listing(tree_.next_level(OidPath::parse(f[1])));
    case MessageType::UpperLevel:
      return listing(tree_.upper_level(OidPath::parse(f[1])));
    case MessageType::Get: {
      auto inst = instance_of(tree_.resolve(f[1]));
      return value_response(req, inst, provider_->read(inst));
    }
    case MessageType::GetNext: {
      auto r = tree_.resolve(f[1]);
      Oid query = MibTree::oid_of(*r.node);
      query.insert(query.end(), r.instance_suffix.begin(), r.instance_suffix.end());
      auto all = provider_->instances();
      for (auto it = std::upper_bound(all.begin(), all.end(), query, oid_less); it != all.end(); ++it) {
        try {
          auto rr = tree_.resolve(path_of(*it));
          if (!rr.node->is_leaf() || rr.instance_suffix.empty()) continue;
          return value_response(req, *it, provider_->read(*it));
        } catch (const Error&) {
          continue;
        }
      }
      throw Error(Errc::EndOfMib, "no instance after " + oid_to_string(query));
    }
    case MessageType::Set: {
      auto r = tree_.resolve(f[1]);
      auto inst = instance_of(r);
      if (!r.node->raf_index) throw Error(Errc::NotWritable, "'" + r.node->name + "' is not writable");
      auto rec = reader(ctx).read_record(*r.node->raf_index);
      if (!writable_access(rec.access)) throw Error(Errc::NotWritable, "'" + r.node->name + "' is " + rec.access);
      switch (provider_->write(inst, f[2])) {
        case WriteStatus::Ok:
          break;
        case WriteStatus::NoSuchInstance:
          throw Error(Errc::NoSuchInstance, "no instance " + oid_to_string(inst));
        case WriteStatus::BadValue:
          throw Error(Errc::BadRequest, "value does not match the instance type");
      }
      return value_response(req, inst, provider_->read(inst));
    }
    case MessageType::Describe: {
      auto r = tree_.resolve(f[1]);
      if (!r.node->raf_index) throw Error(Errc::NoSuchObject, "'" + r.node->name + "' has no record");
      auto rec = reader(ctx).read_record(*r.node->raf_index);
      return Message{MessageType::Response, 0, req.correlation_id,
                     {rec.name, rec.syntax, rec.access, rec.status, rec.description}};
    }
    case MessageType::ConnectionRelease:
      ctx.released = true;
      return Message{MessageType::Response, 0, req.correlation_id, {}};
    case MessageType::SubscribeTrap: {
      auto inst = instance_of(tree_.resolve(f[1]));
      if (!provider_->read(inst).number()) throw Error(Errc::BadRequest, "object is not numeric");
      TrapSubscription s;
      s.instance = inst;
      char* end = nullptr;
      s.threshold = std::strtod(f[2].c_str(), &end);
      if (f[2].empty() || *end != '\0' || !std::isfinite(s.threshold)) throw Error(Errc::BadRequest, "bad threshold");
      long period = 0;
      auto [p, ec] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), period);
      if (ec != std::errc() || p != f[3].data() + f[3].size() || period < 100)
        throw Error(Errc::BadRequest, "period must be an integer >= 100 ms");
      s.period = std::chrono::milliseconds(period);
      try {
        std::string addr = f[4];
        if (addr.empty() || addr.front() == ':') addr = ctx.peer.host + addr;
        s.report_to = net::Endpoint::parse(addr);
      } catch (const Error& e) {
        throw Error(Errc::BadRequest, e.what());
      }
      if (s.report_to.port == 0) throw Error(Errc::BadRequest, "report address needs a port");
      s.next_due = Clock::now();
      std::lock_guard lock(traps_mu_);
      s.id = next_sub_id_++;
      subs_.push_back(s);
      return Message{MessageType::Response, 0, req.correlation_id, {std::to_string(s.id)}};
    }
    default:
      throw Error(Errc::BadRequest, "unsupported request");
  }
}

std::vector<TrapReport> AgentCore::tick(Clock::time_point now, std::int64_t unix_ms) {
  std::lock_guard lock(traps_mu_);
  std::uint64_t failures = 0;
  auto out = trap_monitor_tick(subs_, *provider_, now, unix_ms, &failures);
  stats_.trap_read_failures += failures;
  return out;
}

std::optional<Clock::time_point> AgentCore::next_trap_due() const {
  std::lock_guard lock(traps_mu_);
  std::optional<Clock::time_point> due;
  for (const auto& s : subs_)
    if (!due || s.next_due < *due) due = s.next_due;
  return due;
}

std::size_t AgentCore::subscription_count() const {
  std::lock_guard lock(traps_mu_);
  return subs_.size();
}

// ---- daemon ----

struct Agent::TcpWorker {
  net::Socket sock;
  net::Endpoint peer;
  std::thread thread;
  std::atomic<bool> done{false};
};

struct Agent::UdpWorker {
  net::Endpoint peer;
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Message> queue;
  bool stop = false;
  std::thread thread;
};

Agent::Agent(std::unique_ptr<AgentCore> core) : core_(std::move(core)) {}

Agent::~Agent() { stop(); }

void Agent::start() {
  if (running_) return;
  const auto& cfg = core_->config();
  tcp_listener_ = net::tcp_listen(cfg.bind_address, cfg.tcp_port);
  udp_sock_ = net::udp_bind(cfg.bind_address, cfg.udp_port);
  discovery_sock_ = net::udp_bind("0.0.0.0", cfg.discovery_port, true, true);
  trap_sock_ = net::udp_bind("0.0.0.0", 0, false, true);
  tcp_port_ = tcp_listener_.local_port();
  udp_port_ = udp_sock_.local_port();
  discovery_port_ = discovery_sock_.local_port();
  stopping_ = false;
  running_ = true;
  acceptor_ = std::thread(&Agent::accept_loop, this);
  udp_thread_ = std::thread(&Agent::udp_loop, this);
  discovery_thread_ = std::thread(&Agent::discovery_loop, this);
  trap_thread_ = std::thread(&Agent::trap_loop, this);
  announce(MessageType::AgentAnnounce);
}

void Agent::stop() {
  if (!running_) return;
  announce(MessageType::AgentFarewell);
  stopping_ = true;
  tcp_listener_.shutdown();
  udp_sock_.shutdown();
  discovery_sock_.shutdown();
  {
    std::lock_guard lock(trap_mu_);
    trap_cv_.notify_all();
  }
  for (auto* t : {&acceptor_, &udp_thread_, &discovery_thread_, &trap_thread_})
    if (t->joinable()) t->join();

  std::list<std::unique_ptr<TcpWorker>> tcp;
  {
    std::lock_guard lock(tcp_mu_);
    tcp.swap(tcp_workers_);
  }
  for (auto& w : tcp) w->sock.shutdown();
  for (auto& w : tcp)
    if (w->thread.joinable()) w->thread.join();

  std::vector<std::shared_ptr<UdpWorker>> udp;
  {
    std::lock_guard lock(udp_mu_);
    for (auto& [peer, w] : udp_workers_) udp.push_back(w);
    udp_workers_.clear();
    udp.insert(udp.end(), udp_finished_.begin(), udp_finished_.end());
    udp_finished_.clear();
  }
  for (auto& w : udp) {
    std::lock_guard lock(w->mu);
    w->stop = true;
    w->cv.notify_all();
  }
  for (auto& w : udp)
    if (w->thread.joinable()) w->thread.join();

  tcp_listener_.close();
  udp_sock_.close();
  discovery_sock_.close();
  trap_sock_.close();
  running_ = false;
}

std::string Agent::address_for(const std::string& peer_host) const {
  const auto& cfg = core_->config();
  if (!cfg.advertise_address.empty()) return cfg.advertise_address;
  if (cfg.bind_address != "0.0.0.0" && !cfg.bind_address.empty()) return cfg.bind_address;
  return net::local_address_for(peer_host);
}

void Agent::announce(MessageType type) {
  for (const auto& target : core_->config().announce_targets) {
    Message m{type, 0, 0, {address_for(target.host), std::to_string(tcp_port_), std::to_string(udp_port_)}};
    try {
      net::send_to(trap_sock_, encode_message(m), target);
    } catch (const Error&) {
    }
  }
}

void Agent::reap_tcp() {
  std::lock_guard lock(tcp_mu_);
  for (auto it = tcp_workers_.begin(); it != tcp_workers_.end();) {
    if ((*it)->done) {
      (*it)->thread.join();
      it = tcp_workers_.erase(it);
    } else {
      ++it;
    }
  }
}

void Agent::accept_loop() {
  auto& stats = core_->stats();
  while (!stopping_) {
    auto conn = net::tcp_accept(tcp_listener_);
    if (!conn) break;
    if (stopping_) break;
    reap_tcp();
    if (stats.sessions_active >= core_->config().max_sessions) {
      ++stats.busy_rejections;
      try {
        net::send_frame(conn->first, encode_message(AgentCore::error_response(0, "busy", "worker limit reached")));
      } catch (const Error&) {
      }
      continue;
    }
    ++stats.sessions_active;
    auto w = std::make_unique<TcpWorker>();
    w->sock = std::move(conn->first);
    w->peer = conn->second;
    std::lock_guard lock(tcp_mu_);
    auto* raw = w.get();
    tcp_workers_.push_back(std::move(w));
    raw->thread = std::thread(&Agent::tcp_session, this, std::ref(*raw));
  }
}

void Agent::tcp_session(TcpWorker& w) {
  auto& stats = core_->stats();
  ++stats.sessions_opened;
  SessionContext ctx;
  ctx.peer = w.peer;
  net::SocketStream in(w.sock);
  try {
    while (!stopping_) {
      auto payload = read_frame(in);
      Message resp;
      try {
        resp = core_->process(ctx, decode_message(payload));
      } catch (const DecodeError& e) {
        resp = AgentCore::error_response(0, "BadRequest", e.what());
      }
      net::send_frame(w.sock, encode_message(resp));
      if (ctx.released) break;
    }
  } catch (const Error&) {
    // peer went away or sent an unusable frame; only this session ends
  }
  w.sock.shutdown();
  --stats.sessions_active;
  w.done = true;
}

void Agent::udp_loop() {
  auto& stats = core_->stats();
  while (!stopping_) {
    auto d = net::recv_from(udp_sock_, std::chrono::milliseconds(100));
    std::vector<std::shared_ptr<UdpWorker>> finished;
    {
      std::lock_guard lock(udp_mu_);
      finished.swap(udp_finished_);
    }
    for (auto& w : finished)
      if (w->thread.joinable()) w->thread.join();
    if (!d || d->bytes.size() > kMaxUdpPayload) continue;

    Message m;
    try {
      m = decode_message(d->bytes);
    } catch (const DecodeError& e) {
      net::send_to(udp_sock_, encode_message(AgentCore::error_response(0, "BadRequest", e.what())), d->from);
      continue;
    }
    std::lock_guard lock(udp_mu_);
    auto it = udp_workers_.find(d->from);
    if (it == udp_workers_.end()) {
      if (stats.sessions_active >= core_->config().max_sessions) {
        ++stats.busy_rejections;
        net::send_to(udp_sock_, encode_message(AgentCore::error_response(m.correlation_id, "busy", "worker limit reached")),
                     d->from);
        continue;
      }
      ++stats.sessions_active;
      auto w = std::make_shared<UdpWorker>();
      w->peer = d->from;
      it = udp_workers_.emplace(d->from, w).first;
      w->thread = std::thread(&Agent::udp_session, this, w);
    }
    std::lock_guard wl(it->second->mu);
    it->second->queue.push_back(std::move(m));
    it->second->cv.notify_one();
  }
}

void Agent::udp_session(std::shared_ptr<UdpWorker> w) {
  auto& stats = core_->stats();
  ++stats.sessions_opened;
  SessionContext ctx;
  ctx.peer = w->peer;
  auto retire = [&] {
    std::lock_guard lock(udp_mu_);
    auto it = udp_workers_.find(w->peer);
    if (it == udp_workers_.end() || it->second != w) return true;
    std::lock_guard wl(w->mu);
    if (!w->queue.empty() && !ctx.released) return false;
    udp_workers_.erase(it);
    udp_finished_.push_back(w);
    return true;
  };
  while (true) {
    std::unique_lock lk(w->mu);
    bool ready = w->cv.wait_for(lk, core_->config().udp_idle_expiry, [&] { return !w->queue.empty() || w->stop; });
    if (w->stop) break;
    if (!ready) {
      lk.unlock();
      if (retire()) break;
      continue;
    }
    Message m = std::move(w->queue.front());
    w->queue.pop_front();
    lk.unlock();

    auto resp = encode_message(core_->process(ctx, m));
    if (resp.size() > kMaxUdpPayload)
      resp = encode_message(AgentCore::error_response(m.correlation_id, "BadRequest", "response exceeds datagram limit"));
    try {
      net::send_to(udp_sock_, resp, w->peer);
    } catch (const Error&) {
    }
    if (ctx.released && retire()) break;
  }
  --stats.sessions_active;
}

void Agent::discovery_loop() {
  auto& stats = core_->stats();
  while (!stopping_) {
    auto d = net::recv_from(discovery_sock_, std::chrono::milliseconds(100));
    if (!d) continue;
    Message probe;
    try {
      probe = decode_message(d->bytes);
    } catch (const DecodeError&) {
      continue;
    }
    if (probe.type != MessageType::DiscoveryProbe || probe.fields.empty() ||
        probe.fields[0] != core_->config().community)
      continue;
    Message reply{MessageType::DiscoveryReply, 0, probe.correlation_id,
                  {address_for(d->from.host), std::to_string(tcp_port_), std::to_string(udp_port_)}};
    try {
      net::send_to(discovery_sock_, encode_message(reply), d->from);
      ++stats.discovery_replies;
    } catch (const Error&) {
    }
  }
}

void Agent::trap_loop() {
  auto& stats = core_->stats();
  while (!stopping_) {
    auto now = Clock::now();
    for (auto& r : core_->tick(now, unix_now_ms())) {
      try {
        net::send_to(trap_sock_, encode_message(r.message), r.to);
        ++stats.trap_reports;
      } catch (const Error&) {
      }
    }
    auto wake = now + std::chrono::milliseconds(50);
    if (auto due = core_->next_trap_due(); due && *due < wake) wake = *due;
    std::unique_lock lk(trap_mu_);
    trap_cv_.wait_until(lk, wake, [&] { return stopping_.load(); });
  }
}

}  // namespace nm
