#include "nm/gateway.hpp"

#include <random>

#include "httplib.h"
#include "nm/json_render.hpp"

namespace nm {

using nlohmann::json;

std::string random_id() {
  static thread_local std::random_device rd;
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (int i = 0; i < 4; ++i) {
    auto w = static_cast<std::uint32_t>(rd());
    for (int k = 0; k < 8; ++k) out.push_back(hex[(w >> (k * 4)) & 0xF]);
  }
  return out;
}

// ---- event hub ----

std::uint64_t EventHub::subscribe() {
  std::lock_guard lk(mu_);
  auto id = next_id_++;
  queues_[id];
  return id;
}

void EventHub::unsubscribe(std::uint64_t id) {
  std::lock_guard lk(mu_);
  queues_.erase(id);
}

void EventHub::publish(const std::string& event, json data) {
  std::lock_guard lk(mu_);
  if (closed_) return;
  auto seq = ++sequence_;
  std::string frame = "id: " + std::to_string(seq) + "\nevent: " + event + "\ndata: " +
                      data.dump(-1, ' ', false, json::error_handler_t::replace) + "\n\n";
  for (auto& [id, q] : queues_) {
    if (q.size() >= kQueueLimit) q.pop_front();
    q.push_back(frame);
  }
  cv_.notify_all();
}

bool EventHub::next(std::uint64_t id, std::chrono::milliseconds timeout, std::vector<std::string>& out) {
  std::unique_lock lk(mu_);
  auto ready = [&] {
    auto it = queues_.find(id);
    return closed_ || it == queues_.end() || !it->second.empty();
  };
  cv_.wait_for(lk, timeout, ready);
  auto it = queues_.find(id);
  if (closed_ || it == queues_.end()) return false;
  while (!it->second.empty()) {
    out.push_back(std::move(it->second.front()));
    it->second.pop_front();
  }
  return true;
}

std::size_t EventHub::subscriber_count() const {
  std::lock_guard lk(mu_);
  return queues_.size();
}

void EventHub::close() {
  std::lock_guard lk(mu_);
  closed_ = true;
  cv_.notify_all();
}

// ---- HTTP helpers ----

namespace {

struct HttpError {
  int status;
  std::string error;
  std::string message;
};

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
}

int status_for(Errc c) {
  switch (c) {
    case Errc::InvalidOid:
    case Errc::BadConfig:
    case Errc::BadRequest:
    case Errc::FieldTooLong:
    case Errc::TooManyFields:
      return 400;
    case Errc::NoSuchObject:
    case Errc::NoSuchInstance:
    case Errc::EndOfMib:
    case Errc::StoppedSession:
      return 404;
    case Errc::DeniedByAgent:
      return 403;
    case Errc::Timeout:
      return 504;
    default:
      return 502;
  }
}

int status_for_reason(const std::string& reason) {
  if (reason == "NoSuchObject" || reason == "NoSuchInstance" || reason == "EndOfMib") return 404;
  if (reason == "AccessDenied") return 403;
  if (reason == "GenErr") return 502;
  return 400;
}

// Runs f, converting failures into {error, message} bodies.
template <class F>
void handle(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const HttpError& e) {
    reply(res, e.status, {{"error", e.error}, {"message", e.message}});
  } catch (const AgentErrorResponse& e) {
    reply(res, status_for_reason(e.reason()), {{"error", e.reason()}, {"message", e.what()}});
  } catch (const Error& e) {
    reply(res, status_for(e.code()), {{"error", errc_name(e.code())}, {"message", e.what()}});
  } catch (const json::exception& e) {
    reply(res, 400, {{"error", "BadRequest"}, {"message", e.what()}});
  } catch (const std::exception& e) {
    reply(res, 500, {{"error", "Internal"}, {"message", e.what()}});
  }
}

[[noreturn]] void bad_input(const std::string& message) { throw HttpError{400, "BadRequest", message}; }

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) bad_input("body must be a JSON object");
  return j;
}

std::string string_field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) bad_input(std::string("'") + key + "' must be a string");
  return j[key].get<std::string>();
}

std::chrono::milliseconds period_field(const json& j) {
  if (!j.contains("period_ms") || !j["period_ms"].is_number_integer()) bad_input("'period_ms' must be an integer");
  auto ms = j["period_ms"].get<std::int64_t>();
  if (ms < 100) bad_input("'period_ms' must be at least 100");
  return std::chrono::milliseconds(ms);
}

Transport transport_field(const json& j, Transport fallback) {
  if (!j.contains("transport")) return fallback;
  if (!j["transport"].is_string()) bad_input("'transport' must be a string");
  auto t = parse_transport(j["transport"].get<std::string>());
  if (!t) bad_input("'transport' must be tcp or udp");
  return *t;
}

std::uint16_t port_number(const std::string& s) {
  try {
    std::size_t used = 0;
    auto v = std::stoul(s, &used);
    if (used == s.size() && v > 0 && v <= 65535) return static_cast<std::uint16_t>(v);
  } catch (const std::exception&) {
  }
  bad_input("bad port '" + s + "'");
}

// agent: {host, tcp_port, udp_port} or "host[:tcp[:udp]]". A missing UDP
// port is taken from the directory entry, else the default.
AgentEntry agent_field(const json& j, const AgentDirectory& dir) {
  if (!j.contains("agent")) bad_input("'agent' is required");
  const auto& a = j["agent"];
  AgentEntry e;
  e.tcp_port = kDefaultTcpPort;
  std::optional<std::uint16_t> udp;
  if (a.is_string()) {
    auto s = a.get<std::string>();
    auto c1 = s.find(':');
    e.host = s.substr(0, c1);
    if (c1 != std::string::npos) {
      auto c2 = s.find(':', c1 + 1);
      e.tcp_port = port_number(s.substr(c1 + 1, c2 == std::string::npos ? std::string::npos : c2 - c1 - 1));
      if (c2 != std::string::npos) udp = port_number(s.substr(c2 + 1));
    }
  } else if (a.is_object()) {
    e.host = string_field(a, "host");
    if (a.contains("tcp_port")) e.tcp_port = a["tcp_port"].get<std::uint16_t>();
    if (a.contains("udp_port")) udp = a["udp_port"].get<std::uint16_t>();
  } else {
    bad_input("'agent' must be a string or an object");
  }
  if (e.host.empty()) bad_input("agent host is empty");
  if (udp) {
    e.udp_port = *udp;
  } else if (auto known = dir.find(e.host, e.tcp_port)) {
    e.udp_port = known->udp_port;
  } else {
    e.udp_port = kDefaultUdpPort;
  }
  return e;
}

}  // namespace

// ---- gateway ----

Gateway::Gateway(GatewayConfig config)
    : config_(std::move(config)),
      manager_(std::make_unique<Manager>(config_.manager)),
      server_(std::make_unique<httplib::Server>()) {
  directory_listener_ = manager_->directory().add_listener(
      [this](const DirectoryChange& c) { hub_.publish("directory", render::directory_change(c)); });
  install_routes();
}

Gateway::~Gateway() {
  stop();
  manager_->directory().remove_listener(directory_listener_);
}

void Gateway::start() {
  if (thread_.joinable()) return;
  if (config_.port == 0) {
    int p = server_->bind_to_any_port(config_.bind_address);
    if (p <= 0) throw Error(Errc::PortInUse, "cannot bind " + config_.bind_address);
    port_ = static_cast<std::uint16_t>(p);
  } else {
    if (!server_->bind_to_port(config_.bind_address, config_.port))
      throw Error(Errc::PortInUse, "cannot bind " + config_.bind_address + ":" + std::to_string(config_.port));
    port_ = config_.port;
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
}

void Gateway::stop() {
  hub_.close();
  if (thread_.joinable()) {
    server_->stop();
    thread_.join();
  }
  std::map<std::string, std::unique_ptr<PollTask>> polls;
  std::map<std::string, SessionSlot> sessions;
  {
    std::lock_guard lk(mu_);
    polls.swap(polls_);
    sessions.swap(sessions_);
  }
  for (auto& [id, p] : polls) p->stop();
  for (auto& [id, s] : sessions) {
    try {
      s.session->close();
    } catch (const std::exception&) {
    }
  }
}

std::size_t Gateway::session_count() const {
  std::lock_guard lk(mu_);
  return sessions_.size();
}

std::shared_ptr<ManagerSession> Gateway::session(const std::string& id) const {
  std::lock_guard lk(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw HttpError{404, "UnknownSession", "no session '" + id + "'"};
  return it->second.session;
}

void Gateway::install_routes() {
  auto& s = *server_;

  s.Get("/agents", [this](const httplib::Request&, httplib::Response& res) {
    handle(res, [&] { reply(res, 200, render::agents(manager_->directory().entries())); });
  });

  s.Post("/discover", [this](const httplib::Request& req, httplib::Response& res) {
    handle(res, [&] {
      auto j = body_of(req);
      auto bcast = j.value("broadcast", config_.broadcast_address);
      auto timeout = std::chrono::milliseconds(j.value("timeout_ms", config_.discovery_timeout.count()));
      if (timeout.count() <= 0) bad_input("'timeout_ms' must be positive");
      std::optional<std::string> community;
      if (j.contains("community")) community = string_field(j, "community");
      auto found = manager_->discover(bcast, timeout, community);
      reply(res, 200, render::agents(found));
    });
  });

  s.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    handle(res, [&] {
      auto j = body_of(req);
      auto agent = agent_field(j, manager_->directory());
      auto transport = transport_field(j, Transport::Tcp);
      std::optional<std::string> community;
      if (j.contains("community") && !j["community"].is_null()) community = string_field(j, "community");
      bool secure = j.value("secure", false);
      auto session = manager_->open_session(agent, transport, community, secure);
      auto id = random_id();
      {
        std::lock_guard lk(mu_);
        sessions_[id] = SessionSlot{session, {}};
      }
      reply(res, 201, {{"session_id", id}, {"root_level", render::levels(session->root_level())}});
    });
  });

  s.Delete(R"(/sessions/([0-9a-zA-Z]+))", [this](const httplib::Request& req, httplib::Response& res) {
    handle(res, [&] {
      std::string id = req.matches[1];
      SessionSlot slot;
      std::vector<std::unique_ptr<PollTask>> polls;
      {
        std::lock_guard lk(mu_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw HttpError{404, "UnknownSession", "no session '" + id + "'"};
        slot = std::move(it->second);
        sessions_.erase(it);
        for (const auto& pid : slot.polls) {
          auto p = polls_.find(pid);
          if (p == polls_.end()) continue;
          polls.push_back(std::move(p->second));
          polls_.erase(p);
        }
      }
      for (auto& p : polls) p->stop();
      slot.session->close();
      res.status = 204;
    });
  });

  auto level_route = [this](MessageType type) {
    return [this, type](const httplib::Request& req, httplib::Response& res) {
      handle(res, [&] {
        auto session = this->session(req.matches[1]);
        if (!req.has_param("oid")) bad_input("'oid' query parameter is required");
        auto r = session->request(type, req.get_param_value("oid"));
        reply(res, 200, render::result(r));
      });
    };
  };
  s.Get(R"(/sessions/([0-9a-zA-Z]+)/level)", level_route(MessageType::NextLevel));
  s.Get(R"(/sessions/([0-9a-zA-Z]+)/upper)", level_route(MessageType::UpperLevel));

  s.Post(R"(/sessions/([0-9a-zA-Z]+)/request)", [this](const httplib::Request& req, httplib::Response& res) {
    handle(res, [&] {
      auto session = this->session(req.matches[1]);
      auto j = body_of(req);
      auto type = render::request_type(string_field(j, "type"));
      if (!type) bad_input("'type' must be get, getnext, set or describe");
      auto oid = string_field(j, "oid");
      std::string value;
      if (*type == MessageType::Set) value = string_field(j, "value");
      reply(res, 200, render::result(session->request(*type, oid, value)));
    });
  });

  s.Put(R"(/sessions/([0-9a-zA-Z]+)/settings)", [this](const httplib::Request& req, httplib::Response& res) {
    handle(res, [&] {
      auto session = this->session(req.matches[1]);
      auto j = body_of(req);
      if (j.contains("secure") && !j["secure"].is_boolean()) bad_input("'secure' must be a boolean");
      if (j.contains("community")) session->set_community(string_field(j, "community"));
      if (j.contains("secure")) session->set_secure(j["secure"].get<bool>());
      if (j.contains("transport")) {
        auto t = transport_field(j, session->transport());
        if (t != session->transport()) session->set_transport(t);
      }
      reply(res, 200,
            {{"transport", transport_name(session->transport())},
             {"secure", session->secure()},
             {"community", session->community()}});
    });
  });

  s.Post(R"(/sessions/([0-9a-zA-Z]+)/polls)", [this](const httplib::Request& req, httplib::Response& res) {
    handle(res, [&] {
      std::string sid = req.matches[1];
      auto session = this->session(sid);
      auto j = body_of(req);
      auto oid = string_field(j, "oid");
      auto period = period_field(j);
      auto pid = random_id();
      auto task = manager_->start_poll(session, oid, period, [this, pid, sid, oid](const PollSample& p) {
        auto e = render::poll_sample(oid, p);
        e["poll_id"] = pid;
        e["session_id"] = sid;
        hub_.publish("poll", e);
      });
      std::unique_ptr<PollTask> orphan;
      {
        std::lock_guard lk(mu_);
        auto it = sessions_.find(sid);
        if (it == sessions_.end()) {
          orphan = std::move(task);
        } else {
          it->second.polls.push_back(pid);
          polls_[pid] = std::move(task);
        }
      }
      if (orphan) {
        orphan->stop();
        throw HttpError{404, "UnknownSession", "no session '" + sid + "'"};
      }
      reply(res, 201, {{"poll_id", pid}, {"oid", oid}, {"period_ms", period.count()}});
    });
  });

  s.Put(R"(/polls/([0-9a-zA-Z]+))", [this](const httplib::Request& req, httplib::Response& res) {
    handle(res, [&] {
      std::string pid = req.matches[1];
      auto period = period_field(body_of(req));
      std::lock_guard lk(mu_);
      auto it = polls_.find(pid);
      if (it == polls_.end()) throw HttpError{404, "UnknownPoll", "no poll '" + pid + "'"};
      it->second->set_period(period);
      reply(res, 200, {{"poll_id", pid}, {"oid", it->second->oid()}, {"period_ms", period.count()}});
    });
  });

  s.Delete(R"(/polls/([0-9a-zA-Z]+))", [this](const httplib::Request& req, httplib::Response& res) {
    handle(res, [&] {
      std::string pid = req.matches[1];
      std::unique_ptr<PollTask> task;
      {
        std::lock_guard lk(mu_);
        auto it = polls_.find(pid);
        if (it == polls_.end()) throw HttpError{404, "UnknownPoll", "no poll '" + pid + "'"};
        task = std::move(it->second);
        polls_.erase(it);
        for (auto& [sid, slot] : sessions_) std::erase(slot.polls, pid);
      }
      task->stop();
      res.status = 204;
    });
  });

  s.Post(R"(/sessions/([0-9a-zA-Z]+)/traps)", [this](const httplib::Request& req, httplib::Response& res) {
    handle(res, [&] {
      std::string sid = req.matches[1];
      auto session = this->session(sid);
      auto j = body_of(req);
      auto oid = string_field(j, "oid");
      if (!j.contains("threshold") || !j["threshold"].is_number()) bad_input("'threshold' must be a number");
      auto threshold = j["threshold"].get<double>();
      auto period = period_field(j);
      std::uint16_t report_port = j.value("report_port", std::uint16_t{0});
      std::uint16_t bound = 0;
      auto id = manager_->subscribe_trap(
          *session, oid, threshold, period, report_port,
          [this, sid](const TrapEvent& e) {
            auto ev = render::trap_event(e);
            ev["session_id"] = sid;
            hub_.publish("trap", ev);
          },
          &bound);
      reply(res, 201, {{"subscription_id", id}, {"report_port", bound}});
    });
  });

  s.Get("/events", [this](const httplib::Request&, httplib::Response& res) {
    auto sub = hub_.subscribe();
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [this, sub, first = true](std::size_t, httplib::DataSink& sink) mutable {
          if (first) {
            first = false;
            static const std::string hello = ": connected\n\n";
            return sink.write(hello.data(), hello.size());
          }
          std::vector<std::string> frames;
          if (!hub_.next(sub, std::chrono::milliseconds(500), frames)) {
            sink.done();
            return true;
          }
          if (frames.empty()) {
            static const std::string ping = ": ping\n\n";
            return sink.write(ping.data(), ping.size());
          }
          for (const auto& f : frames)
            if (!sink.write(f.data(), f.size())) return false;
          return true;
        },
        [this, sub](bool) { hub_.unsubscribe(sub); });
  });

  s.Get("/log", [this](const httplib::Request& req, httplib::Response& res) {
    handle(res, [&] {
      std::size_t n = 100;
      if (req.has_param("tail")) {
        const auto t = req.get_param_value("tail");
        try {
          std::size_t used = 0;
          n = std::stoul(t, &used);
          if (used != t.size()) throw std::invalid_argument(t);
        } catch (const std::exception&) {
          bad_input("'tail' must be a non-negative integer");
        }
      }
      json a = json::array();
      for (const auto& e : manager_->log()->tail(n)) a.push_back(render::log_entry(e));
      reply(res, 200, a);
    });
  });
}

}  // namespace nm
