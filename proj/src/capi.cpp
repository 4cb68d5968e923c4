#include "nm/nm.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nm/agent.hpp"
#include "nm/json_render.hpp"
#include "nm/manager.hpp"
#include "nm/mib_parser.hpp"
#include "nm/raf_store.hpp"
#include "nm/security.hpp"

using nlohmann::json;

struct nm_manager {
  std::unique_ptr<nm::Manager> impl;
};

struct nm_session {
  nm::Manager* manager = nullptr;
  std::shared_ptr<nm::ManagerSession> impl;
};

struct nm_poll {
  std::unique_ptr<nm::PollTask> impl;
};

struct nm_agent {
  std::unique_ptr<nm::Agent> impl;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_error_name;

nm_status status_for(nm::Errc c) {
  using nm::Errc;
  switch (c) {
    case Errc::InvalidOid:
    case Errc::BadConfig:
    case Errc::BadRequest:
    case Errc::NoSuchObject:
    case Errc::FieldTooLong:
    case Errc::IndexOutOfRange:
    case Errc::NonDenseIndices:
    case Errc::TooManyFields:
      return NM_ERR_ARGUMENT;
    case Errc::ConnectTimeout:
    case Errc::PortInUse:
      return NM_ERR_CONNECT;
    case Errc::AgentError:
      return NM_ERR_AGENT;
    case Errc::DeniedByAgent:
      return NM_ERR_DENIED;
    case Errc::Timeout:
      return NM_ERR_TIMEOUT;
    case Errc::StoppedSession:
      return NM_ERR_STOPPED;
    case Errc::Io:
    case Errc::SinkFailure:
    case Errc::PeerClosed:
      return NM_ERR_IO;
    default:
      return NM_ERR_DATA;
  }
}

nm_status fail(nm_status s, std::string name, std::string what) {
  g_error_name = std::move(name);
  g_error = std::move(what);
  return s;
}

// Runs f, translating exceptions into a status and the thread's last error.
template <class F>
nm_status guarded(F&& f) {
  try {
    f();
    g_error.clear();
    g_error_name.clear();
    return NM_OK;
  } catch (const nm::AgentErrorResponse& e) {
    return fail(status_for(e.code()), e.reason(), e.what());
  } catch (const nm::Error& e) {
    return fail(status_for(e.code()), std::string(nm::errc_name(e.code())), e.what());
  } catch (const json::exception& e) {
    return fail(NM_ERR_ARGUMENT, "BadConfig", e.what());
  } catch (const std::bad_alloc&) {
    return fail(NM_ERR_INTERNAL, "OutOfMemory", "out of memory");
  } catch (const std::exception& e) {
    return fail(NM_ERR_INTERNAL, "Internal", e.what());
  }
}

char* dup(const std::string& s) {
  auto* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void put(char** out, const json& j) {
  if (out) *out = dup(j.dump());
}

void require(bool ok, const char* what) {
  if (!ok) throw nm::Error(nm::Errc::BadConfig, what);
}

nm::Transport transport_arg(const char* t) {
  auto parsed = nm::parse_transport(t ? t : "tcp");
  if (!parsed) throw nm::Error(nm::Errc::BadConfig, std::string("unknown transport '") + t + "'");
  return *parsed;
}

}  // namespace

extern "C" {

const char* nm_last_error(void) { return g_error.c_str(); }

const char* nm_last_error_name(void) { return g_error_name.c_str(); }

const char* nm_status_name(nm_status status) {
  switch (status) {
    case NM_OK: return "ok";
    case NM_ERR_ARGUMENT: return "argument";
    case NM_ERR_CONNECT: return "connect";
    case NM_ERR_AGENT: return "agent";
    case NM_ERR_DENIED: return "denied";
    case NM_ERR_TIMEOUT: return "timeout";
    case NM_ERR_STOPPED: return "stopped";
    case NM_ERR_IO: return "io";
    case NM_ERR_DATA: return "data";
    case NM_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void nm_string_free(char* s) { std::free(s); }

nm_status nm_mib_compile(const char* mib_path, const char* raf_path, size_t* record_count) {
  return guarded([&] {
    require(mib_path && raf_path, "mib and raf paths are required");
    std::ifstream in(mib_path, std::ios::binary);
    if (!in) throw nm::Error(nm::Errc::Io, std::string("cannot open ") + mib_path);
    std::stringstream ss;
    ss << in.rdbuf();
    auto records = nm::parse_mib(ss.str());
    nm::write_raf_file(records, raf_path);
    if (record_count) *record_count = records.size();
  });
}

nm_status nm_keygen(unsigned bits, const char* private_path, const char* public_path) {
  return guarded([&] {
    require(private_path, "key path is required");
    auto key = nm::generate_keypair(bits);
    nm::save_key_file(key, private_path, true);
    if (public_path) nm::save_key_file(key, public_path, false);
  });
}

nm_manager* nm_manager_new(const char* config_json) {
  nm_manager* out = nullptr;
  guarded([&] {
    json j = config_json && *config_json ? json::parse(config_json) : json::object();
    nm::ManagerConfig c;
    c.community = j.value("community", c.community);
    if (j.contains("key_file") && !j["key_file"].is_null())
      c.key = std::make_shared<const nm::RsaKeyPair>(nm::load_key_file(j["key_file"].get<std::string>()));
    c.log_path = j.value("log_file", std::string());
    c.discovery_port = j.value("discovery_port", c.discovery_port);
    c.announce_port = j.value("announce_port", c.announce_port);
    c.request_timeout = std::chrono::milliseconds(j.value("timeout_ms", 1000));
    c.udp_retries = j.value("retries", 3);
    c.connect_timeout = std::chrono::milliseconds(j.value("connect_timeout_ms", 2000));
    require(c.request_timeout.count() > 0 && c.udp_retries >= 0, "timeout_ms must be positive, retries >= 0");
    out = new nm_manager{std::make_unique<nm::Manager>(std::move(c))};
  });
  return out;
}

void nm_manager_free(nm_manager* m) { delete m; }

nm_status nm_discover(nm_manager* m, const char* broadcast, int timeout_ms, char** agents_json_out) {
  return guarded([&] {
    require(m, "manager is required");
    require(timeout_ms > 0, "timeout must be positive");
    auto found = m->impl->discover(broadcast ? broadcast : "255.255.255.255", std::chrono::milliseconds(timeout_ms));
    put(agents_json_out, nm::render::agents(found));
  });
}

nm_status nm_manager_listen(nm_manager* m) {
  return guarded([&] {
    require(m, "manager is required");
    m->impl->start_listener();
  });
}

nm_status nm_manager_agents(nm_manager* m, char** out) {
  return guarded([&] {
    require(m, "manager is required");
    put(out, nm::render::agents(m->impl->directory().entries()));
  });
}

nm_status nm_manager_log(nm_manager* m, size_t n, char** out) {
  return guarded([&] {
    require(m, "manager is required");
    json a = json::array();
    for (const auto& e : m->impl->log()->tail(n)) a.push_back(nm::render::log_entry(e));
    put(out, a);
  });
}

nm_session* nm_session_open(nm_manager* m, const char* host, uint16_t tcp_port, uint16_t udp_port,
                            const char* transport, const char* community, int secure) {
  nm_session* out = nullptr;
  guarded([&] {
    require(m && host, "manager and host are required");
    nm::AgentEntry e;
    e.host = host;
    e.tcp_port = tcp_port;
    e.udp_port = udp_port;
    std::optional<std::string> c;
    if (community) c = community;
    auto s = m->impl->open_session(e, transport_arg(transport), c, secure != 0);
    out = new nm_session{m->impl.get(), std::move(s)};
  });
  return out;
}

nm_status nm_session_request(nm_session* s, const char* type, const char* oid, const char* value, char** out) {
  return guarded([&] {
    require(s && type, "session and type are required");
    auto t = nm::render::request_type(type);
    if (!t) throw nm::Error(nm::Errc::BadConfig, std::string("unknown request type '") + type + "'");
    auto r = s->impl->request(*t, oid ? oid : "", value ? value : "");
    put(out, nm::render::result(r));
  });
}

nm_status nm_session_root(nm_session* s, char** out) {
  return guarded([&] {
    require(s, "session is required");
    put(out, nm::render::levels(s->impl->root_level()));
  });
}

nm_status nm_session_configure(nm_session* s, const char* transport, const char* community, int secure) {
  return guarded([&] {
    require(s, "session is required");
    if (community) s->impl->set_community(community);
    if (secure >= 0) s->impl->set_secure(secure != 0);
    if (transport) s->impl->set_transport(transport_arg(transport));
  });
}

void nm_session_close(nm_session* s) {
  if (!s) return;
  guarded([&] { s->impl->close(); });
  delete s;
}

nm_poll* nm_poll_start(nm_manager* m, nm_session* s, const char* oid, int period_ms, nm_event_fn fn, void* user) {
  nm_poll* out = nullptr;
  guarded([&] {
    require(m && s && oid && fn, "manager, session, oid and callback are required");
    std::string o = oid;
    auto task = m->impl->start_poll(s->impl, o, std::chrono::milliseconds(period_ms), [o, fn, user](const nm::PollSample& p) {
      fn(nm::render::poll_sample(o, p).dump().c_str(), user);
    });
    out = new nm_poll{std::move(task)};
  });
  return out;
}

nm_status nm_poll_set_period(nm_poll* p, int period_ms) {
  return guarded([&] {
    require(p, "poll is required");
    require(period_ms >= 100, "period must be at least 100 ms");
    p->impl->set_period(std::chrono::milliseconds(period_ms));
  });
}

void nm_poll_stop(nm_poll* p) {
  if (!p) return;
  p->impl->stop();
  delete p;
}

nm_status nm_trap_subscribe(nm_manager* m, nm_session* s, const char* oid, double threshold, int period_ms,
                            uint16_t report_port, nm_event_fn fn, void* user, uint32_t* subscription_id) {
  return guarded([&] {
    require(m && s && oid && fn, "manager, session, oid and callback are required");
    auto id = m->impl->subscribe_trap(*s->impl, oid, threshold, std::chrono::milliseconds(period_ms), report_port,
                                      [fn, user](const nm::TrapEvent& e) {
                                        fn(nm::render::trap_event(e).dump().c_str(), user);
                                      });
    if (subscription_id) *subscription_id = id;
  });
}

nm_status nm_bench(nm_manager* m, const char* host, uint16_t tcp_port, uint16_t udp_port, int samples,
                   char** out) {
  return guarded([&] {
    require(m, "manager is required");
    require(samples > 0, "samples must be positive");
    std::optional<nm::AgentEntry> agent;
    if (host) {
      nm::AgentEntry e;
      e.host = host;
      e.tcp_port = tcp_port;
      e.udp_port = udp_port;
      agent = e;
    }
    nm::BenchConfig cfg;
    cfg.samples = static_cast<std::size_t>(samples);
    auto report = nm::run_bench(*m->impl, agent, cfg);
    put(out, nm::render::bench_report(report));
  });
}

nm_agent* nm_agent_start(const char* config_path) {
  nm_agent* out = nullptr;
  guarded([&] {
    require(config_path, "config path is required");
    auto agent = std::make_unique<nm::Agent>(nm::AgentConfig::load(config_path));
    agent->start();
    out = new nm_agent{std::move(agent)};
  });
  return out;
}

void nm_agent_ports(const nm_agent* a, uint16_t* tcp_port, uint16_t* udp_port, uint16_t* discovery_port) {
  if (!a) return;
  if (tcp_port) *tcp_port = a->impl->tcp_port();
  if (udp_port) *udp_port = a->impl->udp_port();
  if (discovery_port) *discovery_port = a->impl->discovery_port();
}

void nm_agent_stop(nm_agent* a) {
  if (!a) return;
  a->impl->stop();
  delete a;
}

}  // extern "C"
