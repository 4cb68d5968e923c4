// nmctl: command-line manager.

#include <atomic>
#include <chrono>
#include <csignal>
#include <functional>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "nm/nm.h"

using nlohmann::json;

namespace {

constexpr int kOk = 0, kUsage = 1, kConnection = 2, kAgent = 3;

int exit_for(nm_status s) {
  switch (s) {
    case NM_OK:
      return kOk;
    case NM_ERR_CONNECT:
    case NM_ERR_TIMEOUT:
    case NM_ERR_STOPPED:
      return kConnection;
    case NM_ERR_AGENT:
    case NM_ERR_DENIED:
      return kAgent;
    default:
      return kUsage;
  }
}

int report(nm_status s) {
  std::cerr << "nmctl: " << nm_last_error() << "\n";
  return exit_for(s);
}

// Owns a JSON string handed out by the library.
json take(char* s) {
  json j = json::parse(s);
  nm_string_free(s);
  return j;
}

struct Globals {
  std::string transport = "tcp";
  std::string community = "public";
  bool secure = false;
  std::string key_file;
  std::string log_file;
  int timeout_ms = 1000;
  int retries = 3;
  bool json_out = false;
};

struct AgentAddr {
  std::string host;
  uint16_t tcp = 7770;
  uint16_t udp = 7771;
};

// host[:tcp_port[:udp_port]]
AgentAddr parse_agent(const std::string& text) {
  AgentAddr a;
  auto first = text.find(':');
  a.host = text.substr(0, first);
  if (first == std::string::npos) return a;
  auto second = text.find(':', first + 1);
  a.tcp = static_cast<uint16_t>(std::stoul(text.substr(first + 1, second - first - 1)));
  if (second != std::string::npos) a.udp = static_cast<uint16_t>(std::stoul(text.substr(second + 1)));
  return a;
}

struct Manager {
  nm_manager* m = nullptr;
  ~Manager() { nm_manager_free(m); }
};

struct Session {
  nm_session* s = nullptr;
  ~Session() { nm_session_close(s); }
};

bool make_manager(const Globals& g, Manager& out, const json& extra = json::object()) {
  json cfg{{"community", g.community}, {"timeout_ms", g.timeout_ms}, {"retries", g.retries}};
  if (!g.key_file.empty()) cfg["key_file"] = g.key_file;
  if (!g.log_file.empty()) cfg["log_file"] = g.log_file;
  cfg.update(extra);
  out.m = nm_manager_new(cfg.dump().c_str());
  return out.m != nullptr;
}

int with_session(const Globals& g, const std::string& agent, const std::function<int(Manager&, Session&)>& body) {
  Manager mgr;
  if (!make_manager(g, mgr)) return report(NM_ERR_ARGUMENT);
  AgentAddr a;
  try {
    a = parse_agent(agent);
  } catch (const std::exception&) {
    std::cerr << "nmctl: bad agent address '" << agent << "'\n";
    return kUsage;
  }
  Session s;
  s.s = nm_session_open(mgr.m, a.host.c_str(), a.tcp, a.udp, g.transport.c_str(), g.community.c_str(), g.secure);
  if (!s.s) {
    std::string name = nm_last_error_name();
    std::cerr << "nmctl: " << nm_last_error() << "\n";
    if (name == "ConnectTimeout" || name == "Timeout" || name == "Io" || name == "PeerClosed") return kConnection;
    if (name == "BadConfig" || name == "BadKeyFile" || name == "MissingPrivateExponent") return kUsage;
    return kAgent;
  }
  return body(mgr, s);
}

void print_value_line(const json& r) {
  std::cout << r["instance"].get<std::string>() << " = " << r["value_type"].get<std::string>() << " : "
            << r["value"].get<std::string>() << "\n";
}

int request(const Globals& g, const std::string& agent, const std::string& type, const std::string& oid,
            const std::string& value) {
  return with_session(g, agent, [&](Manager&, Session& s) {
    char* out = nullptr;
    auto st = nm_session_request(s.s, type.c_str(), oid.c_str(), value.c_str(), &out);
    if (st != NM_OK) return report(st);
    auto r = take(out);
    if (g.json_out) {
      std::cout << r.dump(2) << "\n";
    } else if (type == "get") {
      std::cout << r["value"].get<std::string>() << "\n";
    } else if (type == "describe") {
      const auto& rec = r["record"];
      std::cout << "Name: " << rec["name"].get<std::string>() << "\n"
                << "Syntax: " << rec["syntax"].get<std::string>() << "\n"
                << "Access: " << rec["access"].get<std::string>() << "\n"
                << "Status: " << rec["status"].get<std::string>() << "\n"
                << "Description: " << rec["description"].get<std::string>() << "\n";
    } else {
      print_value_line(r);
    }
    return kOk;
  });
}

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

void sleep_interruptible(int ms) {
  auto until = std::chrono::steady_clock::now() + std::chrono::milliseconds(ms);
  while (!g_interrupted && std::chrono::steady_clock::now() < until)
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
}

std::mutex g_print_mu;

void print_event(const char* event, void*) {
  std::lock_guard lock(g_print_mu);
  auto e = json::parse(event);
  if (e["kind"] == "poll")
    std::cout << e["ts"].get<std::string>() << "\t" << (e["ok"].get<bool>() ? "" : "error: ")
              << e["value"].get<std::string>() << std::endl;
  else
    std::cout << e["ts"].get<std::string>() << "\ttrap " << e["id"] << "\t" << e["instance"].get<std::string>()
              << "\tvalue " << e["value"].get<std::string>() << " > " << e["threshold"].get<std::string>()
              << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Network management command-line manager"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--transport", g.transport, "tcp or udp")->check(CLI::IsMember({"tcp", "udp"}));
  app.add_option("--community", g.community, "community string");
  app.add_flag("--secure", g.secure, "sign requests and ask for encrypted responses");
  app.add_option("--key-file", g.key_file, "RSA key pair file (needed with --secure)");
  app.add_option("--log-file", g.log_file, "append one line per request to this file");
  app.add_option("--timeout", g.timeout_ms, "per-attempt timeout in ms")->check(CLI::PositiveNumber);
  app.add_option("--retries", g.retries, "UDP retries")->check(CLI::NonNegativeNumber);
  app.add_flag("--json", g.json_out, "print raw JSON results");

  int rc = kOk;

  auto* mib = app.add_subcommand("mib", "MIB compiler");
  mib->require_subcommand(1);
  auto* compile = mib->add_subcommand("compile", "compile a MIB text file into a RAF");
  std::string mib_in, raf_out;
  compile->add_option("input", mib_in)->required();
  compile->add_option("output", raf_out)->required();
  compile->callback([&] {
    size_t n = 0;
    auto st = nm_mib_compile(mib_in.c_str(), raf_out.c_str(), &n);
    if (st != NM_OK) {
      rc = report(st);
      return;
    }
    std::cout << n << " records written to " << raf_out << "\n";
  });

  auto* keygen = app.add_subcommand("keygen", "generate an RSA key pair file");
  unsigned bits = 1024;
  std::string key_out, pub_out;
  keygen->add_option("output", key_out)->required();
  keygen->add_option("--bits", bits)->check(CLI::IsMember({512, 1024, 2048, 3072, 4096}));
  keygen->add_option("--public", pub_out, "also write the public half here");
  keygen->callback([&] {
    auto st = nm_keygen(bits, key_out.c_str(), pub_out.empty() ? nullptr : pub_out.c_str());
    if (st != NM_OK) rc = report(st);
  });

  auto* discover = app.add_subcommand("discover", "broadcast a discovery probe");
  std::string broadcast = "255.255.255.255";
  int disc_timeout = 2000;
  int disc_port = 7772;
  discover->add_option("--broadcast", broadcast);
  discover->add_option("--wait", disc_timeout, "collect replies for this many ms")->check(CLI::PositiveNumber);
  discover->add_option("--port", disc_port, "discovery port")->check(CLI::Range(1, 65535));
  discover->callback([&] {
    Manager mgr;
    if (!make_manager(g, mgr, {{"discovery_port", disc_port}, {"announce_port", 0}})) {
      rc = report(NM_ERR_ARGUMENT);
      return;
    }
    char* out = nullptr;
    auto st = nm_discover(mgr.m, broadcast.c_str(), disc_timeout, &out);
    if (st != NM_OK) {
      rc = report(st);
      return;
    }
    auto agents = take(out);
    if (g.json_out) {
      std::cout << agents.dump(2) << "\n";
      return;
    }
    for (const auto& a : agents)
      std::cout << a["host"].get<std::string>() << ":" << a["tcp_port"] << ":" << a["udp_port"] << "\n";
  });

  std::string agent, oid, value;
  for (const char* type : {"get", "getnext", "set", "describe"}) {
    auto* sub = app.add_subcommand(type, std::string(type) + " request");
    sub->add_option("agent", agent, "host[:tcp_port[:udp_port]]")->required();
    sub->add_option("oid", oid)->required();
    if (std::string(type) == "set") sub->add_option("value", value)->required();
    sub->callback([&, type] { rc = request(g, agent, type, oid, value); });
  }

  auto* walk = app.add_subcommand("walk", "iterate GET_NEXT from an OID until EndOfMib");
  walk->add_option("agent", agent)->required();
  walk->add_option("oid", oid)->required();
  walk->callback([&] {
    rc = with_session(g, agent, [&](Manager&, Session& s) {
      std::string cursor = oid;
      while (true) {
        char* out = nullptr;
        auto st = nm_session_request(s.s, "getnext", cursor.c_str(), nullptr, &out);
        if (st != NM_OK) {
          if (std::string(nm_last_error_name()) == "EndOfMib") return kOk;
          return report(st);
        }
        auto r = take(out);
        cursor = r["instance"].get<std::string>();
        print_value_line(r);
      }
    });
  });

  auto* levels = app.add_subcommand("levels", "list the children (or, with --up, the parent level) of a node");
  bool up = false;
  levels->add_option("agent", agent)->required();
  levels->add_option("oid", oid)->required();
  levels->add_flag("--up", up, "UPPER_LEVEL instead of NEXT_LEVEL");
  levels->callback([&] {
    rc = with_session(g, agent, [&](Manager&, Session& s) {
      char* out = nullptr;
      auto st = nm_session_request(s.s, up ? "upper_level" : "next_level", oid.c_str(), nullptr, &out);
      if (st != NM_OK) return report(st);
      auto r = take(out);
      for (const auto& e : r["levels"]) std::cout << e["name"].get<std::string>() << "\t" << e["id"] << "\n";
      return kOk;
    });
  });

  auto* poll = app.add_subcommand("poll", "GET an instance periodically");
  int period = 1000, duration = 5000;
  poll->add_option("agent", agent)->required();
  poll->add_option("oid", oid)->required();
  poll->add_option("--period", period, "ms")->check(CLI::Range(100, 86'400'000));
  poll->add_option("--duration", duration, "ms to run (0: until interrupted)")->check(CLI::NonNegativeNumber);
  poll->callback([&] {
    rc = with_session(g, agent, [&](Manager& mgr, Session& s) {
      auto* p = nm_poll_start(mgr.m, s.s, oid.c_str(), period, print_event, nullptr);
      if (!p) return report(NM_ERR_ARGUMENT);
      sleep_interruptible(duration ? duration : INT32_MAX);
      nm_poll_stop(p);
      return kOk;
    });
  });

  auto* trap = app.add_subcommand("trap", "subscribe to a threshold trap and print reports");
  double threshold = 0;
  int report_port = 0;
  trap->add_option("agent", agent)->required();
  trap->add_option("oid", oid)->required();
  trap->add_option("--threshold", threshold)->required();
  trap->add_option("--period", period, "monitoring period in ms")->check(CLI::Range(100, 86'400'000));
  trap->add_option("--duration", duration, "ms to listen (0: until interrupted)")->check(CLI::NonNegativeNumber);
  trap->add_option("--report-port", report_port, "local UDP port for reports (0: any)")->check(CLI::Range(0, 65535));
  trap->callback([&] {
    rc = with_session(g, agent, [&](Manager& mgr, Session& s) {
      uint32_t id = 0;
      auto st = nm_trap_subscribe(mgr.m, s.s, oid.c_str(), threshold, period, static_cast<uint16_t>(report_port),
                                  print_event, nullptr, &id);
      if (st != NM_OK) return report(st);
      std::cerr << "subscription " << id << "\n";
      sleep_interruptible(duration ? duration : INT32_MAX);
      return kOk;
    });
  });

  auto* bench = app.add_subcommand("bench", "response-time benchmark");
  int samples = 30;
  bool machine_only = false;
  bench->add_option("agent", agent)->required();
  bench->add_option("--samples", samples)->check(CLI::Range(30, 100000));
  bench->add_flag("--machine", machine_only, "print only the machine-readable lines");
  bench->callback([&] {
    Manager mgr;
    if (!make_manager(g, mgr)) {
      rc = report(NM_ERR_ARGUMENT);
      return;
    }
    AgentAddr a;
    try {
      a = parse_agent(agent);
    } catch (const std::exception&) {
      std::cerr << "nmctl: bad agent address '" << agent << "'\n";
      rc = kUsage;
      return;
    }
    char* out = nullptr;
    auto st = nm_bench(mgr.m, a.host.c_str(), a.tcp, a.udp, samples, &out);
    if (st != NM_OK) {
      rc = report(st);
      return;
    }
    auto r = take(out);
    if (g.json_out) {
      std::cout << r.dump(2) << "\n";
    } else {
      if (!machine_only) std::cout << r["text"].get<std::string>() << "\n";
      for (const auto& l : r["lines"]) std::cout << l.get<std::string>() << "\n";
    }
    bool any = false;
    for (const auto& c : r["cells"]) any = any || c["available"].get<bool>();
    if (!any) rc = kAgent;
  });

  if (argc <= 1) {
    std::cerr << app.help();
    return kUsage;
  }
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  return rc;
}
