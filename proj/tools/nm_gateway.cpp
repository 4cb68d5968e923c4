// nm-gateway: HTTP and server-push front-end over the manager.

#include <csignal>
#include <cstdio>
#include <pthread.h>

#include "CLI11.hpp"
#include "nm/gateway.hpp"

int main(int argc, char** argv) {
  CLI::App app{"HTTP gateway over the network manager"};
  nm::GatewayConfig cfg;
  std::string key_file;
  int timeout_ms = 1000;
  app.add_option("--bind", cfg.bind_address, "listen address")->capture_default_str();
  app.add_option("--port", cfg.port, "listen port (0: any)")->capture_default_str();
  app.add_option("--broadcast", cfg.broadcast_address, "discovery broadcast address")->capture_default_str();
  app.add_option("--community", cfg.manager.community, "default community")->capture_default_str();
  app.add_option("--key-file", key_file, "manager private key for secure sessions");
  app.add_option("--log-file", cfg.manager.log_path, "operation log file");
  app.add_option("--timeout", timeout_ms, "request timeout in ms")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--retries", cfg.manager.udp_retries, "UDP retries")->check(CLI::NonNegativeNumber)->capture_default_str();
  app.add_option("--discovery-port", cfg.manager.discovery_port)->capture_default_str();
  app.add_option("--announce-port", cfg.manager.announce_port)->capture_default_str();
  bool no_listen = false;
  app.add_flag("--no-listen", no_listen, "do not listen for agent announcements");
  CLI11_PARSE(app, argc, argv);

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  try {
    cfg.manager.request_timeout = std::chrono::milliseconds(timeout_ms);
    if (!key_file.empty()) cfg.manager.key = std::make_shared<const nm::RsaKeyPair>(nm::load_key_file(key_file));
    nm::Gateway gw(cfg);
    if (!no_listen) gw.manager().start_listener();
    gw.start();
    std::printf("nm-gateway: listening on http://%s:%u\n", cfg.bind_address.c_str(), gw.port());
    std::fflush(stdout);
    int sig = 0;
    sigwait(&set, &sig);
    gw.stop();
  } catch (const nm::Error& e) {
    std::fprintf(stderr, "nm-gateway: %s\n", e.what());
    return e.code() == nm::Errc::PortInUse ? 3 : 1;
  }
  return 0;
}
