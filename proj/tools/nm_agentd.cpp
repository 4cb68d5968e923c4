// nm-agentd: agent daemon.

#include <csignal>
#include <cstdio>
#include <cstring>
#include <string>

#include "nm/nm.h"

namespace {

int exit_code_for(const std::string& error_name) {
  if (error_name == "CorruptImage") return 2;
  if (error_name == "PortInUse") return 3;
  if (error_name == "BadKeyFile") return 4;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2 || std::strcmp(argv[1], "--help") == 0 || std::strcmp(argv[1], "-h") == 0) {
    std::fprintf(stderr,
                 "usage: nm-agentd <config-file>\n"
                 "exit codes: 1 bad config, 2 bad RAF, 3 port in use, 4 bad key file\n");
    return 1;
  }

  // Block the termination signals before any library thread starts so that
  // only sigwait below receives them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  sigaddset(&set, SIGHUP);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  nm_agent* agent = nm_agent_start(argv[1]);
  if (!agent) {
    std::fprintf(stderr, "nm-agentd: %s\n", nm_last_error());
    return exit_code_for(nm_last_error_name());
  }
  uint16_t tcp = 0, udp = 0, disc = 0;
  nm_agent_ports(agent, &tcp, &udp, &disc);
  std::printf("nm-agentd: serving tcp %u udp %u discovery %u\n", tcp, udp, disc);
  std::fflush(stdout);

  int sig = 0;
  sigwait(&set, &sig);
  nm_agent_stop(agent);
  std::printf("nm-agentd: stopped on signal %d\n", sig);
  return 0;
}
