#pragma once

#include <memory>
#include <string>
#include <vector>

#include "nm/agent.hpp"
#include "nm/manager.hpp"
#include "nm/raf_store.hpp"
#include "support.hpp"

namespace nm::test {

inline const std::vector<std::uint8_t>& mib2_raf() {
  static const auto bytes = write_raf(parse_mib(mib2_text()));
  return bytes;
}

inline std::string lab_state_text() { return read_file(data_path("agent/lab-sim.state")); }

inline std::shared_ptr<const RsaKeyPair> test_key(unsigned bits = 1024) {
  static auto k1024 = std::make_shared<const RsaKeyPair>(generate_keypair(1024, 20261014));
  if (bits == 1024) return k1024;
  return std::make_shared<const RsaKeyPair>(generate_keypair(bits, 20261014 + bits));
}

/// Loopback agent config with ephemeral ports.
inline AgentConfig loopback_config() {
  AgentConfig c;
  c.bind_address = "127.0.0.1";
  c.tcp_port = 0;
  c.udp_port = 0;
  c.discovery_port = 0;
  c.public_key = test_key()->public_key();
  return c;
}

inline std::unique_ptr<AgentCore> make_core(AgentConfig cfg, std::shared_ptr<DeviceStateProvider> provider = nullptr) {
  if (!provider) provider = SimulatedDevice::parse(lab_state_text());
  MemorySource src(mib2_raf());
  return std::make_unique<AgentCore>(std::move(cfg), MibTree::build(src),
                                     [] { return std::make_unique<MemorySource>(mib2_raf()); }, std::move(provider));
}

inline std::unique_ptr<Agent> start_agent(AgentConfig cfg = loopback_config(),
                                          std::shared_ptr<DeviceStateProvider> provider = nullptr) {
  auto a = std::make_unique<Agent>(make_core(std::move(cfg), std::move(provider)));
  a->start();
  return a;
}

inline AgentEntry entry_for(const Agent& a) {
  AgentEntry e;
  e.host = "127.0.0.1";
  e.tcp_port = a.tcp_port();
  e.udp_port = a.udp_port();
  return e;
}

}  // namespace nm::test
