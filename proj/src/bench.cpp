#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "nm/manager.hpp"

namespace nm {

namespace {

constexpr std::string_view kMib2 = "1.3.6.1.2.1.";
constexpr std::string_view kSystem = "1.3.6.1.2.1.1.";

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

void walk_groups(ManagerSession& s, std::vector<std::string>& system, std::vector<std::string>& other) {
  std::string cursor(kMib2.substr(0, kMib2.size() - 1));
  for (int i = 0; i < 1000; ++i) {
    Result r;
    try {
      r = s.get_next(cursor);
    } catch (const Error&) {
      return;  // EndOfMib or unreachable
    }
    cursor = r.instance();
    if (!starts_with(cursor, kMib2)) return;
    (starts_with(cursor, kSystem) ? system : other).push_back(cursor);
  }
}

BenchCell run_cell(Manager& manager, const AgentEntry& agent, const BenchConfig& cfg, const std::string& group,
                   const std::vector<std::string>& oids, bool secure, Transport transport) {
  BenchCell cell;
  cell.group = group;
  cell.secure = secure;
  cell.transport = transport;
  if (oids.empty()) return cell;

  std::shared_ptr<ManagerSession> session;
  try {
    session = manager.open_session(agent, transport, cfg.community, secure);
  } catch (const Error&) {
    return cell;
  }
  std::vector<double> samples;
  std::size_t consecutive_timeouts = 0;
  std::size_t issued = 0;
  const std::size_t total = cfg.warmup + cfg.samples;
  std::size_t attempts = 0;
  while (samples.size() < cfg.samples && attempts < total * 4) {
    const auto& oid = oids[attempts % oids.size()];
    ++attempts;
    try {
      auto r = session->get(oid);
      consecutive_timeouts = 0;
      if (issued++ >= cfg.warmup) samples.push_back(static_cast<double>(r.round_trip_us));
    } catch (const Error& e) {
      if (e.code() == Errc::Timeout || e.code() == Errc::PeerClosed || e.code() == Errc::ConnectTimeout) {
        if (++consecutive_timeouts >= cfg.max_consecutive_timeouts) return cell;
      }
    }
  }
  session->close();
  if (samples.size() < cfg.samples) return cell;
  auto st = bench_stats(samples);
  cell.available = true;
  cell.samples = samples.size();
  cell.mean_us = st.mean;
  cell.median_us = st.median;
  cell.p95_us = st.p95;
  return cell;
}

}  // namespace

BenchStats bench_stats(std::vector<double> samples) {
  BenchStats st;
  if (samples.empty()) return st;
  std::sort(samples.begin(), samples.end());
  st.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  auto n = samples.size();
  st.median = n % 2 ? samples[n / 2] : (samples[n / 2 - 1] + samples[n / 2]) / 2;
  auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  st.p95 = samples[std::max<std::size_t>(rank, 1) - 1];
  return st;
}

bool BenchReport::any_available() const {
  return std::any_of(cells.begin(), cells.end(), [](const BenchCell& c) { return c.available; });
}

std::string BenchReport::text() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-5s %-7s %-6s %-9s %5s %12s %12s %12s\n", "type", "group", "secure", "transport",
                "n", "mean_us", "median_us", "p95_us");
  out += line;
  for (const auto& c : cells) {
    if (c.available)
      std::snprintf(line, sizeof line, "%-5s %-7s %-6s %-9s %5zu %12.1f %12.1f %12.1f\n",
                    std::string(message_type_name(c.type)).c_str(), c.group.c_str(), c.secure ? "on" : "off",
                    std::string(transport_name(c.transport)).c_str(), c.samples, c.mean_us, c.median_us, c.p95_us);
    else
      std::snprintf(line, sizeof line, "%-5s %-7s %-6s %-9s %5s %12s %12s %12s\n",
                    std::string(message_type_name(c.type)).c_str(), c.group.c_str(), c.secure ? "on" : "off",
                    std::string(transport_name(c.transport)).c_str(), "-", "unavailable", "-", "-");
    out += line;
  }
  return out;
}

std::vector<std::string> BenchReport::machine_lines() const {
  std::vector<std::string> out;
  char buf[64];
  for (const auto& c : cells) {
    std::string l = "bench\t" + std::string(message_type_name(c.type)) + "\t" + c.group + "\t" +
                    (c.secure ? "on" : "off") + "\t" + std::string(transport_name(c.transport)) + "\t";
    if (c.available) {
      std::snprintf(buf, sizeof buf, "%zu\t%.1f\t%.1f\t%.1f", c.samples, c.mean_us, c.median_us, c.p95_us);
      l += buf;
    } else {
      l += "0\tunavailable\tunavailable\tunavailable";
    }
    out.push_back(std::move(l));
  }
  return out;
}

BenchReport run_bench(Manager& manager, const std::optional<AgentEntry>& agent, const BenchConfig& config) {
  std::vector<std::string> system = config.system_oids;
  std::vector<std::string> other = config.other_oids;
  if (agent && system.empty() && other.empty()) {
    try {
      auto s = manager.open_session(*agent, Transport::Tcp, config.community, false);
      walk_groups(*s, system, other);
      s->close();
    } catch (const Error&) {
    }
  }
  BenchReport report;
  for (const auto& [group, oids] : {std::pair{"system", &system}, std::pair{"other", &other}}) {
    for (bool secure : {false, true}) {
      for (Transport t : {Transport::Tcp, Transport::Udp}) {
        if (agent) {
          report.cells.push_back(run_cell(manager, *agent, config, group, *oids, secure, t));
        } else {
          BenchCell c;
          c.group = group;
          c.secure = secure;
          c.transport = t;
          report.cells.push_back(c);
        }
      }
    }
  }
  return report;
}

}  // namespace nm
