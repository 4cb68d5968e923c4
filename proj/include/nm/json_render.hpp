#pragma once

// JSON renderings of manager results shared by the C API and the gateway.

#include <string>
#include <vector>

#include "json.hpp"
#include "nm/manager.hpp"

namespace nm::render {

using nlohmann::json;

inline json levels(const std::vector<LevelEntry>& entries) {
  json a = json::array();
  for (const auto& e : entries) a.push_back({{"name", e.name}, {"id", e.identifier}});
  return a;
}

inline std::vector<LevelEntry> levels_from(const json& a) {
  std::vector<LevelEntry> out;
  for (const auto& e : a) out.push_back({e.at("name").get<std::string>(), e.at("id").get<std::uint32_t>()});
  return out;
}

inline json agent(const AgentEntry& e) {
  return {{"host", e.host},
          {"tcp_port", e.tcp_port},
          {"udp_port", e.udp_port},
          {"first_seen", iso8601(e.first_seen)},
          {"last_seen", iso8601(e.last_seen)}};
}

inline json agents(const std::vector<AgentEntry>& entries) {
  json a = json::array();
  for (const auto& e : entries) a.push_back(agent(e));
  return a;
}

inline std::optional<MessageType> request_type(std::string_view t) {
  if (t == "get") return MessageType::Get;
  if (t == "getnext" || t == "get_next") return MessageType::GetNext;
  if (t == "set") return MessageType::Set;
  if (t == "describe") return MessageType::Describe;
  if (t == "next_level" || t == "next") return MessageType::NextLevel;
  if (t == "upper_level" || t == "upper") return MessageType::UpperLevel;
  return std::nullopt;
}

/// "fields" carries the complete response; the other keys are views of it.
inline json result(const Result& r) {
  json j{{"type", message_type_name(r.request)},
         {"fields", r.fields},
         {"rtt_us", r.round_trip_us},
         {"encrypted", r.was_encrypted}};
  switch (r.request) {
    case MessageType::Get:
    case MessageType::GetNext:
    case MessageType::Set:
      if (r.fields.size() >= 3) {
        j["instance"] = r.instance();
        j["value_type"] = r.value_type();
        j["value"] = r.value();
      }
      break;
    case MessageType::Describe:
      if (r.fields.size() >= 5)
        j["record"] = {{"name", r.fields[0]},
                       {"syntax", r.fields[1]},
                       {"access", r.fields[2]},
                       {"status", r.fields[3]},
                       {"description", r.fields[4]}};
      break;
    case MessageType::Initialise:
    case MessageType::NextLevel:
    case MessageType::UpperLevel:
      if (!r.fields.empty()) j["levels"] = levels(r.levels());
      break;
    default:
      break;
  }
  return j;
}

inline std::optional<MessageType> type_from_name(std::string_view name) {
  for (int t = 0; t < 256; ++t) {
    auto tag = static_cast<std::uint8_t>(t);
    if (is_known_type(tag) && message_type_name(static_cast<MessageType>(tag)) == name)
      return static_cast<MessageType>(tag);
  }
  return std::nullopt;
}

/// Inverse of result().
inline Result result_from(const json& j) {
  Result r;
  auto t = type_from_name(j.at("type").get<std::string>());
  if (!t) throw Error(Errc::BadRequest, "unknown result type");
  r.request = *t;
  r.fields = j.at("fields").get<std::vector<std::string>>();
  r.round_trip_us = j.at("rtt_us").get<std::int64_t>();
  r.was_encrypted = j.at("encrypted").get<bool>();
  return r;
}

inline json log_entry(const LogEntry& e) {
  return {{"ts", iso8601(e.timestamp)},
          {"agent", e.agent},
          {"type", message_type_name(e.type)},
          {"oid", e.oid},
          {"outcome", e.outcome},
          {"rtt_us", e.round_trip_us}};
}

inline json poll_sample(const std::string& oid, const PollSample& p) {
  return {{"kind", "poll"}, {"oid", oid}, {"ts", iso8601(p.timestamp)}, {"ok", p.ok}, {"value", p.value}};
}

inline json trap_event(const TrapEvent& e) {
  return {{"kind", "trap"},
          {"id", e.subscription_id},
          {"instance", e.instance},
          {"value", e.value},
          {"threshold", e.threshold},
          {"agent_ms", e.agent_unix_ms},
          {"ts", iso8601(e.received)},
          {"from", e.from.str()}};
}

inline json directory_change(const DirectoryChange& c) {
  return {{"kind", "directory"}, {"change", change_kind_name(c.kind)}, {"agent", agent(c.entry)}};
}

inline json bench_report(const BenchReport& report) {
  json cells = json::array();
  for (const auto& c : report.cells)
    cells.push_back({{"type", message_type_name(c.type)},
                     {"group", c.group},
                     {"secure", c.secure},
                     {"transport", transport_name(c.transport)},
                     {"available", c.available},
                     {"samples", c.samples},
                     {"mean_us", c.mean_us},
                     {"median_us", c.median_us},
                     {"p95_us", c.p95_us}});
  return {{"text", report.text()}, {"lines", report.machine_lines()}, {"cells", cells}};
}

}  // namespace nm::render
