#include "nm/device.hpp"

#include <arpa/inet.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nm/error.hpp"

namespace nm {

namespace {

constexpr std::pair<ValueType, std::string_view> kTypeNames[] = {
    {ValueType::Integer, "INTEGER"},   {ValueType::Counter, "Counter"}, {ValueType::Gauge, "Gauge"},
    {ValueType::TimeTicks, "TimeTicks"}, {ValueType::String, "STRING"},  {ValueType::ObjectId, "OID"},
    {ValueType::IpAddress, "IpAddress"},
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<long long> parse_int(std::string_view s) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

std::string_view value_type_name(ValueType t) noexcept {
  for (auto [type, name] : kTypeNames)
    if (type == t) return name;
  return "?";
}

std::optional<ValueType> parse_value_type(std::string_view name) noexcept {
  for (auto [type, n] : kTypeNames)
    if (n == name) return type;
  return std::nullopt;
}

bool is_numeric(ValueType t) noexcept {
  return t == ValueType::Integer || t == ValueType::Counter || t == ValueType::Gauge || t == ValueType::TimeTicks;
}

std::optional<long long> TypedValue::number() const {
  if (!is_numeric(type)) return std::nullopt;
  return parse_int(text);
}

bool valid_value(ValueType t, std::string_view text) {
  switch (t) {
    case ValueType::Integer:
      return parse_int(text).has_value();
    case ValueType::Counter:
    case ValueType::Gauge:
    case ValueType::TimeTicks: {
      auto v = parse_int(text);
      return v && *v >= 0;
    }
    case ValueType::String:
      return true;
    case ValueType::ObjectId:
      try {
        oid_from_string(text);
        return true;
      } catch (const Error&) {
        return false;
      }
    case ValueType::IpAddress: {
      in_addr a{};
      return ::inet_pton(AF_INET, std::string(text).c_str(), &a) == 1;
    }
  }
  return false;
}

SimulatedDevice::SimulatedDevice(ClockFn clock) : clock_(std::move(clock)) {}

void SimulatedDevice::define(const Oid& instance, TypedValue value, std::optional<double> ramp) {
  if (ramp && !is_numeric(value.type)) throw Error(Errc::BadConfig, "ramp on a non-numeric value");
  std::lock_guard lock(mu_);
  entries_[instance] = Entry{std::move(value), ramp, now()};
}

std::unique_ptr<SimulatedDevice> SimulatedDevice::parse(std::string_view text, ClockFn clock) {
  auto dev = std::make_unique<SimulatedDevice>(std::move(clock));
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto where = [&] { return "device state line " + std::to_string(lineno); };
    auto eq = line.find('=');
    auto colon = line.find(':', eq == std::string_view::npos ? 0 : eq);
    if (eq == std::string_view::npos || colon == std::string_view::npos)
      throw Error(Errc::BadConfig, where() + ": expected 'oid = type : value'");
    Oid oid;
    try {
      oid = oid_from_string(trim(line.substr(0, eq)));
    } catch (const Error& e) {
      throw Error(Errc::BadConfig, where() + ": " + e.what());
    }
    auto type = parse_value_type(trim(line.substr(eq + 1, colon - eq - 1)));
    if (!type) throw Error(Errc::BadConfig, where() + ": unknown type");
    auto value = trim(line.substr(colon + 1));

    std::optional<double> ramp;
    if (auto r = value.rfind("ramp("); r != std::string_view::npos && value.back() == ')' &&
                                      (value.front() != '"' || value.find('"', 1) < r)) {
      auto rate = std::string(value.substr(r + 5, value.size() - r - 6));
      char* end = nullptr;
      double v = std::strtod(rate.c_str(), &end);
      if (rate.empty() || *end != '\0' || !std::isfinite(v)) throw Error(Errc::BadConfig, where() + ": bad ramp rate");
      ramp = v;
      value = trim(value.substr(0, r));
    }
    std::string text_value(value);
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') text_value = value.substr(1, value.size() - 2);
    if (!valid_value(*type, text_value)) throw Error(Errc::BadConfig, where() + ": value does not match type");
    try {
      dev->define(oid, {*type, text_value}, ramp);
    } catch (const Error& e) {
      throw Error(Errc::BadConfig, where() + ": " + e.what());
    }
  }
  return dev;
}

std::unique_ptr<SimulatedDevice> SimulatedDevice::load(const std::string& path, ClockFn clock) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::BadConfig, "cannot open device state " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), std::move(clock));
}

TypedValue SimulatedDevice::read(const Oid& instance) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(instance);
  if (it == entries_.end()) throw Error(Errc::NoSuchInstance, "no instance " + oid_to_string(instance));
  const Entry& e = it->second;
  if (!e.ramp) return e.base;
  double elapsed = std::chrono::duration<double>(now() - e.origin).count();
  long long v = *e.base.number() + static_cast<long long>(std::floor(*e.ramp * elapsed));
  if (e.base.type != ValueType::Integer && v < 0) v = 0;
  return {e.base.type, std::to_string(v)};
}

WriteStatus SimulatedDevice::write(const Oid& instance, const std::string& value) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(instance);
  if (it == entries_.end()) return WriteStatus::NoSuchInstance;
  if (!valid_value(it->second.base.type, value)) return WriteStatus::BadValue;
  it->second.base.text = value;
  it->second.origin = now();
  return WriteStatus::Ok;
}

std::vector<Oid> SimulatedDevice::instances() const {
  std::lock_guard lock(mu_);
  std::vector<Oid> out;
  out.reserve(entries_.size());
  for (const auto& [oid, e] : entries_) out.push_back(oid);
  return out;
}

}  // namespace nm
