#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nm/mib_tree.hpp"

namespace nm {

enum class ValueType { Integer, Counter, Gauge, TimeTicks, String, ObjectId, IpAddress };

std::string_view value_type_name(ValueType t) noexcept;
std::optional<ValueType> parse_value_type(std::string_view name) noexcept;
bool is_numeric(ValueType t) noexcept;

struct TypedValue {
  ValueType type = ValueType::String;
  std::string text;

  /// Integer value for numeric types.
  std::optional<long long> number() const;
  bool operator==(const TypedValue&) const = default;
};

enum class WriteStatus { Ok, NoSuchInstance, BadValue };

/// Source of instance values served by the agent.
class DeviceStateProvider {
 public:
  virtual ~DeviceStateProvider() = default;

  /// Throws Errc::NoSuchInstance for unknown instances.
  virtual TypedValue read(const Oid& instance) = 0;
  virtual WriteStatus write(const Oid& instance, const std::string& value) = 0;
  /// Sorted in lexicographic OID order.
  virtual std::vector<Oid> instances() const = 0;
};

/// In-memory device loaded from lines of the form
///
///   <numeric oid> = <type> : <value> [ramp(<per-second rate>)]
///
/// A ramp makes a numeric value grow linearly from the time it was loaded
/// (or last written). Blank lines and lines starting with '#' are ignored.
class SimulatedDevice final : public DeviceStateProvider {
 public:
  using Clock = std::chrono::steady_clock;
  using ClockFn = std::function<Clock::time_point()>;

  explicit SimulatedDevice(ClockFn clock = nullptr);

  static std::unique_ptr<SimulatedDevice> parse(std::string_view text, ClockFn clock = nullptr);
  static std::unique_ptr<SimulatedDevice> load(const std::string& path, ClockFn clock = nullptr);

  void define(const Oid& instance, TypedValue value, std::optional<double> ramp = std::nullopt);

  TypedValue read(const Oid& instance) override;
  WriteStatus write(const Oid& instance, const std::string& value) override;
  std::vector<Oid> instances() const override;

 private:
  struct Entry {
    TypedValue base;
    std::optional<double> ramp;
    Clock::time_point origin;
  };
  struct OidLess {
    bool operator()(const Oid& a, const Oid& b) const { return oid_less(a, b); }
  };

  Clock::time_point now() const { return clock_ ? clock_() : Clock::now(); }

  ClockFn clock_;
  mutable std::mutex mu_;
  std::map<Oid, Entry, OidLess> entries_;
};

/// Checks that text is a legal value for type t.
bool valid_value(ValueType t, std::string_view text);

}  // namespace nm
