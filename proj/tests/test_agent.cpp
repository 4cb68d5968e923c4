#include <functional>
#include <random>

#include "agent_fixture.hpp"
#include "doctest.h"
#include "nm/agent.hpp"

using namespace nm;
using namespace nm::test;

namespace {

Message req(MessageType t, std::vector<std::string> fields, std::uint32_t corr = 42) {
  return Message{t, 0, corr, std::move(fields)};
}

Message signed_req(Message m, const RsaKeyPair& key, bool encrypted = false) {
  m.flags = encrypted ? flags::kEncrypted : 0;
  auto sig = sign(signed_span(m), key);
  m.flags |= flags::kSigned;
  m.fields.push_back(to_string(sig));
  return m;
}

std::string reason_of(const Message& m) {
  REQUIRE(m.type == MessageType::ErrorResponse);
  return m.fields.at(0);
}

// Replays a fixed sample sequence for a single instance.
class ScriptedProvider final : public DeviceStateProvider {
 public:
  explicit ScriptedProvider(std::vector<std::string> values) : values_(std::move(values)) {}
  TypedValue read(const Oid&) override {
    auto v = values_.at(std::min(pos_, values_.size() - 1));
    ++pos_;
    if (v == "fail") throw Error(Errc::NoSuchInstance, "scripted failure");
    return {ValueType::Counter, v};
  }
  WriteStatus write(const Oid&, const std::string&) override { return WriteStatus::Ok; }
  std::vector<Oid> instances() const override { return {}; }

 private:
  std::vector<std::string> values_;
  std::size_t pos_ = 0;
};

void for_each_node(const MibTreeNode& n, const std::function<void(const MibTreeNode&)>& f) {
  f(n);
  for (const auto& c : n.children) for_each_node(*c, f);
}

}  // namespace

TEST_CASE("config parse: keys, defaults and relative paths") {
  auto c = AgentConfig::parse(
      "# sample\n"
      "raf = mib2.raf\n"
      "tcp_port = 8000\nudp_port = 8001\ndiscovery_port = 8002\n"
      "community = secret\n"
      "device_state = state.txt\n"
      "announce = 10.0.0.255, 127.0.0.1:9000\n"
      "max_sessions = 5\nudp_idle_ms = 250\n",
      "/etc/nm");
  CHECK(c.raf_path == "/etc/nm/mib2.raf");
  CHECK(c.device_state_path == "/etc/nm/state.txt");
  CHECK(c.tcp_port == 8000);
  CHECK(c.udp_port == 8001);
  CHECK(c.discovery_port == 8002);
  CHECK(c.community == "secret");
  REQUIRE(c.announce_targets.size() == 2);
  CHECK(c.announce_targets[0] == net::Endpoint{"10.0.0.255", kDefaultAnnouncePort});
  CHECK(c.announce_targets[1] == net::Endpoint{"127.0.0.1", 9000});
  CHECK(c.max_sessions == 5);
  CHECK(c.udp_idle_expiry == std::chrono::milliseconds(250));
  CHECK_FALSE(c.require_security);

  AgentConfig d;
  CHECK(d.tcp_port == 7770);
  CHECK(d.udp_port == 7771);
  CHECK(d.discovery_port == 7772);
}

TEST_CASE("config validation") {
  auto bad = [](const std::string& text) {
    try {
      AgentConfig::parse(text).validate();
      return false;
    } catch (const Error& e) {
      return e.code() == Errc::BadConfig;
    }
  };
  CHECK(bad("colour = blue\n"));
  CHECK(bad("community =\n"));
  CHECK(bad("tcp_port = 9000\nudp_port = 9000\n"));
  CHECK(bad("tcp_port = 70000\n"));
  CHECK(bad("security = required\n"));
  CHECK(bad("security = maybe\n"));
  CHECK(bad("max_sessions = 0\n"));
  CHECK(bad("no equals sign\n"));
  CHECK_FALSE(bad("tcp_port = 0\nudp_port = 0\ndiscovery_port = 0\n"));
  try {
    AgentConfig::parse("key_file = /nonexistent.key\n");
    FAIL("missing key accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BadKeyFile);
  }
}

TEST_CASE("from_config reports a bad RAF as CorruptImage") {
  auto dir = temp_dir("badraf");
  AgentConfig c = loopback_config();
  c.raf_path = (dir / "missing.raf").string();
  try {
    AgentCore::from_config(c);
    FAIL("accepted missing RAF");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::CorruptImage);
  }
  {
    std::ofstream(dir / "junk.raf") << "not a raf";
  }
  c.raf_path = (dir / "junk.raf").string();
  CHECK_THROWS_AS(AgentCore::from_config(c), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("authenticate_request") {
  auto key = test_key();
  AgentConfig cfg = loopback_config();
  auto get = req(MessageType::Get, {"public", "1.3.6.1.2.1.1.1.0"});

  auto a = authenticate_request(get, cfg, false);
  CHECK(a.accepted);
  CHECK_FALSE(a.verified);

  auto wrong = req(MessageType::Get, {"private", "1.3.6.1.2.1.1.1.0"});
  a = authenticate_request(wrong, cfg, false);
  CHECK_FALSE(a.accepted);
  CHECK(a.reason == "community");

  auto good = signed_req(get, *key);
  a = authenticate_request(good, cfg, true);
  CHECK(a.accepted);
  CHECK(a.verified);

  CHECK(authenticate_request(get, cfg, true).reason == "signature");

  // wrong community is reported even when the signature is valid
  CHECK(authenticate_request(signed_req(wrong, *key), cfg, true).reason == "community");

  auto tampered = good;
  tampered.fields[1] = "1.3.6.1.2.1.1.5.0";
  CHECK(authenticate_request(tampered, cfg, true).reason == "signature");

  auto other_key = generate_keypair(512, 99);
  CHECK(authenticate_request(signed_req(get, other_key), cfg, true).reason == "signature");
}

TEST_CASE("one-bit signature corruptions are all denied") {
  auto key = test_key();
  AgentConfig cfg = loopback_config();
  auto good = signed_req(req(MessageType::Get, {"public", "1.3.6.1.2.1.1.1.0"}), *key);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    auto m = good;
    auto& sig = m.fields.back();
    std::uniform_int_distribution<std::size_t> bit(0, sig.size() * 8 - 1);
    auto b = bit(rng);
    sig[b / 8] = static_cast<char>(sig[b / 8] ^ (1 << (b % 8)));
    auto a = authenticate_request(m, cfg, true);
    CHECK_FALSE(a.accepted);
    CHECK(a.reason == "signature");
  }
}

TEST_CASE("GET returns the fixture value") {
  auto core = make_core(loopback_config());
  SessionContext ctx;
  auto r = core->process(ctx, req(MessageType::Get, {"public", "1.3.6.1.2.1.1.1.0"}));
  REQUIRE(r.type == MessageType::Response);
  CHECK(r.correlation_id == 42);
  CHECK(r.fields == std::vector<std::string>{"1.3.6.1.2.1.1.1.0", "STRING", "lab-sim"});

  r = core->process(ctx, req(MessageType::Get, {"public", "sysDescr.0"}));
  REQUIRE(r.type == MessageType::Response);
  CHECK(r.fields.at(2) == "lab-sim");
}

TEST_CASE("GET error reasons") {
  auto core = make_core(loopback_config());
  SessionContext ctx;
  auto get = [&](const std::string& o) { return core->process(ctx, req(MessageType::Get, {"public", o})); };
  CHECK(reason_of(get("1.3.6.1.2.1.99.1.0")) == "NoSuchObject");
  CHECK(reason_of(get("1.3.6.1.2.1.1.1")) == "NoSuchInstance");
  CHECK(reason_of(get("1.3.6.1.2.1.1.1.5")) == "NoSuchInstance");
  CHECK(reason_of(get("1.3.6.1.2.1.1")) == "NoSuchInstance");
  CHECK(reason_of(get("1..3")) == "BadRequest");
  CHECK(reason_of(core->process(ctx, req(MessageType::Get, {"public"}))) == "BadRequest");
  CHECK(reason_of(core->process(ctx, req(MessageType::DiscoveryProbe, {"public"}))) == "BadRequest");

  auto denied = core->process(ctx, req(MessageType::Get, {"nope", "1.3.6.1.2.1.1.1.0"}));
  CHECK(reason_of(denied) == "AccessDenied");
  CHECK(denied.fields.at(1).find("access to system information denied") != std::string::npos);
  CHECK(core->stats().denied_community == 1);
}

TEST_CASE("GET_NEXT walks provider instances in order") {
  auto core = make_core(loopback_config());
  SessionContext ctx;
  auto next = [&](const std::string& o) { return core->process(ctx, req(MessageType::GetNext, {"public", o})); };
  auto r = next("1.3.6.1.2.1.1.1.0");
  REQUIRE(r.type == MessageType::Response);
  CHECK(r.fields.at(0) == "1.3.6.1.2.1.1.2.0");
  CHECK(next("1.3.6.1.2.1").fields.at(0) == "1.3.6.1.2.1.1.1.0");
  CHECK(next("1.3.6.1.2.1.2.2.1.2").fields.at(0) == "1.3.6.1.2.1.2.2.1.2.1");
  CHECK(next("1.3.6.1.2.1.2.2.1.2.1").fields.at(0) == "1.3.6.1.2.1.2.2.1.2.2");
  CHECK(reason_of(next("1.3.6.1.2.1.11.30.0")) == "EndOfMib");

  // full walk equals the sorted instance list of the provider
  std::vector<std::string> walked;
  std::string cursor = "1.3.6.1.2.1";
  while (true) {
    auto m = next(cursor);
    if (m.type != MessageType::Response) break;
    cursor = m.fields.at(0);
    walked.push_back(cursor);
  }
  std::vector<std::string> expected;
  for (const auto& o : core->provider().instances()) expected.push_back(oid_to_string(o));
  CHECK(walked == expected);
}

TEST_CASE("SET writes writable objects only") {
  auto core = make_core(loopback_config());
  SessionContext ctx;
  auto set = [&](const std::string& o, const std::string& v) {
    return core->process(ctx, req(MessageType::Set, {"public", o, v}));
  };
  auto r = set("1.3.6.1.2.1.1.5.0", "renamed");
  REQUIRE(r.type == MessageType::Response);
  CHECK(r.fields.at(2) == "renamed");
  CHECK(core->process(ctx, req(MessageType::Get, {"public", "1.3.6.1.2.1.1.5.0"})).fields.at(2) == "renamed");

  CHECK(reason_of(set("1.3.6.1.2.1.1.1.0", "x")) == "NotWritable");  // sysDescr is read-only
  CHECK(reason_of(set("1.3.6.1.2.1.11.30.0", "one")) == "BadRequest");
  CHECK(set("1.3.6.1.2.1.11.30.0", "1").type == MessageType::Response);
  CHECK(reason_of(set("1.3.6.1.2.1.1.4.9", "x")) == "NoSuchInstance");
}

TEST_CASE("DESCRIBE ifType returns its record") {
  auto core = make_core(loopback_config());
  SessionContext ctx;
  auto r = core->process(ctx, req(MessageType::Describe, {"public", "1.3.6.1.2.1.2.2.1.3"}));
  REQUIRE(r.type == MessageType::Response);
  REQUIRE(r.fields.size() == 5);
  CHECK(r.fields[0] == "ifType");
  CHECK(r.fields[1].rfind("INTEGER", 0) == 0);
  CHECK(r.fields[2] == "read-only");
  CHECK(r.fields[3] == "mandatory");
  CHECK(r.fields[4].rfind("The type of interface", 0) == 0);

  CHECK(reason_of(core->process(ctx, req(MessageType::Describe, {"public", "1.3.6.1"}))) == "NoSuchObject");
}

TEST_CASE("DESCRIBE equals the RAF record for every object") {
  auto core = make_core(loopback_config());
  SessionContext ctx;
  MemorySource src(mib2_raf());
  RafReader reader(src);
  std::size_t checked = 0;
  for_each_node(core->tree().root(), [&](const MibTreeNode& n) {
    if (!n.raf_index) return;
    auto r = core->process(ctx, req(MessageType::Describe, {"public", oid_to_string(MibTree::oid_of(n))}));
    REQUIRE(r.type == MessageType::Response);
    auto rec = reader.read_record(*n.raf_index);
    CHECK(r.fields == std::vector<std::string>{rec.name, rec.syntax, rec.access, rec.status, rec.description});
    ++checked;
  });
  CHECK(checked == reader.record_count());
}

TEST_CASE("level requests mirror the tree") {
  auto core = make_core(loopback_config());
  SessionContext ctx;
  auto r = core->process(ctx, req(MessageType::Initialise, {"public"}));
  REQUIRE(r.type == MessageType::Response);
  CHECK(decode_level_listing(r.fields.at(0)) == core->tree().initial_level());

  r = core->process(ctx, req(MessageType::NextLevel, {"public", "1.3.6.1.2.1"}));
  auto level = decode_level_listing(r.fields.at(0));
  CHECK(level == core->tree().next_level(OidPath::parse("1.3.6.1.2.1")));
  REQUIRE(level.size() >= 2);
  CHECK(level[0].name == "system");
  CHECK(level[1].name == "interfaces");

  r = core->process(ctx, req(MessageType::UpperLevel, {"public", "1.3.6.1.2.1.1"}));
  CHECK(decode_level_listing(r.fields.at(0)) == core->tree().upper_level(OidPath::parse("1.3.6.1.2.1.1")));
}

TEST_CASE("CONNECTION_RELEASE marks the session released") {
  auto core = make_core(loopback_config());
  SessionContext ctx;
  auto r = core->process(ctx, req(MessageType::ConnectionRelease, {"public"}));
  CHECK(r.type == MessageType::Response);
  CHECK(r.fields.empty());
  CHECK(ctx.released);
}

TEST_CASE("secure request gets encrypted response fields") {
  auto key = test_key();
  auto core = make_core(loopback_config());
  SessionContext ctx;
  auto r = core->process(ctx, signed_req(req(MessageType::Get, {"public", "1.3.6.1.2.1.1.1.0"}), *key, true));
  REQUIRE(r.type == MessageType::Response);
  CHECK(r.has_flag(flags::kEncrypted));
  REQUIRE(r.fields.size() == 3);
  CHECK(r.fields[2] != "lab-sim");
  CHECK(to_string(decrypt(as_bytes(r.fields[2]), *key)) == "lab-sim");
  CHECK(to_string(decrypt(as_bytes(r.fields[0]), *key)) == "1.3.6.1.2.1.1.1.0");
}

TEST_CASE("security gating: unverified requests never reach dispatch") {
  auto key = test_key();
  auto cfg = loopback_config();
  cfg.require_security = true;
  auto core = make_core(cfg);
  SessionContext ctx;
  std::mt19937_64 rng(5);
  auto base = req(MessageType::Get, {"public", "1.3.6.1.2.1.1.1.0"});
  std::uint64_t accepted = 0;
  for (int i = 0; i < 300; ++i) {
    Message m;
    switch (i % 4) {
      case 0:
        m = base;  // unsigned
        break;
      case 1: {
        m = signed_req(base, *key);
        auto& sig = m.fields.back();
        std::uniform_int_distribution<std::size_t> pos(0, sig.size() - 1);
        sig[pos(rng)] ^= 0x10;
        break;
      }
      case 2:
        m = signed_req(base, *key);
        m.fields[1] = "1.3.6.1.2.1.1.5.0";  // altered after signing
        break;
      default:
        m = signed_req(base, *key);
        ++accepted;
    }
    core->process(ctx, m);
  }
  CHECK(core->stats().dispatched_unverified == 0);
  CHECK(core->stats().dispatched == accepted);
  CHECK(core->stats().denied_signature == 300 - accepted);
}

TEST_CASE("SUBSCRIBE_TRAP validates and registers") {
  auto core = make_core(loopback_config());
  SessionContext ctx;
  ctx.peer = {"127.0.0.1", 5555};
  auto sub = [&](std::vector<std::string> f) {
    f.insert(f.begin(), "public");
    return core->process(ctx, req(MessageType::SubscribeTrap, std::move(f)));
  };
  auto r = sub({"1.3.6.1.2.1.2.2.1.10.1", "1000", "200", ":9999"});
  REQUIRE(r.type == MessageType::Response);
  CHECK(std::stoul(r.fields.at(0)) > 0);
  CHECK(core->subscription_count() == 1);
  CHECK(reason_of(sub({"1.3.6.1.2.1.1.1.0", "10", "200", ":9999"})) == "BadRequest");   // not numeric
  CHECK(reason_of(sub({"1.3.6.1.2.1.2.2.1.10.1", "x", "200", ":9999"})) == "BadRequest");
  CHECK(reason_of(sub({"1.3.6.1.2.1.2.2.1.10.1", "10", "50", ":9999"})) == "BadRequest");  // period < 100
  CHECK(reason_of(sub({"1.3.6.1.2.1.2.2.1.10.1", "10", "200", "host"})) == "BadRequest");
  CHECK(reason_of(sub({"1.3.6.1.2.1.2.2.1.10.9", "10", "200", ":9999"})) == "NoSuchInstance");
  CHECK(core->subscription_count() == 1);
}

TEST_CASE("trap monitor: edge-triggered strictly-greater reports") {
  // threshold 10; samples 5, 12, 13, 4, 11 -> reports at 12 and at the last 11
  ScriptedProvider p({"5", "12", "13", "4", "11"});
  TrapSubscription s;
  s.id = 9;
  s.instance = oid_from_string("1.3.6.1.2.1.2.2.1.10.1");
  s.threshold = 10;
  s.period = std::chrono::milliseconds(100);
  s.report_to = {"127.0.0.1", 9000};
  auto t0 = std::chrono::steady_clock::time_point{} + std::chrono::hours(1);
  s.next_due = t0;
  std::vector<TrapSubscription> subs{s};
  std::vector<std::string> reported;
  for (int i = 0; i < 5; ++i) {
    auto now = t0 + i * s.period;
    for (auto& r : trap_monitor_tick(subs, p, now, 1000 + i)) {
      CHECK(r.message.type == MessageType::EventReport);
      CHECK(r.message.correlation_id == 9);
      CHECK(r.to == s.report_to);
      CHECK(r.message.fields.at(0) == "1.3.6.1.2.1.2.2.1.10.1");
      CHECK(r.message.fields.at(2) == "10");
      CHECK(r.message.fields.at(3) == std::to_string(1000 + i));
      reported.push_back(r.message.fields.at(1) + "@" + std::to_string(i));
    }
  }
  CHECK(reported == std::vector<std::string>{"12@1", "11@4"});
}

TEST_CASE("trap monitor: equal to threshold is not above, not-due is skipped, failures counted") {
  ScriptedProvider p({"10", "fail", "11"});
  TrapSubscription s;
  s.instance = {1};
  s.threshold = 10;
  s.period = std::chrono::milliseconds(100);
  auto t0 = std::chrono::steady_clock::time_point{} + std::chrono::hours(1);
  s.next_due = t0;
  std::vector<TrapSubscription> subs{s};
  std::uint64_t failures = 0;
  CHECK(trap_monitor_tick(subs, p, t0, 0, &failures).empty());
  CHECK(trap_monitor_tick(subs, p, t0 + std::chrono::milliseconds(50), 0, &failures).empty());  // not due
  CHECK(trap_monitor_tick(subs, p, t0 + std::chrono::milliseconds(100), 0, &failures).empty());
  CHECK(failures == 1);
  CHECK(trap_monitor_tick(subs, p, t0 + std::chrono::milliseconds(200), 0, &failures).size() == 1);
}

TEST_CASE("trap monitor: constant value below threshold never reports") {
  ScriptedProvider p({"3"});
  TrapSubscription s;
  s.instance = {1};
  s.threshold = 10;
  s.period = std::chrono::milliseconds(100);
  std::vector<TrapSubscription> subs{s};
  auto t = std::chrono::steady_clock::now();
  for (int i = 0; i < 50; ++i) CHECK(trap_monitor_tick(subs, p, t + i * s.period, 0).empty());
}

TEST_CASE("property: edge rule matches an independent oracle") {
  std::mt19937_64 rng(17);
  for (int round = 0; round < 200; ++round) {
    std::uniform_int_distribution<int> v(0, 20);
    std::vector<std::string> samples(30);
    for (auto& x : samples) x = std::to_string(v(rng));
    ScriptedProvider p(samples);
    TrapSubscription s;
    s.instance = {1};
    s.threshold = 10;
    s.period = std::chrono::milliseconds(100);
    auto t0 = std::chrono::steady_clock::time_point{} + std::chrono::hours(1);
    s.next_due = t0;
    std::vector<TrapSubscription> subs{s};
    std::vector<int> got, want;
    bool prev_above = false;
    for (int i = 0; i < 30; ++i) {
      int x = std::stoi(samples[i]);
      if (x > 10 && !prev_above) want.push_back(i);
      prev_above = x > 10;
      if (!trap_monitor_tick(subs, p, t0 + i * s.period, 0).empty()) got.push_back(i);
    }
    CHECK(got == want);
  }
}
