#include <cstdio>
#include <random>

#include "doctest.h"
#include "nm/mib_tree.hpp"
#include "nm/wire_protocol.hpp"
#include "support.hpp"

using namespace nm;

namespace {

std::string hex(std::span<const std::uint8_t> b) {
  std::string s;
  char buf[3];
  for (auto c : b) {
    std::snprintf(buf, sizeof buf, "%02X", c);
    s += buf;
  }
  return s;
}

// Reference encoder written straight from the layout table, as hex text.
std::string oracle_hex(std::uint8_t type, std::uint8_t flg, std::uint32_t corr, const std::vector<std::string>& fs) {
  char buf[64];
  std::string s = "4E4D01";
  std::snprintf(buf, sizeof buf, "%02X%02X%08X%02X", type, flg, corr, static_cast<unsigned>(fs.size()));
  s += buf;
  for (const auto& f : fs) {
    std::snprintf(buf, sizeof buf, "%04X", static_cast<unsigned>(f.size()));
    s += buf;
    s += hex({reinterpret_cast<const std::uint8_t*>(f.data()), f.size()});
  }
  return s;
}

const std::vector<std::uint8_t> kTypes = {0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08,
                                          0x09, 0x0A, 0x0B, 0x0C, 0x0D, 0x0E, 0x10, 0x11};

Message random_message(std::mt19937_64& rng) {
  Message m;
  m.type = static_cast<MessageType>(kTypes[std::uniform_int_distribution<std::size_t>(0, kTypes.size() - 1)(rng)]);
  m.flags = static_cast<std::uint8_t>(rng());
  m.correlation_id = static_cast<std::uint32_t>(rng());
  auto n = std::uniform_int_distribution<std::size_t>(0, kMaxFields)(rng);
  for (std::size_t i = 0; i < n; ++i) m.fields.push_back(test::random_text(rng, 64));
  return m;
}

Errc decode_error(std::span<const std::uint8_t> bytes) {
  try {
    decode_message(bytes);
  } catch (const DecodeError& e) {
    return e.code();
  }
  FAIL("decode unexpectedly succeeded");
  return Errc::Io;
}

// Delivers a byte string in fixed-size chunks, then reports close.
class ChunkedStream : public ByteStream {
 public:
  ChunkedStream(std::vector<std::uint8_t> data, std::size_t chunk) : data_(std::move(data)), chunk_(chunk) {}
  std::size_t read_some(std::span<std::uint8_t> out) override {
    std::size_t n = std::min({out.size(), chunk_, data_.size() - pos_});
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(pos_), n, out.begin());
    pos_ += n;
    return n;
  }

 private:
  std::vector<std::uint8_t> data_;
  std::size_t chunk_;
  std::size_t pos_ = 0;
};

}  // namespace

TEST_CASE("encode_message worked example") {
  Message m{MessageType::Initialise, 0, 1, {"public"}};
  auto bytes = encode_message(m);
  CHECK(hex(bytes) == "4E4D0101000000000101""00067075626C6963");
  CHECK(hex(bytes) == oracle_hex(0x01, 0, 1, {"public"}));
  CHECK(decode_message(bytes) == m);
}

TEST_CASE("zero-field message is header only") {
  CHECK(encode_message(Message{MessageType::Response, 0, 9, {}}).size() == 10);
}

TEST_CASE("encoder agrees with reference encoder") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    auto m = random_message(rng);
    REQUIRE(hex(encode_message(m)) ==
            oracle_hex(static_cast<std::uint8_t>(m.type), m.flags, m.correlation_id, m.fields));
  }
}

TEST_CASE("encode limits") {
  Message m{MessageType::Get, 0, 1, std::vector<std::string>(17, "x")};
  try {
    encode_message(m);
    FAIL("expected TooManyFields");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TooManyFields);
  }
  Message big{MessageType::Get, 0, 1, {std::string(70000, 'x')}};
  try {
    encode_message(big);
    FAIL("expected FieldTooLong");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::FieldTooLong);
  }
}

TEST_CASE("decode errors") {
  auto good = encode_message(Message{MessageType::Get, 0, 5, {"public", "1.3.6"}});
  CHECK(decode_error({}) == Errc::Truncated);
  auto extra = good;
  extra.push_back(0);
  CHECK(decode_error(extra) == Errc::TrailingGarbage);
  auto bad = good;
  bad[0] = 0x00;
  CHECK(decode_error(bad) == Errc::BadMagic);
  bad = good;
  bad[2] = 0x02;
  CHECK(decode_error(bad) == Errc::BadVersion);
  bad = good;
  bad[3] = 0x0F;
  CHECK(decode_error(bad) == Errc::UnknownType);
  bad = good;
  bad[9] = 17;
  CHECK(decode_error(bad) == Errc::TooManyFields);
  for (std::size_t cut = 0; cut < good.size(); ++cut)
    CHECK(decode_error(std::span(good).first(cut)) == Errc::Truncated);
}

TEST_CASE("random round trip and mutation fuzz stay within defined outcomes") {
  std::mt19937_64 rng(77);
  const std::set<Errc> allowed = {Errc::BadMagic, Errc::BadVersion, Errc::UnknownType,
                                  Errc::Truncated, Errc::TrailingGarbage, Errc::TooManyFields};
  for (int i = 0; i < 1000; ++i) {
    auto m = random_message(rng);
    auto bytes = encode_message(m);
    REQUIRE(decode_message(bytes) == m);
    for (int k = 0; k < 10; ++k) {
      auto mutated = bytes;
      auto pos = std::uniform_int_distribution<std::size_t>(0, mutated.size() - 1)(rng);
      switch (rng() % 3) {
        case 0: mutated[pos] ^= static_cast<std::uint8_t>(1u << (rng() % 8)); break;
        case 1: mutated.erase(mutated.begin() + static_cast<std::ptrdiff_t>(pos)); break;
        default: mutated.insert(mutated.begin() + static_cast<std::ptrdiff_t>(pos), static_cast<std::uint8_t>(rng()));
      }
      try {
        decode_message(mutated);
      } catch (const DecodeError& e) {
        REQUIRE(allowed.count(e.code()) == 1);
      }
    }
  }
}

TEST_CASE("signed span excludes the signature and sets the flag") {
  Message m{MessageType::Get, 0, 3, {"public", "sysDescr.0"}};
  auto unsigned_cover = signed_span(m);
  Message s = m;
  s.flags |= flags::kSigned;
  s.fields.push_back("SIGNATURE");
  CHECK(signed_span(s) == unsigned_cover);
  CHECK(decode_message(unsigned_cover).has_flag(flags::kSigned));
  CHECK(decode_message(unsigned_cover).fields.size() == 2);
}

TEST_CASE("read_frame") {
  SUBCASE("single frame") {
    ChunkedStream in({0, 0, 0, 3, 'a', 'b', 'c'}, 64);
    auto p = read_frame(in);
    CHECK(std::string(p.begin(), p.end()) == "abc");
    CHECK_THROWS_AS(read_frame(in), Error);
  }
  SUBCASE("back-to-back frames across arbitrary chunk boundaries") {
    std::mt19937_64 rng(5);
    for (int round = 0; round < 200; ++round) {
      std::vector<std::string> payloads;
      std::vector<std::uint8_t> stream;
      for (int k = 0; k < 4; ++k) {
        payloads.push_back(test::random_text(rng, 300));
        auto f = make_frame(test::as_span(payloads.back()));
        stream.insert(stream.end(), f.begin(), f.end());
      }
      ChunkedStream in(stream, 1 + rng() % 13);
      for (const auto& p : payloads) {
        auto got = read_frame(in);
        REQUIRE(std::string(got.begin(), got.end()) == p);
      }
      try {
        read_frame(in);
        FAIL("expected PeerClosed");
      } catch (const Error& e) {
        REQUIRE(e.code() == Errc::PeerClosed);
      }
    }
  }
  SUBCASE("close mid-frame is Truncated") {
    ChunkedStream in({0, 0, 0, 10, 1, 2, 3, 4}, 3);
    try {
      read_frame(in);
      FAIL("expected Truncated");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::Truncated);
    }
  }
  SUBCASE("oversize frame") {
    ChunkedStream in({0, 0x20, 0, 0}, 4);
    try {
      read_frame(in);
      FAIL("expected OversizeFrame");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::OversizeFrame);
    }
  }
}

TEST_CASE("level listing encoding") {
  std::vector<LevelEntry> level = {{"system", 1}, {"interfaces", 2}, {"snmp", 11}};
  auto text = encode_level_listing(level);
  CHECK(text == "system 1\ninterfaces 2\nsnmp 11");
  CHECK(decode_level_listing(text) == level);
  CHECK(decode_level_listing("").empty());
  CHECK_THROWS_AS(decode_level_listing("bogus"), Error);
}
