#include <random>
#include <sstream>

#include "doctest.h"
#include "nm/raf_store.hpp"
#include "support.hpp"

using namespace nm;

namespace {

MibRecord rec(std::string name, std::string parent, std::uint32_t id, std::uint32_t index) {
  MibRecord r;
  r.name = std::move(name);
  r.parent_name = std::move(parent);
  r.identifier = id;
  r.record_index = index;
  return r;
}

std::vector<MibRecord> table1_prefix() {
  return {rec("mib-2", "mgmt", 1, 0), rec("system", "mib-2", 1, 1), rec("interfaces", "mib-2", 2, 2)};
}

// Size accounting computed from the layout definition, not from the writer.
std::uint64_t oracle_size(const std::vector<MibRecord>& rs) {
  std::uint64_t n = 4 + 1 + 4 + 8 * rs.size();
  for (const auto& r : rs)
    n += 2 + r.name.size() + 2 + r.syntax.size() + 2 + r.access.size() + 2 + r.status.size() + 2 +
         r.description.size() + 2 + r.parent_name.size() + 4;
  return n;
}

}  // namespace

TEST_CASE("write_raf of an empty list is header only") {
  std::ostringstream out;
  CHECK(write_raf(std::vector<MibRecord>{}, out) == 9);
  const std::string img = out.str();
  CHECK(img == std::string("MRAF\x01\0\0\0\0", 9));
  MemorySource src({img.begin(), img.end()});
  CHECK(record_count(src) == 0);
}

TEST_CASE("table 1 prefix round trip") {
  auto img = write_raf(table1_prefix());
  MemorySource src(img);
  CHECK(record_count(src) == 3);
  CHECK(read_record(src, 1).name == "system");
  auto first = read_record(src, 0);
  CHECK(first.parent_name == "mgmt");
  CHECK(first.identifier == 1);
  CHECK_THROWS_WITH_AS(read_record(src, 3), doctest::Contains("out of range"), Error);
  try {
    read_record(src, 3);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::IndexOutOfRange);
  }
}

TEST_CASE("write_raf byte count matches size accounting") {
  std::mt19937_64 rng(3);
  auto rs = test::random_records(rng, 200);
  rs.resize(200);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    rs[i].record_index = static_cast<std::uint32_t>(i);
    if (rs[i].name.empty()) rs[i].name = "n" + std::to_string(i);
  }
  std::ostringstream out;
  CHECK(write_raf(rs, out) == oracle_size(rs));
  CHECK(out.str().size() == oracle_size(rs));
}

TEST_CASE("write_raf rejects non-dense indices and oversize fields") {
  auto rs = table1_prefix();
  rs[2].record_index = 5;
  CHECK_THROWS_AS(write_raf(rs), Error);
  try {
    write_raf(rs);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonDenseIndices);
  }
  auto big = table1_prefix();
  big[0].description.assign(70000, 'x');
  try {
    write_raf(big);
    FAIL("expected FieldTooLong");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::FieldTooLong);
  }
}

TEST_CASE("write_raf reports sink failure") {
  std::ostringstream out;
  out.setstate(std::ios::badbit);
  try {
    write_raf(table1_prefix(), out);
    FAIL("expected SinkFailure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SinkFailure);
  }
}

TEST_CASE("read_record uses exactly two seeks") {
  std::mt19937_64 rng(5);
  auto rs = test::random_records(rng, 50);
  rs.resize(std::max<std::size_t>(rs.size(), 1));
  rs[0].record_index = 0;
  MemorySource src(write_raf(rs));
  RafReader reader(src);
  for (std::uint32_t i = 0; i < rs.size(); i = i * 2 + 1) {
    auto before = src.seek_count();
    CHECK(reader.read_record(i) == rs[i]);
    CHECK(src.seek_count() - before == 2);
  }
}

TEST_CASE("corrupt images") {
  auto img = write_raf(table1_prefix());
  SUBCASE("bad magic") {
    img[0] = 'X';
    MemorySource src(img);
    CHECK_THROWS_AS(record_count(src), Error);
  }
  SUBCASE("every truncation is rejected or reads consistently") {
    for (std::size_t cut = 0; cut < img.size(); ++cut) {
      MemorySource src({img.begin(), img.begin() + static_cast<std::ptrdiff_t>(cut)});
      try {
        RafReader r(src);
        for (std::uint32_t i = 0; i < r.record_count(); ++i) r.read_record(i);
        FAIL("truncated image read fully at cut " << cut);
      } catch (const Error& e) {
        CHECK(e.code() == Errc::CorruptImage);
      }
    }
  }
}

TEST_CASE("file round trip") {
  auto dir = test::temp_dir("raf");
  auto path = (dir / "mib.raf").string();
  auto rs = table1_prefix();
  write_raf_file(rs, path);
  FileSource src(path);
  RafReader reader(src);
  CHECK(reader.read_all() == rs);
  auto before = src.seek_count();
  reader.read_record(2);
  CHECK(src.seek_count() - before == 2);
}

TEST_CASE("round trip property over random record lists") {
  std::mt19937_64 rng(99);
  for (int round = 0; round < 200; ++round) {
    auto rs = test::random_records(rng, 20);
    MemorySource src(write_raf(rs));
    RafReader reader(src);
    REQUIRE(reader.record_count() == rs.size());
    for (std::uint32_t i = 0; i < rs.size(); ++i) REQUIRE(reader.read_record(i) == rs[i]);
  }
}
