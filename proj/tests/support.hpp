#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nm/mib_parser.hpp"

namespace nm::test {

inline std::span<const std::uint8_t> as_span(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline std::string data_path(const std::string& rel) { return std::string(NM_DATA_DIR) + "/" + rel; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string mib2_text() { return read_file(data_path("mibs/RFC1213-MIB.txt")); }

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("nm-test-" + tag + "-" + std::to_string(std::random_device{}()));
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len, bool binary = true) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> byte(binary ? 0 : 32, binary ? 255 : 126);
  std::string s(len(rng), '\0');
  for (auto& c : s) c = static_cast<char>(byte(rng));
  return s;
}

inline std::vector<MibRecord> random_records(std::mt19937_64& rng, std::size_t max_count) {
  std::uniform_int_distribution<std::size_t> count(0, max_count);
  std::uniform_int_distribution<std::uint32_t> id;
  std::vector<MibRecord> out(count(rng));
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& r = out[i];
    r.name = "obj" + std::to_string(i);
    r.syntax = random_text(rng, 40);
    r.access = random_text(rng, 12);
    r.status = random_text(rng, 12);
    r.description = random_text(rng, 600);
    r.parent_name = random_text(rng, 20);
    r.identifier = id(rng);
    r.record_index = static_cast<std::uint32_t>(i);
  }
  return out;
}

}  // namespace nm::test
