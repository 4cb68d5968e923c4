#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "nm/mib_parser.hpp"

namespace nm {

// Random Access File layout (all integers big-endian):
//
//   "MRAF" | version u8 (0x01) | record_count u32
//   offset table: record_count x u64 absolute byte offsets
//   records: name, syntax, access, status, description, parent_name as
//            (u16 length + UTF-8 bytes), then identifier u32
//
// The record index is the position in the offset table.
inline constexpr std::uint8_t kRafVersion = 0x01;
inline constexpr std::size_t kRafHeaderSize = 9;
inline constexpr std::size_t kRafMaxField = 0xFFFF;

/// Seekable byte source. Implementations count seeks so tests can check the
/// access pattern of a lookup.
class ByteSource {
 public:
  virtual ~ByteSource() = default;

  virtual void seek(std::uint64_t offset) = 0;
  /// Reads up to out.size() bytes at the current position; returns the count.
  virtual std::size_t read(std::span<std::uint8_t> out) = 0;
  virtual std::uint64_t size() const = 0;
};

class MemorySource final : public ByteSource {
 public:
  explicit MemorySource(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

  void seek(std::uint64_t offset) override {
    ++seeks_;
    pos_ = offset;
  }
  std::size_t read(std::span<std::uint8_t> out) override;
  std::uint64_t size() const override { return bytes_.size(); }

  std::size_t seek_count() const { return seeks_; }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t pos_ = 0;
  std::size_t seeks_ = 0;
};

class FileSource final : public ByteSource {
 public:
  explicit FileSource(const std::string& path);

  void seek(std::uint64_t offset) override;
  std::size_t read(std::span<std::uint8_t> out) override;
  std::uint64_t size() const override { return size_; }

  std::size_t seek_count() const { return seeks_; }

 private:
  std::ifstream in_;
  std::uint64_t size_ = 0;
  std::size_t seeks_ = 0;
};

/// Encoded size of one record body.
std::size_t raf_record_size(const MibRecord& rec);

/// Writes the image; records must carry record_index 0..N-1 in order.
std::uint64_t write_raf(std::span<const MibRecord> records, std::ostream& sink);
std::vector<std::uint8_t> write_raf(std::span<const MibRecord> records);
void write_raf_file(std::span<const MibRecord> records, const std::string& path);

/// Validates the header once; each read_record() then costs two seeks.
class RafReader {
 public:
  explicit RafReader(ByteSource& source);

  std::uint32_t record_count() const { return count_; }
  MibRecord read_record(std::uint32_t index);
  std::vector<MibRecord> read_all();

 private:
  ByteSource& src_;
  std::uint32_t count_ = 0;
};

std::uint32_t record_count(ByteSource& raf);
MibRecord read_record(ByteSource& raf, std::uint32_t index);

}  // namespace nm
