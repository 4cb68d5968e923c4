#include "nm/raf_store.hpp"

#include <algorithm>
#include <array>
#include <cstring>

#include "bytes.hpp"

namespace nm {

using detail::Bytes;

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'M', 'R', 'A', 'F'};

template <typename Record>
auto* record_fields(Record& r, std::size_t i) {
  switch (i) {
    case 0: return &r.name;
    case 1: return &r.syntax;
    case 2: return &r.access;
    case 3: return &r.status;
    case 4: return &r.description;
    case 5: return &r.parent_name;
    default: return static_cast<decltype(&r.name)>(nullptr);
  }
}

constexpr std::size_t kStringFields = 6;

void encode_record(const MibRecord& r, Bytes& out) {
  for (std::size_t i = 0; i < kStringFields; ++i) {
    const std::string& f = *record_fields(r, i);
    if (f.size() > kRafMaxField)
      throw Error(Errc::FieldTooLong, "record '" + r.name + "': field exceeds 65535 bytes");
    detail::put_u16(out, static_cast<std::uint16_t>(f.size()));
    detail::put_bytes(out, f);
  }
  detail::put_u32(out, r.identifier);
}

void read_exact(ByteSource& src, std::span<std::uint8_t> out, const char* what) {
  if (src.read(out) != out.size()) throw Error(Errc::CorruptImage, std::string("truncated ") + what);
}

}  // namespace

std::size_t MemorySource::read(std::span<std::uint8_t> out) {
  if (pos_ >= bytes_.size()) return 0;
  std::size_t n = std::min<std::uint64_t>(out.size(), bytes_.size() - pos_);
  std::memcpy(out.data(), bytes_.data() + pos_, n);
  pos_ += n;
  return n;
}

FileSource::FileSource(const std::string& path) : in_(path, std::ios::binary) {
  if (!in_) throw Error(Errc::Io, "cannot open " + path);
  in_.seekg(0, std::ios::end);
  size_ = static_cast<std::uint64_t>(in_.tellg());
  in_.seekg(0);
}

void FileSource::seek(std::uint64_t offset) {
  ++seeks_;
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(offset));
}

std::size_t FileSource::read(std::span<std::uint8_t> out) {
  in_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()));
  return static_cast<std::size_t>(in_.gcount());
}

std::size_t raf_record_size(const MibRecord& rec) {
  std::size_t n = 4;
  for (std::size_t i = 0; i < kStringFields; ++i) n += 2 + record_fields(rec, i)->size();
  return n;
}

std::vector<std::uint8_t> write_raf(std::span<const MibRecord> records) {
  if (records.size() > 0xFFFFFFFFu) throw Error(Errc::NonDenseIndices, "too many records");
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].record_index != i)
      throw Error(Errc::NonDenseIndices, "record '" + records[i].name + "' has index " +
                                              std::to_string(records[i].record_index) + ", expected " +
                                              std::to_string(i));
  }
  Bytes body;
  std::vector<std::uint64_t> offsets;
  offsets.reserve(records.size());
  const std::uint64_t base = kRafHeaderSize + 8 * records.size();
  for (const auto& r : records) {
    offsets.push_back(base + body.size());
    encode_record(r, body);
  }
  Bytes out(kMagic.begin(), kMagic.end());
  out.reserve(base + body.size());
  out.push_back(kRafVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(records.size()));
  for (auto off : offsets) detail::put_u64(out, off);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

std::uint64_t write_raf(std::span<const MibRecord> records, std::ostream& sink) {
  auto image = write_raf(records);
  sink.write(reinterpret_cast<const char*>(image.data()), static_cast<std::streamsize>(image.size()));
  sink.flush();
  if (!sink) throw Error(Errc::SinkFailure, "write to RAF sink failed");
  return image.size();
}

void write_raf_file(std::span<const MibRecord> records, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::SinkFailure, "cannot create " + path);
  write_raf(records, out);
}

RafReader::RafReader(ByteSource& source) : src_(source) {
  std::array<std::uint8_t, kRafHeaderSize> hdr{};
  src_.seek(0);
  read_exact(src_, hdr, "header");
  if (!std::equal(kMagic.begin(), kMagic.end(), hdr.begin())) throw Error(Errc::CorruptImage, "bad RAF magic");
  if (hdr[4] != kRafVersion) throw Error(Errc::CorruptImage, "unsupported RAF version");
  count_ = static_cast<std::uint32_t>(detail::get_be(std::span(hdr).subspan(5, 4)));
  if (kRafHeaderSize + 8ull * count_ > src_.size()) throw Error(Errc::CorruptImage, "truncated offset table");
}

MibRecord RafReader::read_record(std::uint32_t index) {
  if (index >= count_)
    throw Error(Errc::IndexOutOfRange,
                "record " + std::to_string(index) + " out of range (count " + std::to_string(count_) + ")");
  std::array<std::uint8_t, 8> entry{};
  src_.seek(kRafHeaderSize + 8ull * index);
  read_exact(src_, entry, "offset table");
  const std::uint64_t offset = detail::get_be(entry);
  const std::uint64_t table_end = kRafHeaderSize + 8ull * count_;
  if (offset < table_end || offset >= src_.size()) throw Error(Errc::CorruptImage, "record offset outside image");

  src_.seek(offset);
  MibRecord rec;
  rec.record_index = index;
  for (std::size_t i = 0; i < kStringFields; ++i) {
    std::array<std::uint8_t, 2> len{};
    read_exact(src_, len, "record");
    std::string s(detail::get_be(len), '\0');
    read_exact(src_, std::span(reinterpret_cast<std::uint8_t*>(s.data()), s.size()), "record");
    *record_fields(rec, i) = std::move(s);
  }
  std::array<std::uint8_t, 4> id{};
  read_exact(src_, id, "record");
  rec.identifier = static_cast<std::uint32_t>(detail::get_be(id));
  return rec;
}

std::vector<MibRecord> RafReader::read_all() {
  std::vector<MibRecord> out;
  out.reserve(count_);
  for (std::uint32_t i = 0; i < count_; ++i) out.push_back(read_record(i));
  return out;
}

std::uint32_t record_count(ByteSource& raf) { return RafReader(raf).record_count(); }

MibRecord read_record(ByteSource& raf, std::uint32_t index) { return RafReader(raf).read_record(index); }

}  // namespace nm
