#include "nm/wire_protocol.hpp"

#include <array>
#include <charconv>

#include "bytes.hpp"
#include "nm/mib_tree.hpp"

namespace nm {

namespace {

constexpr std::uint8_t kMagic0 = 0x4E;
constexpr std::uint8_t kMagic1 = 0x4D;
constexpr std::uint8_t kVersion = 0x01;

void read_fully(ByteStream& in, std::span<std::uint8_t> out, bool at_boundary) {
  std::size_t got = 0;
  while (got < out.size()) {
    std::size_t n = in.read_some(out.subspan(got));
    if (n == 0) {
      if (at_boundary && got == 0) throw Error(Errc::PeerClosed, "peer closed connection");
      throw DecodeError(Errc::Truncated, "connection closed mid-frame");
    }
    got += n;
  }
}

}  // namespace

std::string_view message_type_name(MessageType t) noexcept {
  switch (t) {
    case MessageType::Initialise: return "INITIALISE";
    case MessageType::NextLevel: return "NEXT_LEVEL";
    case MessageType::UpperLevel: return "UPPER_LEVEL";
    case MessageType::Get: return "GET";
    case MessageType::GetNext: return "GET_NEXT";
    case MessageType::Set: return "SET";
    case MessageType::Describe: return "DESCRIBE";
    case MessageType::ConnectionRelease: return "CONNECTION_RELEASE";
    case MessageType::SubscribeTrap: return "SUBSCRIBE_TRAP";
    case MessageType::EventReport: return "EVENT_REPORT";
    case MessageType::DiscoveryProbe: return "DISCOVERY_PROBE";
    case MessageType::DiscoveryReply: return "DISCOVERY_REPLY";
    case MessageType::AgentAnnounce: return "AGENT_ANNOUNCE";
    case MessageType::AgentFarewell: return "AGENT_FAREWELL";
    case MessageType::Response: return "RESPONSE";
    case MessageType::ErrorResponse: return "ERROR_RESPONSE";
  }
  return "UNKNOWN";
}

bool is_known_type(std::uint8_t tag) noexcept { return (tag >= 0x01 && tag <= 0x0E) || tag == 0x10 || tag == 0x11; }

bool is_request_type(MessageType t) noexcept {
  switch (t) {
    case MessageType::Initialise:
    case MessageType::NextLevel:
    case MessageType::UpperLevel:
    case MessageType::Get:
    case MessageType::GetNext:
    case MessageType::Set:
    case MessageType::Describe:
    case MessageType::ConnectionRelease:
    case MessageType::SubscribeTrap:
      return true;
    default:
      return false;
  }
}

std::vector<std::uint8_t> encode_message(const Message& m) {
  if (m.fields.size() > kMaxFields)
    throw Error(Errc::TooManyFields, std::to_string(m.fields.size()) + " fields exceeds 16");
  std::size_t total = kHeaderLen;
  for (const auto& f : m.fields) {
    if (f.size() > kMaxFieldLen) throw Error(Errc::FieldTooLong, "field of " + std::to_string(f.size()) + " bytes");
    total += 2 + f.size();
  }
  detail::Bytes out;
  out.reserve(total);
  out.push_back(kMagic0);
  out.push_back(kMagic1);
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(m.type));
  out.push_back(m.flags);
  detail::put_u32(out, m.correlation_id);
  out.push_back(static_cast<std::uint8_t>(m.fields.size()));
  for (const auto& f : m.fields) {
    detail::put_u16(out, static_cast<std::uint16_t>(f.size()));
    detail::put_bytes(out, f);
  }
  return out;
}

Message decode_message(std::span<const std::uint8_t> in) {
  if (in.size() >= 1 && in[0] != kMagic0) throw DecodeError(Errc::BadMagic);
  if (in.size() >= 2 && in[1] != kMagic1) throw DecodeError(Errc::BadMagic);
  if (in.size() >= 3 && in[2] != kVersion) throw DecodeError(Errc::BadVersion);
  if (in.size() >= 4 && !is_known_type(in[3])) throw DecodeError(Errc::UnknownType);
  if (in.size() < kHeaderLen) throw DecodeError(Errc::Truncated);

  Message m;
  m.type = static_cast<MessageType>(in[3]);
  m.flags = in[4];
  m.correlation_id = static_cast<std::uint32_t>(detail::get_be(in.subspan(5, 4)));
  const std::size_t count = in[9];
  if (count > kMaxFields) throw DecodeError(Errc::TooManyFields);
  std::size_t pos = kHeaderLen;
  m.fields.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (in.size() - pos < 2) throw DecodeError(Errc::Truncated);
    std::size_t len = detail::get_be(in.subspan(pos, 2));
    pos += 2;
    if (in.size() - pos < len) throw DecodeError(Errc::Truncated);
    m.fields.emplace_back(reinterpret_cast<const char*>(in.data() + pos), len);
    pos += len;
  }
  if (pos != in.size()) throw DecodeError(Errc::TrailingGarbage);
  return m;
}

std::vector<std::uint8_t> signed_span(const Message& m) {
  Message covered = m;
  covered.flags |= flags::kSigned;
  if (m.has_flag(flags::kSigned) && !covered.fields.empty()) covered.fields.pop_back();
  return encode_message(covered);
}

std::vector<std::uint8_t> make_frame(std::span<const std::uint8_t> payload) {
  detail::Bytes out;
  out.reserve(4 + payload.size());
  detail::put_u32(out, static_cast<std::uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

std::vector<std::uint8_t> read_frame(ByteStream& in) {
  std::array<std::uint8_t, 4> len{};
  read_fully(in, len, true);
  const std::size_t n = detail::get_be(len);
  if (n > kMaxTcpFrame) throw DecodeError(Errc::OversizeFrame, "frame of " + std::to_string(n) + " bytes");
  std::vector<std::uint8_t> payload(n);
  if (n) read_fully(in, payload, false);
  return payload;
}

std::string encode_level_listing(std::span<const LevelEntry> entries) {
  std::string out;
  for (const auto& e : entries) {
    if (!out.empty()) out += '\n';
    out += e.name;
    out += ' ';
    out += std::to_string(e.identifier);
  }
  return out;
}

std::vector<LevelEntry> decode_level_listing(std::string_view listing) {
  std::vector<LevelEntry> out;
  std::size_t pos = 0;
  while (pos < listing.size()) {
    auto eol = listing.find('\n', pos);
    auto line = listing.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    auto sp = line.rfind(' ');
    if (sp == std::string_view::npos) throw Error(Errc::ProtocolError, "bad level listing line");
    LevelEntry e;
    e.name = std::string(line.substr(0, sp));
    auto digits = line.substr(sp + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), e.identifier);
    if (ec != std::errc() || ptr != digits.data() + digits.size())
      throw Error(Errc::ProtocolError, "bad identifier in level listing");
    out.push_back(std::move(e));
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  return out;
}

}  // namespace nm
