#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nm/error.hpp"

namespace nm {

enum class MessageType : std::uint8_t {
  Initialise = 0x01,
  NextLevel = 0x02,
  UpperLevel = 0x03,
  Get = 0x04,
  GetNext = 0x05,
  Set = 0x06,
  Describe = 0x07,
  ConnectionRelease = 0x08,
  SubscribeTrap = 0x09,
  EventReport = 0x0A,
  DiscoveryProbe = 0x0B,
  DiscoveryReply = 0x0C,
  AgentAnnounce = 0x0D,
  AgentFarewell = 0x0E,
  Response = 0x10,
  ErrorResponse = 0x11,
};

std::string_view message_type_name(MessageType t) noexcept;
bool is_known_type(std::uint8_t tag) noexcept;
bool is_request_type(MessageType t) noexcept;

namespace flags {
inline constexpr std::uint8_t kSigned = 0x01;
inline constexpr std::uint8_t kEncrypted = 0x02;
}  // namespace flags

inline constexpr std::size_t kMaxFields = 16;
inline constexpr std::size_t kMaxFieldLen = 0xFFFF;
inline constexpr std::size_t kHeaderLen = 10;
inline constexpr std::size_t kMaxUdpPayload = 8192;
inline constexpr std::size_t kMaxTcpFrame = 1u << 20;

// Field layouts. Requests always carry the community in field 0; a SIGNED
// message carries the signature as its last field.
//
//   INITIALISE, CONNECTION_RELEASE   [community]
//   NEXT_LEVEL, UPPER_LEVEL          [community, oid]
//   GET, GET_NEXT, DESCRIBE          [community, oid]
//   SET                              [community, oid, value]
//   SUBSCRIBE_TRAP                   [community, oid, threshold, period_ms, host:port]
//   DISCOVERY_PROBE                  [community]
//   DISCOVERY_REPLY, AGENT_ANNOUNCE,
//   AGENT_FAREWELL                   [address, tcp_port, udp_port]
//   EVENT_REPORT                     [instance oid, value, threshold, unix_ms]
//
// Responses (fields are cipher blocks when ENCRYPTED):
//   levels (INITIALISE, NEXT/UPPER)  [listing]  one "name identifier" per line
//   GET, GET_NEXT, SET               [instance oid, type, value]
//   DESCRIBE                         [name, syntax, access, status, description]
//   CONNECTION_RELEASE               []
//   SUBSCRIBE_TRAP                   [subscription id]
//   ERROR_RESPONSE                   [reason, detail]

struct Message {
  MessageType type = MessageType::Response;
  std::uint8_t flags = 0;
  std::uint32_t correlation_id = 0;
  std::vector<std::string> fields;  // raw bytes

  bool has_flag(std::uint8_t f) const { return (flags & f) != 0; }
  bool operator==(const Message&) const = default;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

/// magic 0x4E 0x4D | version 0x01 | type | flags | correlation u32 | count u8 |
/// count x (u16 length + bytes)
std::vector<std::uint8_t> encode_message(const Message& m);

/// Inverse of encode_message. Throws DecodeError carrying BadMagic,
/// BadVersion, UnknownType, Truncated, TrailingGarbage or TooManyFields.
Message decode_message(std::span<const std::uint8_t> bytes);

/// Bytes a signature covers: the encoding with the signature field removed
/// and the SIGNED flag set.
std::vector<std::uint8_t> signed_span(const Message& m);

/// 4-byte big-endian length followed by the payload.
std::vector<std::uint8_t> make_frame(std::span<const std::uint8_t> payload);

/// Ordered byte stream (a TCP connection). read_some returns 0 on orderly
/// close and throws on transport failure.
class ByteStream {
 public:
  virtual ~ByteStream() = default;
  virtual std::size_t read_some(std::span<std::uint8_t> out) = 0;
};

/// Blocks until one whole frame arrives. Throws PeerClosed when the stream
/// ends between frames, Truncated when it ends inside one and OversizeFrame
/// when the declared length exceeds 1 MiB.
std::vector<std::uint8_t> read_frame(ByteStream& in);

/// Per-type field accessors shared by agent and manager.
struct LevelEntry;
std::string encode_level_listing(std::span<const LevelEntry> entries);
std::vector<LevelEntry> decode_level_listing(std::string_view listing);

}  // namespace nm
