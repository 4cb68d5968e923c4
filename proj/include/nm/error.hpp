#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nm {

// One code space for every layer so the C API can map failures without
// knowing which module raised them.
enum class Errc {
  // mib parser
  MalformedDefinition,
  // raf store
  SinkFailure,
  NonDenseIndices,
  FieldTooLong,
  IndexOutOfRange,
  CorruptImage,
  // mib tree
  OrphanRecord,
  DuplicateSibling,
  NoSuchObject,
  EndOfMib,
  InvalidOid,
  // wire protocol
  TooManyFields,
  BadMagic,
  BadVersion,
  UnknownType,
  Truncated,
  TrailingGarbage,
  PeerClosed,
  OversizeFrame,
  // security
  MissingPrivateExponent,
  BadBlockLength,
  SentinelMismatch,
  BadKeyFile,
  // agent
  NoSuchInstance,
  NotWritable,
  BadRequest,
  BadConfig,
  PortInUse,
  // manager
  ConnectTimeout,
  DeniedByAgent,
  Timeout,
  AgentError,
  StoppedSession,
  ProtocolError,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  explicit Error(Errc code) : Error(code, std::string(errc_name(code))) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace nm
