#include "nm/error.hpp"

namespace nm {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedDefinition: return "MalformedDefinition";
    case Errc::SinkFailure: return "SinkFailure";
    case Errc::NonDenseIndices: return "NonDenseIndices";
    case Errc::FieldTooLong: return "FieldTooLong";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::CorruptImage: return "CorruptImage";
    case Errc::OrphanRecord: return "OrphanRecord";
    case Errc::DuplicateSibling: return "DuplicateSibling";
    case Errc::NoSuchObject: return "NoSuchObject";
    case Errc::EndOfMib: return "EndOfMib";
    case Errc::InvalidOid: return "InvalidOid";
    case Errc::TooManyFields: return "TooManyFields";
    case Errc::BadMagic: return "BadMagic";
    case Errc::BadVersion: return "BadVersion";
    case Errc::UnknownType: return "UnknownType";
    case Errc::Truncated: return "Truncated";
    case Errc::TrailingGarbage: return "TrailingGarbage";
    case Errc::PeerClosed: return "PeerClosed";
    case Errc::OversizeFrame: return "OversizeFrame";
    case Errc::MissingPrivateExponent: return "MissingPrivateExponent";
    case Errc::BadBlockLength: return "BadBlockLength";
    case Errc::SentinelMismatch: return "SentinelMismatch";
    case Errc::BadKeyFile: return "BadKeyFile";
    case Errc::NoSuchInstance: return "NoSuchInstance";
    case Errc::NotWritable: return "NotWritable";
    case Errc::BadRequest: return "BadRequest";
    case Errc::BadConfig: return "BadConfig";
    case Errc::PortInUse: return "PortInUse";
    case Errc::ConnectTimeout: return "ConnectTimeout";
    case Errc::DeniedByAgent: return "DeniedByAgent";
    case Errc::Timeout: return "Timeout";
    case Errc::AgentError: return "AgentError";
    case Errc::StoppedSession: return "StoppedSession";
    case Errc::ProtocolError: return "ProtocolError";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace nm
