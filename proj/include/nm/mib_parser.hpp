#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nm/error.hpp"

namespace nm {

/// One parsed MIB object. Fields absent from the source are empty strings.
struct MibRecord {
  std::string name;
  std::string syntax;
  std::string access;
  std::string status;
  std::string description;
  std::string parent_name;
  std::uint32_t identifier = 0;
  std::uint32_t record_index = 0;

  bool operator==(const MibRecord&) const = default;
};

/// Error raised for a definition the keyword extractor cannot complete.
class MibParseError : public Error {
 public:
  MibParseError(int line, const std::string& what)
      : Error(Errc::MalformedDefinition, "line " + std::to_string(line) + ": " + what), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Removes a `--` comment running to end of line. Quoted text is never
/// treated as a comment.
std::string strip_comments(std::string_view line);

/// Same rule, but `in_string` carries the open-quote state across lines so a
/// multi-line DESCRIPTION does not lose its `--` sequences.
std::string strip_comments(std::string_view line, bool& in_string);

struct MibToken {
  enum class Kind { Word, Number, Quoted, Punct };

  Kind kind = Kind::Word;
  std::string text;  // quoted strings hold their contents without the quotes
  int line = 1;

  bool is(std::string_view s) const { return kind != Kind::Quoted && text == s; }
};

/// Comment-free token stream with 1-based source line numbers.
std::vector<MibToken> tokenize_mib(std::string_view source);

/// Parses one `name OBJECT-TYPE ...` or `name OBJECT IDENTIFIER ::= {...}`
/// definition starting at window[0]. `consumed`, when given, receives the
/// number of tokens the definition occupied. record_index is left at 0.
MibRecord parse_object_definition(std::span<const MibToken> window, std::size_t* consumed = nullptr);

/// True when window[0..] starts a definition that parse_object_definition accepts.
bool starts_object_definition(std::span<const MibToken> window);

/// Every OBJECT-TYPE and OBJECT IDENTIFIER assignment in source order, with
/// record_index assigned 0..N-1.
std::vector<MibRecord> parse_mib(std::string_view source);

}  // namespace nm
