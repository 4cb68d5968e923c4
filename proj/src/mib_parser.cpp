#include "nm/mib_parser.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace nm {

namespace {

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
}

bool is_identifier(const MibToken& t) {
  return t.kind == MibToken::Kind::Word && std::isalpha(static_cast<unsigned char>(t.text.front()));
}

bool is_decimal(const MibToken& t) {
  return t.kind == MibToken::Kind::Number && t.text.front() != '-';
}

constexpr std::array<std::string_view, 12> kClauseKeywords = {
    "SYNTAX", "ACCESS", "MAX-ACCESS", "MIN-ACCESS", "STATUS", "DESCRIPTION",
    "REFERENCE", "INDEX", "AUGMENTS", "DEFVAL", "UNITS", "::=",
};

bool is_clause_keyword(const MibToken& t) {
  if (t.kind == MibToken::Kind::Quoted) return false;
  return std::find(kClauseKeywords.begin(), kClauseKeywords.end(), t.text) != kClauseKeywords.end();
}

std::string trim(std::string_view s) {
  auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

// Canonical single-line rendering of a SYNTAX clause. Depends only on the
// token sequence, so comments and line layout never change the result.
std::string render_syntax(std::span<const MibToken> toks) {
  std::string out;
  const MibToken* prev = nullptr;
  for (const auto& t : toks) {
    bool space = !out.empty();
    if (t.is(")") || t.is(",") || t.is("..")) space = false;
    if (prev && (prev->is("(") || prev->is(".."))) space = false;
    if (prev && t.is("(") && prev->kind == MibToken::Kind::Word &&
        std::islower(static_cast<unsigned char>(prev->text.front())))
      space = false;
    if (space) out += ' ';
    if (t.kind == MibToken::Kind::Quoted) {
      out += '"';
      out += t.text;
      out += '"';
    } else {
      out += t.text;
    }
    prev = &t;
  }
  return out;
}

[[noreturn]] void malformed(const MibToken& at, const std::string& what) {
  throw MibParseError(at.line, what);
}

struct OidComponent {
  std::string name;
  bool has_number = false;
  std::string number;
};

// Parses `{ a b(2) n }` starting at the opening brace; returns the index one
// past the closing brace.
std::size_t parse_assignment(std::span<const MibToken> w, std::size_t i, MibRecord& rec) {
  const MibToken& anchor = w[i - 1];
  if (i >= w.size() || !w[i].is("{")) malformed(anchor, rec.name + ": expected '{' after '::='");
  ++i;
  std::vector<OidComponent> comps;
  while (i < w.size() && !w[i].is("}")) {
    const MibToken& t = w[i];
    OidComponent c;
    if (t.kind == MibToken::Kind::Word) {
      c.name = t.text;
      if (i + 3 < w.size() && w[i + 1].is("(") && w[i + 3].is(")")) {
        if (!is_decimal(w[i + 2])) malformed(w[i + 2], rec.name + ": non-decimal sub-identifier");
        c.has_number = true;
        c.number = w[i + 2].text;
        i += 3;
      }
    } else if (t.kind == MibToken::Kind::Number) {
      c.has_number = true;
      c.number = t.text;
    } else {
      malformed(t, rec.name + ": unexpected '" + t.text + "' in OID assignment");
    }
    comps.push_back(std::move(c));
    ++i;
  }
  if (i >= w.size()) malformed(w.back(), rec.name + ": unterminated OID assignment");
  const MibToken& close = w[i];
  if (comps.size() < 2) malformed(close, rec.name + ": OID assignment needs '{ parent n }'");
  const auto& last = comps.back();
  const auto& parent = comps[comps.size() - 2];
  if (!last.has_number || last.number.front() == '-')
    malformed(close, rec.name + ": sub-identifier is not a decimal integer");
  if (parent.name.empty()) malformed(close, rec.name + ": OID assignment has no parent name");
  unsigned long long value = 0;
  for (char c : last.number) {
    value = value * 10 + static_cast<unsigned>(c - '0');
    if (value > 0xFFFFFFFFull) malformed(close, rec.name + ": sub-identifier out of range");
  }
  rec.parent_name = parent.name;
  rec.identifier = static_cast<std::uint32_t>(value);
  return i + 1;
}

}  // namespace

std::string strip_comments(std::string_view line, bool& in_string) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '"') {
      in_string = !in_string;
    } else if (!in_string && c == '-' && i + 1 < line.size() && line[i + 1] == '-') {
      return std::string(line.substr(0, i));
    }
  }
  return std::string(line);
}

std::string strip_comments(std::string_view line) {
  bool in_string = false;
  return strip_comments(line, in_string);
}

std::vector<MibToken> tokenize_mib(std::string_view source) {
  std::string text;
  text.reserve(source.size());
  bool in_string = false;
  std::size_t pos = 0;
  while (pos <= source.size()) {
    auto eol = source.find('\n', pos);
    auto line = source.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    text += strip_comments(line, in_string);
    if (eol == std::string_view::npos) break;
    text += '\n';
    pos = eol + 1;
  }

  std::vector<MibToken> out;
  int line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    MibToken tok;
    tok.line = line;
    if (c == '"') {
      auto close = text.find('"', i + 1);
      if (close == std::string::npos) close = text.size();
      std::string_view body(text.data() + i + 1, close - i - 1);
      line += static_cast<int>(std::count(body.begin(), body.end(), '\n'));
      tok.kind = MibToken::Kind::Quoted;
      tok.text = std::string(body);
      i = close + 1;
    } else if (text.compare(i, 3, "::=") == 0) {
      tok.kind = MibToken::Kind::Punct;
      tok.text = "::=";
      i += 3;
    } else if (text.compare(i, 2, "..") == 0) {
      tok.kind = MibToken::Kind::Punct;
      tok.text = "..";
      i += 2;
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '-' && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
      std::size_t j = i + 1;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      if (j < text.size() && is_word_char(text[j]) && c != '-') {
        while (j < text.size() && is_word_char(text[j])) ++j;
        tok.kind = MibToken::Kind::Word;
      } else {
        tok.kind = MibToken::Kind::Number;
      }
      tok.text = text.substr(i, j - i);
      i = j;
    } else if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t j = i + 1;
      while (j < text.size() && is_word_char(text[j])) {
        if (text[j] == '-' && j + 1 < text.size() && text[j + 1] == '-') break;
        ++j;
      }
      // A trailing hyphen is punctuation, not part of the name.
      while (j > i + 1 && text[j - 1] == '-') --j;
      tok.kind = MibToken::Kind::Word;
      tok.text = text.substr(i, j - i);
      i = j;
    } else {
      tok.kind = MibToken::Kind::Punct;
      tok.text = std::string(1, c);
      ++i;
    }
    out.push_back(std::move(tok));
  }
  return out;
}

bool starts_object_definition(std::span<const MibToken> w) {
  if (w.size() < 2 || !is_identifier(w[0])) return false;
  if (w[1].is("OBJECT-TYPE")) return !(w.size() > 2 && w[2].is("MACRO"));
  return w.size() >= 4 && w[1].is("OBJECT") && w[2].is("IDENTIFIER") && w[3].is("::=");
}

MibRecord parse_object_definition(std::span<const MibToken> w, std::size_t* consumed) {
  if (w.empty()) throw MibParseError(0, "empty definition window");
  if (!starts_object_definition(w)) malformed(w[0], "not an OBJECT-TYPE or OBJECT IDENTIFIER definition");

  MibRecord rec;
  rec.name = w[0].text;
  std::size_t i;
  if (w[1].is("OBJECT-TYPE")) {
    i = 2;
    while (true) {
      if (i >= w.size() || (i > 2 && starts_object_definition(w.subspan(i))))
        malformed(i < w.size() ? w[i] : w.back(), rec.name + ": missing '::= { parent n }' clause");
      const MibToken& kw = w[i];
      if (kw.is("::=")) break;
      if (kw.is("ACCESS") || kw.is("MAX-ACCESS")) {
        if (i + 1 >= w.size()) malformed(kw, rec.name + ": ACCESS without value");
        rec.access = w[i + 1].text;
        i += 2;
      } else if (kw.is("STATUS")) {
        if (i + 1 >= w.size()) malformed(kw, rec.name + ": STATUS without value");
        rec.status = w[i + 1].text;
        i += 2;
      } else if (kw.is("DESCRIPTION")) {
        if (i + 1 >= w.size() || w[i + 1].kind != MibToken::Kind::Quoted)
          malformed(kw, rec.name + ": DESCRIPTION without quoted text");
        rec.description = trim(w[i + 1].text);
        i += 2;
      } else {
        // SYNTAX or a clause we do not record: consume up to the next clause
        // keyword outside braces.
        bool is_syntax = kw.is("SYNTAX");
        std::size_t j = i + 1;
        int depth = 0;
        while (j < w.size()) {
          if (w[j].is("{")) ++depth;
          if (w[j].is("}")) --depth;
          if (depth <= 0 && is_clause_keyword(w[j])) break;
          if (depth <= 0 && starts_object_definition(w.subspan(j))) break;
          ++j;
        }
        if (is_syntax) rec.syntax = render_syntax(w.subspan(i + 1, j - i - 1));
        i = j;
      }
    }
  } else {
    i = 3;
  }
  // w[i] is "::="
  std::size_t end = parse_assignment(w, i + 1, rec);
  if (consumed) *consumed = end;
  return rec;
}

std::vector<MibRecord> parse_mib(std::string_view source) {
  auto toks = tokenize_mib(source);
  std::span<const MibToken> all(toks);
  std::vector<MibRecord> out;
  std::size_t i = 0;
  while (i < toks.size()) {
    if (toks[i].is("IMPORTS") || toks[i].is("EXPORTS")) {
      while (i < toks.size() && !toks[i].is(";")) ++i;
      ++i;
      continue;
    }
    if (i + 1 < toks.size() && toks[i + 1].is("MACRO")) {
      while (i < toks.size() && !toks[i].is("END")) ++i;
      ++i;
      continue;
    }
    if (starts_object_definition(all.subspan(i))) {
      std::size_t consumed = 0;
      auto rec = parse_object_definition(all.subspan(i), &consumed);
      rec.record_index = static_cast<std::uint32_t>(out.size());
      out.push_back(std::move(rec));
      i += consumed;
      continue;
    }
    ++i;
  }
  return out;
}

}  // namespace nm
