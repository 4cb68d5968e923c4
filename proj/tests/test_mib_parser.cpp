#include <algorithm>
#include <random>
#include <regex>
#include <sstream>

#include "doctest.h"
#include "nm/mib_parser.hpp"
#include "support.hpp"

using namespace nm;

namespace {

// Independent oracle for comment stripping: the cut point is the first "--"
// preceded by an even number of double quotes.
std::string oracle_strip(const std::string& line) {
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    if (line[i] == '-' && line[i + 1] == '-') {
      auto quotes = std::count(line.begin(), line.begin() + static_cast<std::ptrdiff_t>(i), '"');
      if (quotes % 2 == 0) return line.substr(0, i);
    }
  }
  return line;
}

// Oracle for definition order: names of lines that open a definition,
// scanning raw lines with a regex.
std::vector<std::string> oracle_definition_names(const std::string& text) {
  static const std::regex def(R"(^\s*([A-Za-z][A-Za-z0-9-]*)\s+(OBJECT-TYPE|OBJECT\s+IDENTIFIER\s*::=))");
  std::vector<std::string> names;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (std::regex_search(line, m, def)) names.push_back(m[1]);
  }
  return names;
}

const char* kIfTypeBlock = R"(ifType OBJECT-TYPE
    SYNTAX  INTEGER {
                other(1),          -- none of the following
                regular1822(2),
                ethernet-csmacd(6)
            }
    ACCESS  read-only
    STATUS  mandatory
    DESCRIPTION
            "The type of interface, distinguished according to
            the physical/link protocol(s) immediately `below'
            the network layer in the protocol stack."
    ::= { ifEntry 3 })";

const char* kSynthetic = R"(TEST-MIB DEFINITIONS ::= BEGIN
IMPORTS mgmt, OBJECT-TYPE FROM RFC1155-SMI;
lab       OBJECT IDENTIFIER ::= { mgmt 99 }
labA OBJECT-TYPE
    SYNTAX  INTEGER
    ACCESS  read-only
    STATUS  mandatory
    DESCRIPTION "first"
    ::= { lab 1 }
LabEntry ::= SEQUENCE { labB INTEGER }
labB OBJECT-TYPE
    SYNTAX  Counter
    ACCESS  read-write
    STATUS  mandatory
    ::= { lab 2 }
labGroup  OBJECT IDENTIFIER ::= { lab 3 }
labC OBJECT-TYPE
    SYNTAX  DisplayString (SIZE (0..255))
    MAX-ACCESS  read-create
    STATUS  current
    DESCRIPTION "third -- not a comment"
    ::= { labGroup 1 }
END
)";

}  // namespace

TEST_CASE("strip_comments examples") {
  CHECK(strip_comments("ifType OBJECT-TYPE -- the type") == "ifType OBJECT-TYPE ");
  CHECK(strip_comments("plain line") == "plain line");
  CHECK(strip_comments(R"(DESCRIPTION "a -- b")") == R"(DESCRIPTION "a -- b")");
  CHECK(strip_comments("-- whole line") == "");
  CHECK(strip_comments(R"("x" -- y "z")") == R"("x" )");
}

TEST_CASE("strip_comments agrees with the line-scanner oracle") {
  std::mt19937_64 rng(7);
  const std::string alphabet = "ab -\"";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::uniform_int_distribution<int> len(0, 30);
  for (int i = 0; i < 5000; ++i) {
    std::string line;
    for (int j = len(rng); j > 0; --j) line += alphabet[pick(rng)];
    REQUIRE_MESSAGE(strip_comments(line) == oracle_strip(line), line);
  }
}

TEST_CASE("strip_comments carries quote state across lines") {
  bool in_string = false;
  CHECK(strip_comments(R"(DESCRIPTION "starts here)", in_string) == R"(DESCRIPTION "starts here)");
  CHECK(in_string);
  CHECK(strip_comments("still -- text\" -- gone", in_string) == "still -- text\" ");
  CHECK_FALSE(in_string);
}

TEST_CASE("parse_object_definition") {
  SUBCASE("OBJECT IDENTIFIER assignment") {
    auto toks = tokenize_mib("mib-2 OBJECT IDENTIFIER ::= { mgmt 1 }");
    auto rec = parse_object_definition(toks);
    CHECK(rec.name == "mib-2");
    CHECK(rec.parent_name == "mgmt");
    CHECK(rec.identifier == 1);
    CHECK(rec.syntax.empty());
    CHECK(rec.access.empty());
    CHECK(rec.status.empty());
    CHECK(rec.description.empty());
  }
  SUBCASE("OBJECT-TYPE with enumerated syntax") {
    auto toks = tokenize_mib(kIfTypeBlock);
    std::size_t used = 0;
    auto rec = parse_object_definition(toks, &used);
    CHECK(used == toks.size());
    CHECK(rec.name == "ifType");
    CHECK(rec.syntax == "INTEGER { other(1), regular1822(2), ethernet-csmacd(6) }");
    CHECK(rec.access == "read-only");
    CHECK(rec.status == "mandatory");
    CHECK(rec.parent_name == "ifEntry");
    CHECK(rec.identifier == 3);
    CHECK(rec.description.rfind("The type of interface", 0) == 0);
    CHECK(rec.description.find("\n") != std::string::npos);
    CHECK(rec.description.back() == '.');
  }
  SUBCASE("absent DESCRIPTION gives empty field") {
    auto toks = tokenize_mib("x OBJECT-TYPE SYNTAX Counter ACCESS read-only STATUS mandatory ::= { y 4 }");
    auto rec = parse_object_definition(toks);
    CHECK(rec.description.empty());
    CHECK(rec.syntax == "Counter");
  }
  SUBCASE("sized syntax rendering") {
    auto toks = tokenize_mib("d OBJECT-TYPE SYNTAX DisplayString (SIZE (0..255)) ACCESS read-only ::= { s 1 }");
    CHECK(parse_object_definition(toks).syntax == "DisplayString (SIZE (0..255))");
  }
  SUBCASE("multi-component assignment uses the last two components") {
    auto toks = tokenize_mib("internet OBJECT IDENTIFIER ::= { iso org(3) dod(6) 1 }");
    auto rec = parse_object_definition(toks);
    CHECK(rec.parent_name == "dod");
    CHECK(rec.identifier == 1);
  }
  SUBCASE("missing assignment clause") {
    auto toks = tokenize_mib("x OBJECT-TYPE SYNTAX INTEGER ACCESS read-only STATUS mandatory");
    CHECK_THROWS_AS(parse_object_definition(toks), MibParseError);
  }
  SUBCASE("non-decimal sub-identifier") {
    auto toks = tokenize_mib("x OBJECT IDENTIFIER ::= { y z }");
    try {
      parse_object_definition(toks);
      FAIL("expected MalformedDefinition");
    } catch (const MibParseError& e) {
      CHECK(e.code() == Errc::MalformedDefinition);
      CHECK(e.line() == 1);
    }
  }
}

TEST_CASE("parse_mib on RFC 1213") {
  auto recs = parse_mib(test::mib2_text());
  REQUIRE(recs.size() >= 3);
  CHECK(recs[0].name == "mib-2");
  CHECK(recs[0].record_index == 0);
  CHECK(recs[1].name == "system");
  CHECK(recs[2].name == "interfaces");
  for (std::size_t i = 0; i < recs.size(); ++i) CHECK(recs[i].record_index == i);
  CHECK(recs.size() == oracle_definition_names(test::mib2_text()).size());
}

TEST_CASE("parse_mib empty and synthetic documents") {
  CHECK(parse_mib("").empty());
  CHECK(parse_mib("-- only a comment\n").empty());

  auto recs = parse_mib(kSynthetic);
  auto expected = oracle_definition_names(kSynthetic);
  REQUIRE(recs.size() == 5);
  REQUIRE(expected.size() == 5);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(recs[i].name == expected[i]);
    CHECK(recs[i].record_index == i);
  }
  CHECK(recs[4].access == "read-create");
  CHECK(recs[4].description == "third -- not a comment");
  CHECK(recs[4].syntax == "DisplayString (SIZE (0..255))");
}

TEST_CASE("parse_mib skips non-record constructs") {
  const char* text = R"(X-MIB DEFINITIONS ::= BEGIN
IMPORTS MODULE-IDENTITY, OBJECT-TYPE FROM SNMPv2-SMI;
xMib MODULE-IDENTITY
    LAST-UPDATED "9901010000Z"
    ORGANIZATION "lab"
    CONTACT-INFO "nobody"
    DESCRIPTION "module"
    ::= { experimental 77 }
Tc ::= TEXTUAL-CONVENTION
    STATUS current
    DESCRIPTION "tc"
    SYNTAX OCTET STRING
OBJECT-TYPE MACRO ::= BEGIN
    TYPE NOTATION ::= "SYNTAX" type(TYPE ObjectSyntax)
END
xObj OBJECT-TYPE
    SYNTAX Tc
    MAX-ACCESS read-only
    STATUS current
    DESCRIPTION "obj"
    INDEX { xIdx }
    DEFVAL { 0 }
    ::= { experimental 78 }
END)";
  auto recs = parse_mib(text);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].name == "xObj");
  CHECK(recs[0].syntax == "Tc");
  CHECK(recs[0].access == "read-only");
}

TEST_CASE("parse_mib reports line numbers of malformed definitions") {
  try {
    parse_mib("a OBJECT IDENTIFIER ::= { mgmt 1 }\n\nb OBJECT IDENTIFIER ::= { a x }\n");
    FAIL("expected error");
  } catch (const MibParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("parse_mib invariants") {
  const std::string text = test::mib2_text();
  auto base = parse_mib(text);

  SUBCASE("determinism") { CHECK(parse_mib(text) == base); }

  SUBCASE("comment insensitivity") {
    std::mt19937_64 rng(11);
    std::bernoulli_distribution coin(0.3);
    for (int round = 0; round < 5; ++round) {
      std::istringstream in(text);
      std::ostringstream out;
      std::string line;
      bool in_string = false;
      while (std::getline(in, line)) {
        if (!in_string && coin(rng)) out << "-- noise -- " << round << "\n";
        strip_comments(line, in_string);
        out << line;
        if (!in_string && coin(rng)) out << " -- trailing \"quote\" noise";
        out << "\n";
      }
      REQUIRE(parse_mib(out.str()) == base);
    }
  }

  SUBCASE("each definition parses the same in isolation") {
    auto toks = tokenize_mib(text);
    std::span<const MibToken> all(toks);
    std::size_t found = 0;
    bool in_imports = false;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (toks[i].is("IMPORTS")) in_imports = true;
      if (in_imports) {
        if (toks[i].is(";")) in_imports = false;
        continue;
      }
      if (!starts_object_definition(all.subspan(i))) continue;
      std::size_t used = 0;
      parse_object_definition(all.subspan(i), &used);
      auto isolated = parse_object_definition(all.subspan(i, used));
      isolated.record_index = base[found].record_index;
      REQUIRE(isolated == base[found]);
      ++found;
      i += used - 1;
    }
    CHECK(found == base.size());
  }
}
