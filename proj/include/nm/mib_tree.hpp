#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "nm/mib_parser.hpp"
#include "nm/raf_store.hpp"

namespace nm {

struct MibTreeNode {
  std::string name;
  std::uint32_t identifier = 0;
  std::vector<std::unique_ptr<MibTreeNode>> children;  // ascending identifier
  std::optional<std::uint32_t> raf_index;               // absent for skeleton nodes
  MibTreeNode* parent = nullptr;

  bool is_leaf() const { return children.empty(); }
  const MibTreeNode* child_by_id(std::uint32_t id) const;
  const MibTreeNode* child_by_name(std::string_view n) const;
};

/// Dotted OID path; each component is a name or a numeric sub-identifier.
struct OidPath {
  std::vector<std::variant<std::string, std::uint32_t>> components;

  /// Syntax-only parse of "1.3.6.1.2.1.1.1.0", "sysDescr.0", "mib-2.system".
  /// Throws Errc::InvalidOid on empty components or illegal characters.
  static OidPath parse(std::string_view text);
  static bool valid(std::string_view text);

  std::string str() const;
};

using Oid = std::vector<std::uint32_t>;

std::string oid_to_string(const Oid& oid);
Oid oid_from_string(std::string_view numeric);  // numeric dotted only
bool oid_less(const Oid& a, const Oid& b);       // lexicographic by component

struct LevelEntry {
  std::string name;
  std::uint32_t identifier = 0;

  bool operator==(const LevelEntry&) const = default;
};

struct Resolution {
  const MibTreeNode* node = nullptr;
  Oid instance_suffix;  // trailing numerics past a leaf, e.g. the ".0"
};

/// In-memory MIB tree. Built once from a RAF and read-only afterwards, so
/// concurrent readers need no locking.
class MibTree {
 public:
  /// Root seeded with iso.org.dod.internet and its standard children.
  MibTree();
  MibTree(MibTree&&) noexcept = default;
  MibTree& operator=(MibTree&&) noexcept = default;

  static constexpr std::size_t kSkeletonSize = 10;  // including the root

  static MibTree build(ByteSource& raf);
  static MibTree build(const std::vector<MibRecord>& records);

  /// Links a record under its parent, found by recursive search (exact name
  /// first, then case-insensitive).
  void insert(const MibRecord& record);

  const MibTreeNode& root() const { return *root_; }
  std::size_t size() const { return size_; }

  Resolution resolve(const OidPath& path) const;
  Resolution resolve(std::string_view text) const { return resolve(OidPath::parse(text)); }

  std::vector<LevelEntry> initial_level() const { return level_of(*root_); }
  std::vector<LevelEntry> next_level(const OidPath& path) const;
  std::vector<LevelEntry> upper_level(const OidPath& path) const;

  /// Depth-first pre-order successor; throws Errc::EndOfMib after the last node.
  const MibTreeNode& successor(const MibTreeNode& node) const;
  const MibTreeNode& object_successor(const OidPath& path) const { return successor(*resolve(path).node); }

  const MibTreeNode* find(std::string_view name) const;
  static Oid oid_of(const MibTreeNode& node);
  static std::size_t depth_of(const MibTreeNode& node);
  static std::vector<LevelEntry> level_of(const MibTreeNode& node);

 private:
  MibTreeNode& add_child(MibTreeNode& parent, std::string name, std::uint32_t id,
                         std::optional<std::uint32_t> raf_index);

  std::unique_ptr<MibTreeNode> root_;
  std::size_t size_ = 0;
};

}  // namespace nm
