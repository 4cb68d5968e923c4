#include "nm/mib_tree.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace nm {

namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

template <typename Pred>
const MibTreeNode* search(const MibTreeNode& node, const Pred& pred) {
  if (pred(node)) return &node;
  for (const auto& c : node.children)
    if (auto* hit = search(*c, pred)) return hit;
  return nullptr;
}

bool parse_uint(std::string_view s, std::uint32_t& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool is_name(std::string_view s) {
  if (s.empty() || !std::isalpha(static_cast<unsigned char>(s.front()))) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
}

}  // namespace

const MibTreeNode* MibTreeNode::child_by_id(std::uint32_t id) const {
  auto it = std::lower_bound(children.begin(), children.end(), id,
                             [](const auto& c, std::uint32_t v) { return c->identifier < v; });
  return it != children.end() && (*it)->identifier == id ? it->get() : nullptr;
}

const MibTreeNode* MibTreeNode::child_by_name(std::string_view n) const {
  for (const auto& c : children)
    if (c->name == n) return c.get();
  return nullptr;
}

OidPath OidPath::parse(std::string_view text) {
  if (text.empty()) throw Error(Errc::InvalidOid, "empty OID");
  OidPath p;
  std::size_t pos = 0;
  while (true) {
    auto dot = text.find('.', pos);
    auto comp = text.substr(pos, dot == std::string_view::npos ? std::string_view::npos : dot - pos);
    std::uint32_t num = 0;
    if (parse_uint(comp, num)) {
      p.components.emplace_back(num);
    } else if (is_name(comp)) {
      p.components.emplace_back(std::string(comp));
    } else {
      throw Error(Errc::InvalidOid, "invalid OID '" + std::string(text) + "'");
    }
    if (dot == std::string_view::npos) break;
    pos = dot + 1;
  }
  return p;
}

bool OidPath::valid(std::string_view text) {
  try {
    parse(text);
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::string OidPath::str() const {
  std::string out;
  for (const auto& c : components) {
    if (!out.empty()) out += '.';
    if (auto* s = std::get_if<std::string>(&c))
      out += *s;
    else
      out += std::to_string(std::get<std::uint32_t>(c));
  }
  return out;
}

std::string oid_to_string(const Oid& oid) {
  std::string out;
  for (auto c : oid) {
    if (!out.empty()) out += '.';
    out += std::to_string(c);
  }
  return out;
}

Oid oid_from_string(std::string_view numeric) {
  Oid out;
  for (const auto& c : OidPath::parse(numeric).components) {
    auto* n = std::get_if<std::uint32_t>(&c);
    if (!n) throw Error(Errc::InvalidOid, "not a numeric OID: " + std::string(numeric));
    out.push_back(*n);
  }
  return out;
}

bool oid_less(const Oid& a, const Oid& b) { return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end()); }

MibTree::MibTree() : root_(std::make_unique<MibTreeNode>()) {
  size_ = 1;
  auto& iso = add_child(*root_, "iso", 1, std::nullopt);
  auto& org = add_child(iso, "org", 3, std::nullopt);
  auto& dod = add_child(org, "dod", 6, std::nullopt);
  auto& internet = add_child(dod, "internet", 1, std::nullopt);
  add_child(internet, "directory", 1, std::nullopt);
  add_child(internet, "mgmt", 2, std::nullopt);
  add_child(internet, "experimental", 3, std::nullopt);
  auto& priv = add_child(internet, "private", 4, std::nullopt);
  add_child(priv, "enterprises", 1, std::nullopt);
}

MibTreeNode& MibTree::add_child(MibTreeNode& parent, std::string name, std::uint32_t id,
                                std::optional<std::uint32_t> raf_index) {
  auto node = std::make_unique<MibTreeNode>();
  node->name = std::move(name);
  node->identifier = id;
  node->raf_index = raf_index;
  node->parent = &parent;
  auto it = std::lower_bound(parent.children.begin(), parent.children.end(), id,
                             [](const auto& c, std::uint32_t v) { return c->identifier < v; });
  auto& ref = **parent.children.insert(it, std::move(node));
  ++size_;
  return ref;
}

void MibTree::insert(const MibRecord& record) {
  const MibTreeNode* parent = find(record.parent_name);
  if (!parent)
    parent = search(*root_, [&](const MibTreeNode& n) { return !n.name.empty() && iequals(n.name, record.parent_name); });
  if (!parent)
    throw Error(Errc::OrphanRecord, "record '" + record.name + "': parent '" + record.parent_name + "' not in tree");
  auto& p = const_cast<MibTreeNode&>(*parent);
  if (auto* existing = p.child_by_id(record.identifier)) {
    // A MIB may restate a skeleton node (e.g. `internet ::= { dod 1 }`); it
    // then owns that node's record.
    if (!existing->raf_index && existing->name == record.name) {
      const_cast<MibTreeNode*>(existing)->raf_index = record.record_index;
      return;
    }
    throw Error(Errc::DuplicateSibling, "record '" + record.name + "': identifier " +
                                            std::to_string(record.identifier) + " already used by '" +
                                            existing->name + "' under '" + p.name + "'");
  }
  add_child(p, record.name, record.identifier, record.record_index);
}

MibTree MibTree::build(ByteSource& raf) {
  RafReader reader(raf);
  MibTree tree;
  for (std::uint32_t i = 0; i < reader.record_count(); ++i) tree.insert(reader.read_record(i));
  return tree;
}

MibTree MibTree::build(const std::vector<MibRecord>& records) {
  MibTree tree;
  for (const auto& r : records) tree.insert(r);
  return tree;
}

const MibTreeNode* MibTree::find(std::string_view name) const {
  return search(*root_, [&](const MibTreeNode& n) { return n.parent && n.name == name; });
}

Resolution MibTree::resolve(const OidPath& path) const {
  Resolution res;
  const MibTreeNode* node = root_.get();
  std::size_t i = 0;
  if (path.components.empty()) throw Error(Errc::InvalidOid, "empty OID");
  // A leading name need not start at the root: "sysDescr.0" is accepted.
  if (auto* first = std::get_if<std::string>(&path.components.front())) {
    const MibTreeNode* hit = node->child_by_name(*first);
    if (!hit) hit = find(*first);
    if (!hit) throw Error(Errc::NoSuchObject, "no object '" + *first + "' (depth 0)");
    node = hit;
    i = 1;
  }
  for (; i < path.components.size(); ++i) {
    const auto& comp = path.components[i];
    const MibTreeNode* next = nullptr;
    if (auto* n = std::get_if<std::uint32_t>(&comp)) {
      if (node->is_leaf() && node != root_.get()) {
        for (; i < path.components.size(); ++i) {
          auto* num = std::get_if<std::uint32_t>(&path.components[i]);
          if (!num) throw Error(Errc::NoSuchObject, "name after instance suffix in '" + path.str() + "'");
          res.instance_suffix.push_back(*num);
        }
        break;
      }
      next = node->child_by_id(*n);
    } else {
      next = node->child_by_name(std::get<std::string>(comp));
    }
    if (!next)
      throw Error(Errc::NoSuchObject, "no object at '" + path.str() + "' (depth " + std::to_string(i) + ")");
    node = next;
  }
  res.node = node;
  return res;
}

std::vector<LevelEntry> MibTree::level_of(const MibTreeNode& node) {
  std::vector<LevelEntry> out;
  out.reserve(node.children.size());
  for (const auto& c : node.children) out.push_back({c->name, c->identifier});
  return out;
}

std::vector<LevelEntry> MibTree::next_level(const OidPath& path) const { return level_of(*resolve(path).node); }

std::vector<LevelEntry> MibTree::upper_level(const OidPath& path) const {
  const MibTreeNode* node = resolve(path).node;
  if (depth_of(*node) <= 1) return level_of(*root_);
  return level_of(*node->parent->parent);
}

const MibTreeNode& MibTree::successor(const MibTreeNode& node) const {
  if (!node.children.empty()) return *node.children.front();
  const MibTreeNode* cur = &node;
  while (cur->parent) {
    const auto& sibs = cur->parent->children;
    auto it = std::find_if(sibs.begin(), sibs.end(), [&](const auto& c) { return c.get() == cur; });
    if (it != sibs.end() && ++it != sibs.end()) return **it;
    cur = cur->parent;
  }
  throw Error(Errc::EndOfMib, "no successor after '" + node.name + "'");
}

Oid MibTree::oid_of(const MibTreeNode& node) {
  Oid out;
  for (const MibTreeNode* n = &node; n->parent; n = n->parent) out.push_back(n->identifier);
  std::reverse(out.begin(), out.end());
  return out;
}

std::size_t MibTree::depth_of(const MibTreeNode& node) {
  std::size_t d = 0;
  for (const MibTreeNode* n = &node; n->parent; n = n->parent) ++d;
  return d;
}

}  // namespace nm
