#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "taxoforge/error.hpp"
#include "taxoforge/io.hpp"
#include "taxoforge/text.hpp"

namespace taxoforge {

struct NodeId {
  std::uint32_t value = 0;

  auto operator<=>(const NodeId&) const = default;
};

inline constexpr NodeId kRootId{0};

enum class NodeKind { kRoot, kCategory, kKeyphrase };

inline std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::kRoot: return "root";
    case NodeKind::kCategory: return "category";
    case NodeKind::kKeyphrase: return "keyphrase";
  }
  return "?";
}

inline NodeKind parse_node_kind(std::string_view s) {
  if (s == "root") return NodeKind::kRoot;
  if (s == "category") return NodeKind::kCategory;
  if (s == "keyphrase") return NodeKind::kKeyphrase;
  throw Error(ErrorCode::kParse, "unknown node kind '" + std::string(s) + "'");
}

struct TaxonomyNode {
  NodeId id;
  std::string label;
  std::optional<NodeId> parent;
  NodeKind kind = NodeKind::kKeyphrase;

  bool operator==(const TaxonomyNode&) const = default;
};

struct TaxonomyStats {
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;
  std::size_t num_parents = 0;  // non-root nodes with at least one child
  std::size_t num_leaves = 0;   // non-root nodes without children
  std::size_t max_depth = 0;    // in edges

  bool operator==(const TaxonomyStats&) const = default;
};

/// Rooted single-parent tree of uniquely labeled phrases.
///
/// Node ids are dense (0..size()-1) and never reused; root is id 0 with the
/// label "root". Children of a node are kept in ascending id order, which is
/// insertion order for freshly added nodes and is exactly what the file
/// format can reproduce.
class Taxonomy {
 public:
  Taxonomy() {
    nodes_.push_back({kRootId, "root", std::nullopt, NodeKind::kRoot});
    children_.emplace_back();
    by_label_.emplace("root", kRootId);
  }

  std::size_t size() const { return nodes_.size(); }
  std::size_t edge_count() const { return nodes_.size() - 1; }
  bool contains(NodeId id) const { return id.value < nodes_.size(); }
  /// Incremented by every successful mutation.
  std::uint64_t revision() const { return revision_; }

  const std::vector<TaxonomyNode>& nodes() const { return nodes_; }

  const TaxonomyNode& node(NodeId id) const {
    check(id);
    return nodes_[id.value];
  }
  const std::string& label(NodeId id) const { return node(id).label; }
  std::optional<NodeId> parent(NodeId id) const { return node(id).parent; }

  std::span<const NodeId> children(NodeId id) const {
    check(id);
    return children_[id.value];
  }

  std::optional<NodeId> find(std::string_view label) const {
    auto it = by_label_.find(std::string(label));
    if (it == by_label_.end()) return std::nullopt;
    return it->second;
  }

  NodeId add_node(std::string_view label, NodeId parent, NodeKind kind) {
    if (kind == NodeKind::kRoot) {
      throw Error(ErrorCode::kInvalidArgument, "taxonomy already has a root");
    }
    if (!contains(parent)) {
      throw Error(ErrorCode::kNotFound, "unknown parent id " + std::to_string(parent.value));
    }
    check_label(label);
    if (by_label_.contains(std::string(label))) {
      throw Error(ErrorCode::kDuplicate, "duplicate label '" + std::string(label) + "'");
    }
    NodeId id{static_cast<std::uint32_t>(nodes_.size())};
    nodes_.push_back({id, std::string(label), parent, kind});
    children_.emplace_back();
    children_[parent.value].push_back(id);
    by_label_.emplace(std::string(label), id);
    ++revision_;
    return id;
  }

  /// Re-hangs `node` and its whole subtree under `new_parent`.
  void move_node(NodeId node, NodeId new_parent) {
    check(node);
    check(new_parent);
    if (node == kRootId) throw Error(ErrorCode::kInvalidArgument, "cannot move the root");
    if (in_subtree(new_parent, node)) {
      throw Error(ErrorCode::kCycle, "cannot move '" + label(node) + "' under its own subtree");
    }
    NodeId old_parent = *nodes_[node.value].parent;
    if (old_parent == new_parent) return;
    auto& old_siblings = children_[old_parent.value];
    old_siblings.erase(std::find(old_siblings.begin(), old_siblings.end(), node));
    auto& siblings = children_[new_parent.value];
    siblings.insert(std::upper_bound(siblings.begin(), siblings.end(), node), node);
    nodes_[node.value].parent = new_parent;
    ++revision_;
  }

  /// Node first, root last.
  std::vector<NodeId> path_to_root(NodeId id) const {
    check(id);
    std::vector<NodeId> path{id};
    while (auto p = nodes_[path.back().value].parent) path.push_back(*p);
    return path;
  }

  std::size_t depth(NodeId id) const {
    check(id);
    std::size_t d = 0;
    while (auto p = nodes_[id.value].parent) {
      id = *p;
      ++d;
    }
    return d;
  }

  /// Climbs `r` parent steps but never returns the root: the walk stops at
  /// the depth-1 ancestor.
  NodeId ancestor_at_resolution(NodeId id, unsigned r) const {
    check(id);
    if (id == kRootId) throw Error(ErrorCode::kInvalidArgument, "resolution is undefined for the root");
    if (r == 0) throw Error(ErrorCode::kInvalidArgument, "resolution must be >= 1");
    for (unsigned step = 0; step < r; ++step) {
      NodeId p = *nodes_[id.value].parent;
      if (p == kRootId) break;
      id = p;
    }
    return id;
  }

  /// Ancestor at absolute depth `level`, or the node itself when it is shallower.
  NodeId ancestor_at_depth(NodeId id, std::size_t level) const {
    auto path = path_to_root(id);
    std::size_t d = path.size() - 1;
    if (d <= level) return id;
    return path[d - level];
  }

  /// True when `candidate` is `subtree_root` or one of its descendants.
  bool in_subtree(NodeId candidate, NodeId subtree_root) const {
    check(candidate);
    check(subtree_root);
    std::optional<NodeId> cur = candidate;
    while (cur) {
      if (*cur == subtree_root) return true;
      cur = nodes_[cur->value].parent;
    }
    return false;
  }

  /// Pre-order listing of the subtree rooted at `id`, inclusive.
  std::vector<NodeId> subtree(NodeId id) const {
    check(id);
    std::vector<NodeId> out;
    std::vector<NodeId> stack{id};
    while (!stack.empty()) {
      NodeId cur = stack.back();
      stack.pop_back();
      out.push_back(cur);
      const auto& kids = children_[cur.value];
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
    }
    return out;
  }

  /// Nodes with at least one child, ascending id.
  std::vector<NodeId> candidate_parents(bool include_root) const {
    std::vector<NodeId> out;
    for (const auto& n : nodes_) {
      if (!include_root && n.id == kRootId) continue;
      if (!children_[n.id.value].empty()) out.push_back(n.id);
    }
    return out;
  }

  /// Full structural check; throws on the first violated invariant.
  void validate() const {
    std::size_t roots = 0;
    std::vector<std::size_t> child_refs(nodes_.size(), 0);
    for (const auto& n : nodes_) {
      if (n.id.value >= nodes_.size() || nodes_[n.id.value].id != n.id) {
        throw Error(ErrorCode::kInvalidArgument, "node ids are not dense");
      }
      if (!n.parent) {
        ++roots;
        if (n.kind != NodeKind::kRoot || n.id != kRootId) {
          throw Error(ErrorCode::kInvalidArgument, "parentless non-root node " + n.label);
        }
        continue;
      }
      if (n.kind == NodeKind::kRoot) throw Error(ErrorCode::kInvalidArgument, "root with a parent");
      if (!contains(*n.parent)) throw Error(ErrorCode::kNotFound, "dangling parent of " + n.label);
      const auto& sib = children_[n.parent->value];
      if (std::find(sib.begin(), sib.end(), n.id) == sib.end()) {
        throw Error(ErrorCode::kInvalidArgument, "children index misses " + n.label);
      }
    }
    if (roots != 1) throw Error(ErrorCode::kInvalidArgument, "taxonomy must have exactly one root");
    std::size_t indexed = 0;
    for (std::size_t i = 0; i < children_.size(); ++i) {
      if (!std::is_sorted(children_[i].begin(), children_[i].end())) {
        throw Error(ErrorCode::kInvalidArgument, "children index out of order");
      }
      for (NodeId c : children_[i]) {
        if (!contains(c) || nodes_[c.value].parent != NodeId{static_cast<std::uint32_t>(i)}) {
          throw Error(ErrorCode::kInvalidArgument, "children index disagrees with parent pointers");
        }
        ++indexed;
      }
    }
    if (indexed != nodes_.size() - 1) throw Error(ErrorCode::kInvalidArgument, "edge count mismatch");
    // Every node reaches the root within size() steps.
    for (const auto& n : nodes_) {
      std::optional<NodeId> cur = n.id;
      std::size_t steps = 0;
      while (cur && *cur != kRootId) {
        if (++steps > nodes_.size()) throw Error(ErrorCode::kCycle, "cycle through " + n.label);
        cur = nodes_[cur->value].parent;
      }
    }
    if (by_label_.size() != nodes_.size()) throw Error(ErrorCode::kDuplicate, "label index mismatch");
  }

  bool operator==(const Taxonomy& other) const {
    return nodes_ == other.nodes_ && children_ == other.children_;
  }

  /// Builds a taxonomy from explicit node records (ids dense, in order) and
  /// validates it.
  static Taxonomy from_nodes(std::vector<TaxonomyNode> nodes) {
    if (nodes.empty() || nodes[0].kind != NodeKind::kRoot || nodes[0].parent) {
      throw Error(ErrorCode::kInvalidArgument, "node 0 must be the root");
    }
    Taxonomy t;
    t.nodes_.clear();
    t.children_.assign(nodes.size(), {});
    t.by_label_.clear();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      if (n.id.value != i) throw Error(ErrorCode::kInvalidArgument, "node ids must be dense and ordered");
      check_label(n.label);
      if (!t.by_label_.emplace(n.label, n.id).second) {
        throw Error(ErrorCode::kDuplicate, "duplicate label '" + n.label + "'");
      }
      if (n.parent) {
        if (n.parent->value >= nodes.size()) {
          throw Error(ErrorCode::kNotFound, "unknown parent of '" + n.label + "'");
        }
        t.children_[n.parent->value].push_back(n.id);
      }
    }
    t.nodes_ = std::move(nodes);
    t.validate();
    return t;
  }

 private:
  void check(NodeId id) const {
    if (!contains(id)) throw Error(ErrorCode::kNotFound, "unknown node id " + std::to_string(id.value));
  }

  static void check_label(std::string_view label) {
    if (label.empty() || normalize_phrase(label) != label) {
      throw Error(ErrorCode::kInvalidArgument, "label '" + std::string(label) + "' is not a normalized phrase");
    }
  }

  std::vector<TaxonomyNode> nodes_;
  std::vector<std::vector<NodeId>> children_;
  std::unordered_map<std::string, NodeId> by_label_;
  std::uint64_t revision_ = 0;
};

inline TaxonomyStats taxonomy_stats(const Taxonomy& t) {
  TaxonomyStats s;
  s.num_nodes = t.size();
  s.num_edges = t.edge_count();
  std::vector<std::size_t> depth(t.size(), 0);
  for (NodeId id : t.subtree(kRootId)) {
    if (auto p = t.parent(id)) depth[id.value] = depth[p->value] + 1;
    s.max_depth = std::max(s.max_depth, depth[id.value]);
    if (id == kRootId) continue;
    if (t.children(id).empty()) ++s.num_leaves;
    else ++s.num_parents;
  }
  return s;
}

// --- on-disk format -------------------------------------------------------

inline std::string serialize(const Taxonomy& t) {
  std::ostringstream out;
  out << "{\"version\":1,\"nodes\":[\n";
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& n = t.nodes()[i];
    nlohmann::ordered_json rec;
    rec["id"] = n.id.value;
    rec["label"] = n.label;
    rec["kind"] = to_string(n.kind);
    if (n.parent) rec["parent"] = n.parent->value;
    out << rec.dump() << (i + 1 < t.size() ? ",\n" : "\n");
  }
  out << "]}\n";
  return out.str();
}

inline Taxonomy deserialize_taxonomy(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("taxonomy file: ") + e.what());
  }
  auto fail = [](const std::string& msg) { return Error(ErrorCode::kParse, "taxonomy file: " + msg); };
  if (!doc.is_object()) throw fail("top level must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "version" && key != "nodes") throw fail("unknown field '" + key + "'");
  }
  if (!doc.contains("version") || doc["version"] != 1) throw fail("unsupported version");
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) throw fail("missing nodes array");

  std::vector<TaxonomyNode> nodes;
  for (const auto& rec : doc["nodes"]) {
    if (!rec.is_object()) throw fail("node record must be an object");
    for (const auto& [key, _] : rec.items()) {
      if (key != "id" && key != "label" && key != "kind" && key != "parent") {
        throw fail("unknown node field '" + key + "'");
      }
    }
    if (!rec.contains("id") || !rec["id"].is_number_unsigned()) throw fail("node id must be a non-negative integer");
    if (!rec.contains("label") || !rec["label"].is_string()) throw fail("node label must be a string");
    if (!rec.contains("kind") || !rec["kind"].is_string()) throw fail("node kind must be a string");
    TaxonomyNode n;
    n.id = NodeId{rec["id"].get<std::uint32_t>()};
    n.label = rec["label"].get<std::string>();
    n.kind = parse_node_kind(rec["kind"].get<std::string>());
    if (rec.contains("parent")) {
      if (!rec["parent"].is_number_unsigned()) throw fail("parent must be a non-negative integer");
      n.parent = NodeId{rec["parent"].get<std::uint32_t>()};
    }
    nodes.push_back(std::move(n));
  }
  try {
    return Taxonomy::from_nodes(std::move(nodes));
  } catch (const Error& e) {
    throw fail(e.what());
  }
}

inline void save_taxonomy(const Taxonomy& t, const std::filesystem::path& path) {
  io::write_atomic(path, serialize(t));
}

inline Taxonomy load_taxonomy(const std::filesystem::path& path) {
  return deserialize_taxonomy(io::read_file(path));
}

}  // namespace taxoforge

template <>
struct std::hash<taxoforge::NodeId> {
  std::size_t operator()(const taxoforge::NodeId& id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};
