#include "semihoc/hierarchy.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

#include "semihoc/binary_io.hpp"
#include "semihoc/error.hpp"

namespace semihoc {

Hierarchy::Hierarchy(std::vector<std::string> names, std::vector<NodeId> parents,
                     std::vector<NodeId> id_classes)
    : names_(std::move(names)), parents_(std::move(parents)), id_classes_(std::move(id_classes)) {
  const std::size_t n = parents_.size();
  if (n < 2) throw InputError("hierarchy needs a root and at least one child");
  if (names_.size() != n) throw InputError("hierarchy: names and parents differ in length");
  parents_[0] = kRootNode;

  depths_.assign(n, 0);
  children_.assign(n, {});
  for (NodeId c = 1; c < n; ++c) {
    // Parents precede children, which rules out cycles and disconnected parts.
    if (parents_[c] >= c)
      throw InputError("hierarchy: parent of node " + std::to_string(c) + " must have a smaller id");
    depths_[c] = depths_[parents_[c]] + 1;
    children_[parents_[c]].push_back(c);
    max_depth_ = std::max(max_depth_, depths_[c]);
  }

  for (NodeId c = 0; c < n; ++c) {
    if (names_[c].empty()) throw InputError("hierarchy: node " + std::to_string(c) + " has an empty name");
    if (names_[c].find_first_of("\t\n\r") != std::string::npos)
      throw InputError("hierarchy: node name contains a tab or newline: " + names_[c]);
    if (!by_name_.emplace(names_[c], c).second) throw InputError("hierarchy: duplicate node name " + names_[c]);
  }

  std::sort(id_classes_.begin(), id_classes_.end());
  if (std::adjacent_find(id_classes_.begin(), id_classes_.end()) != id_classes_.end())
    throw InputError("hierarchy: duplicate ID class");
  is_id_.assign(n, false);
  for (NodeId c : id_classes_) {
    if (c >= n) throw InputError("hierarchy: ID class id out of range");
    if (!children_[c].empty()) throw InputError("hierarchy: ID class " + names_[c] + " is not a leaf");
    is_id_[c] = true;
  }
  if (id_classes_.empty()) throw InputError("hierarchy: no ID classes");

  // Euler tour for O(1) ancestor queries.
  tin_.assign(n, 0);
  tout_.assign(n, 0);
  int timer = 0;
  std::vector<std::pair<NodeId, std::size_t>> stack{{kRootNode, 0}};
  tin_[kRootNode] = timer++;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < children_[node].size()) {
      const NodeId child = children_[node][next++];
      tin_[child] = timer++;
      stack.emplace_back(child, 0);
    } else {
      tout_[node] = timer++;
      stack.pop_back();
    }
  }

  depth_spaces_.resize(static_cast<std::size_t>(max_depth_));
  depth_index_.assign(static_cast<std::size_t>(max_depth_), std::vector<std::int32_t>(n, -1));
  for (int d = 1; d <= max_depth_; ++d) {
    auto& space = depth_spaces_[static_cast<std::size_t>(d - 1)];
    space.depth = d;
    for (NodeId c = 0; c < n; ++c) {
      if (depths_[c] == d || (is_id_[c] && depths_[c] < d)) {
        depth_index_[static_cast<std::size_t>(d - 1)][c] = static_cast<std::int32_t>(space.members.size());
        space.members.push_back(c);
      }
    }
  }
}

Hierarchy Hierarchy::from_edges(const std::vector<std::pair<std::string, std::string>>& edges,
                                const std::vector<std::string>& id_names) {
  std::unordered_map<std::string, std::vector<std::string>> kids;
  std::unordered_map<std::string, std::string> parent_of;
  std::vector<std::string> order;  // first appearance
  auto note = [&](const std::string& s) {
    if (!kids.contains(s)) {
      kids.emplace(s, std::vector<std::string>{});
      order.push_back(s);
    }
  };
  for (const auto& [child, parent] : edges) {
    if (child == parent) throw InputError("hierarchy: node " + child + " is its own parent");
    if (!parent_of.emplace(child, parent).second) throw InputError("hierarchy: node " + child + " has two parents");
    note(parent);
    note(child);
    kids[parent].push_back(child);
  }
  std::vector<std::string> roots;
  for (const auto& s : order)
    if (!parent_of.contains(s)) roots.push_back(s);
  if (roots.size() != 1)
    throw InputError("hierarchy: expected exactly one root, found " + std::to_string(roots.size()));

  std::vector<std::string> names;
  std::vector<NodeId> parents;
  std::unordered_map<std::string, NodeId> ids;
  std::deque<std::string> queue{roots.front()};
  ids[roots.front()] = 0;
  names.push_back(roots.front());
  parents.push_back(kRootNode);
  while (!queue.empty()) {
    const std::string cur = queue.front();
    queue.pop_front();
    for (const auto& child : kids[cur]) {
      ids[child] = static_cast<NodeId>(names.size());
      names.push_back(child);
      parents.push_back(ids[cur]);
      queue.push_back(child);
    }
  }
  if (names.size() != order.size()) throw InputError("hierarchy: edges contain a cycle");

  std::vector<NodeId> id_classes;
  for (const auto& s : id_names) {
    auto it = ids.find(s);
    if (it == ids.end()) throw InputError("hierarchy: unknown ID class " + s);
    id_classes.push_back(it->second);
  }
  return Hierarchy(std::move(names), std::move(parents), std::move(id_classes));
}

Hierarchy Hierarchy::parse(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<std::string> id_names;
  bool in_id_section = false;
  std::istringstream in{std::string(text)};
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "hierarchy line " + std::to_string(line_no) + ": ";
    if (line == "#id") {
      if (in_id_section) throw InputError(where + "repeated #id section");
      in_id_section = true;
    } else if (in_id_section) {
      if (line.find('\t') != std::string::npos) throw InputError(where + "edge after #id section");
      id_names.push_back(line);
    } else {
      const auto tab = line.find('\t');
      if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
        throw InputError(where + "expected child<TAB>parent");
      edges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
  }
  if (!in_id_section) throw InputError("hierarchy: missing #id section");
  return from_edges(edges, id_names);
}

Hierarchy Hierarchy::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open hierarchy file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string Hierarchy::serialize() const {
  std::string out;
  for (NodeId c = 1; c < size(); ++c) out += names_[c] + '\t' + names_[parents_[c]] + '\n';
  out += "#id\n";
  for (NodeId c : id_classes_) out += names_[c] + '\n';
  return out;
}

void Hierarchy::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write hierarchy file " + path.string());
  out << serialize();
  if (!out) throw InputError("failed writing hierarchy file " + path.string());
}

std::uint64_t Hierarchy::content_hash() const { return fnv1a64(serialize()); }

void Hierarchy::check_node(NodeId c) const {
  if (c >= size()) throw InputError("invalid node id " + std::to_string(c));
}

void Hierarchy::check_depth(int d) const {
  if (d < 1 || d > max_depth_)
    throw InputError("depth " + std::to_string(d) + " outside [1, " + std::to_string(max_depth_) + "]");
}

NodeId Hierarchy::parent(NodeId c) const {
  check_node(c);
  return parents_[c];
}

std::span<const NodeId> Hierarchy::children(NodeId c) const {
  check_node(c);
  return children_[c];
}

int Hierarchy::depth(NodeId c) const {
  check_node(c);
  return depths_[c];
}

const std::string& Hierarchy::name(NodeId c) const {
  check_node(c);
  return names_[c];
}

std::optional<NodeId> Hierarchy::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

bool Hierarchy::is_id_class(NodeId c) const {
  check_node(c);
  return is_id_[c];
}

bool Hierarchy::is_ancestor_or_self(NodeId a, NodeId c) const {
  check_node(a);
  check_node(c);
  return tin_[a] <= tin_[c] && tout_[c] <= tout_[a];
}

std::vector<NodeId> Hierarchy::subtree(NodeId c) const {
  check_node(c);
  std::vector<NodeId> out;
  for (NodeId x = c; x < size(); ++x)
    if (is_ancestor_or_self(c, x)) out.push_back(x);
  return out;
}

std::vector<NodeId> Hierarchy::path_from_root(NodeId c) const {
  check_node(c);
  std::vector<NodeId> path(static_cast<std::size_t>(depths_[c]) + 1);
  for (NodeId x = c;; x = parents_[x]) {
    path[static_cast<std::size_t>(depths_[x])] = x;
    if (x == kRootNode) break;
  }
  return path;
}

NodeId Hierarchy::lca(NodeId a, NodeId b) const {
  check_node(a);
  check_node(b);
  while (depths_[a] > depths_[b]) a = parents_[a];
  while (depths_[b] > depths_[a]) b = parents_[b];
  while (a != b) {
    a = parents_[a];
    b = parents_[b];
  }
  return a;
}

int Hierarchy::tree_distance(NodeId a, NodeId b) const {
  const NodeId l = lca(a, b);
  return (depths_[a] - depths_[l]) + (depths_[b] - depths_[l]);
}

const DepthSpace& Hierarchy::depth_space(int d) const {
  check_depth(d);
  return depth_spaces_[static_cast<std::size_t>(d - 1)];
}

std::optional<std::size_t> Hierarchy::index_in_depth(NodeId c, int d) const {
  check_node(c);
  check_depth(d);
  const auto idx = depth_index_[static_cast<std::size_t>(d - 1)][c];
  if (idx < 0) return std::nullopt;
  return static_cast<std::size_t>(idx);
}

std::vector<NodeId> Hierarchy::s_mapping(NodeId c, int d) const {
  check_node(c);
  std::vector<NodeId> out;
  for (NodeId m : depth_space(d).members)
    if (is_ancestor_or_self(m, c) || is_ancestor_or_self(c, m)) out.push_back(m);
  return out;
}

std::optional<TargetDistribution> Hierarchy::target_distribution(NodeId c, int d) const {
  const auto support = s_mapping(c, d);
  if (support.empty()) return std::nullopt;
  TargetDistribution t;
  t.depth = d;
  t.probs.assign(depth_space(d).members.size(), 0.0);
  const double mass = 1.0 / static_cast<double>(support.size());
  for (NodeId m : support) {
    const std::size_t idx = *index_in_depth(m, d);
    t.probs[idx] = mass;
    t.support.push_back(idx);
  }
  return t;
}

}  // namespace semihoc
