#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace semihoc {

using NodeId = std::uint32_t;

inline constexpr NodeId kRootNode = 0;
/// Ground truth not available (e.g. unlabeled data from a real source).
inline constexpr NodeId kUnknownNode = std::numeric_limits<NodeId>::max();

/// Classification space at one depth: nodes at that depth plus shallower ID
/// leaves, in ascending node id. The position of a node in `members` is the
/// output index of the depth-specific classifier.
struct DepthSpace {
  int depth = 0;
  std::vector<NodeId> members;
};

/// Uniform target over S_d(c) expressed over the members of depth space d.
struct TargetDistribution {
  int depth = 0;
  std::vector<double> probs;    // one entry per DepthSpace member
  std::vector<std::size_t> support;  // indices into probs with non-zero mass
};

/// Rooted class tree. Node ids are dense, the root is 0 and every parent has
/// a smaller id than its children. Immutable after construction.
class Hierarchy {
 public:
  /// `parents[0]` is ignored (root). Throws InputError when the tree
  /// invariants do not hold.
  Hierarchy(std::vector<std::string> names, std::vector<NodeId> parents,
            std::vector<NodeId> id_classes);

  /// Builds from `child -> parent` name pairs. Ids are assigned breadth-first,
  /// siblings in order of first appearance.
  static Hierarchy from_edges(const std::vector<std::pair<std::string, std::string>>& edges,
                              const std::vector<std::string>& id_names);

  /// Parses the tab-separated edge-list format (see README).
  static Hierarchy parse(std::string_view text);
  static Hierarchy load(const std::filesystem::path& path);

  /// Canonical text form; `parse(serialize())` reproduces ids exactly.
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;
  /// FNV-1a of the canonical text form.
  std::uint64_t content_hash() const;

  std::size_t size() const { return parents_.size(); }
  int max_depth() const { return max_depth_; }

  NodeId parent(NodeId c) const;  // root returns kRootNode
  std::span<const NodeId> children(NodeId c) const;
  int depth(NodeId c) const;
  const std::string& name(NodeId c) const;
  std::optional<NodeId> find(std::string_view name) const;
  bool is_leaf(NodeId c) const { return children(c).empty(); }
  bool is_id_class(NodeId c) const;
  std::span<const NodeId> id_classes() const { return id_classes_; }
  void check_node(NodeId c) const;

  /// True when `a` is `c` or an ancestor of `c`. O(1).
  bool is_ancestor_or_self(NodeId a, NodeId c) const;

  /// {c} and all of its descendants, ascending id.
  std::vector<NodeId> subtree(NodeId c) const;
  /// Root-to-c path, inclusive at both ends.
  std::vector<NodeId> path_from_root(NodeId c) const;

  NodeId lca(NodeId a, NodeId b) const;
  int tree_distance(NodeId a, NodeId b) const;

  /// 1 <= d <= max_depth().
  const DepthSpace& depth_space(int d) const;
  /// Output index of c in depth space d, if c is a member.
  std::optional<std::size_t> index_in_depth(NodeId c, int d) const;

  /// (Anc*(c) ∪ Desc(c)) ∩ C_d, ascending id. May be empty.
  std::vector<NodeId> s_mapping(NodeId c, int d) const;
  /// Uniform over s_mapping(c, d); nullopt when that set is empty.
  std::optional<TargetDistribution> target_distribution(NodeId c, int d) const;

 private:
  void check_depth(int d) const;

  std::vector<std::string> names_;
  std::vector<NodeId> parents_;
  std::vector<int> depths_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<NodeId> id_classes_;
  std::vector<bool> is_id_;
  std::vector<int> tin_, tout_;
  int max_depth_ = 0;
  std::vector<DepthSpace> depth_spaces_;                 // index d - 1
  std::vector<std::vector<std::int32_t>> depth_index_;   // [d - 1][node] -> index or -1
  std::unordered_map<std::string, NodeId> by_name_;
};

}  // namespace semihoc
