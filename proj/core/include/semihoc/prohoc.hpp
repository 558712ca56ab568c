#pragma once

#include <span>
#include <vector>

#include "semihoc/hierarchy.hpp"

namespace semihoc {

/// Probability over every hierarchy node, root included.
struct HierarchicalDistribution {
  std::vector<double> probs;  // indexed by NodeId
};

inline constexpr double kStopEpsilon = 1e-4;

/// Fuses one distribution per depth space (index d - 1, each over the members
/// of depth_space(d)) into a distribution over all nodes.
///
/// At every internal node a, the branch distribution over its children is the
/// children's own depth-network masses renormalized. The node-local stop
/// probability is the normalized entropy of that branch distribution, clamped
/// to [eps, 1 - eps]; a single child gives eps. Leaves always stop. Then
///   p(c) = stop(c) * prod over ancestors a of (1 - stop(a)) * branch_a(next).
HierarchicalDistribution fuse(std::span<const std::vector<double>> depth_outputs, const Hierarchy& hierarchy,
                              double epsilon = kStopEpsilon);

/// Argmax over all nodes; ties go to the smaller id.
NodeId predict_node(const HierarchicalDistribution& dist);

/// Sum of p over Subtree(c), for every node c.
std::vector<double> subtree_confidences(const HierarchicalDistribution& dist, const Hierarchy& hierarchy);

}  // namespace semihoc
