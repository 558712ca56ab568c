#include "semihoc/prohoc.hpp"

#include <algorithm>
#include <cmath>

#include "semihoc/error.hpp"

namespace semihoc {

HierarchicalDistribution fuse(std::span<const std::vector<double>> depth_outputs, const Hierarchy& hierarchy,
                              double epsilon) {
  const int depth_count = hierarchy.max_depth();
  if (depth_outputs.size() != static_cast<std::size_t>(depth_count))
    throw InputError("fuse: expected " + std::to_string(depth_count) + " depth outputs, got " +
                     std::to_string(depth_outputs.size()));
  for (int d = 1; d <= depth_count; ++d) {
    if (depth_outputs[static_cast<std::size_t>(d - 1)].size() != hierarchy.depth_space(d).members.size())
      throw InputError("fuse: depth " + std::to_string(d) + " output has the wrong width");
  }

  const std::size_t n = hierarchy.size();
  HierarchicalDistribution dist{std::vector<double>(n, 0.0)};
  std::vector<double> reach(n, 0.0);
  reach[kRootNode] = 1.0;
  std::vector<double> branch;
  // Parents precede children in id order.
  for (NodeId a = 0; a < n; ++a) {
    const auto kids = hierarchy.children(a);
    if (kids.empty()) {
      dist.probs[a] = reach[a];
      continue;
    }
    branch.assign(kids.size(), 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < kids.size(); ++k) {
      const int d = hierarchy.depth(kids[k]);
      branch[k] = depth_outputs[static_cast<std::size_t>(d - 1)][*hierarchy.index_in_depth(kids[k], d)];
      total += branch[k];
    }
    if (total > 0.0) {
      for (auto& b : branch) b /= total;
    } else {
      std::fill(branch.begin(), branch.end(), 1.0 / static_cast<double>(kids.size()));
    }

    double stop = epsilon;
    if (kids.size() > 1) {
      double entropy = 0.0;
      for (double b : branch)
        if (b > 0.0) entropy -= b * std::log(b);
      stop = std::clamp(entropy / std::log(static_cast<double>(kids.size())), epsilon, 1.0 - epsilon);
    }
    dist.probs[a] = reach[a] * stop;
    const double cont = reach[a] * (1.0 - stop);
    for (std::size_t k = 0; k < kids.size(); ++k) reach[kids[k]] = cont * branch[k];
  }
  return dist;
}

NodeId predict_node(const HierarchicalDistribution& dist) {
  if (dist.probs.empty()) throw InputError("predict_node: empty distribution");
  // max_element keeps the first maximum, i.e. the smallest id.
  return static_cast<NodeId>(std::max_element(dist.probs.begin(), dist.probs.end()) - dist.probs.begin());
}

std::vector<double> subtree_confidences(const HierarchicalDistribution& dist, const Hierarchy& hierarchy) {
  if (dist.probs.size() != hierarchy.size()) throw InputError("distribution does not match hierarchy");
  std::vector<double> conf = dist.probs;
  for (NodeId c = static_cast<NodeId>(hierarchy.size() - 1); c >= 1; --c) conf[hierarchy.parent(c)] += conf[c];
  return conf;
}

}  // namespace semihoc
