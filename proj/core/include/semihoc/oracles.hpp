#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semihoc/hierarchy.hpp"
#include "semihoc/rng.hpp"
#include "semihoc/spl.hpp"

namespace semihoc::oracles {

/// Perturbs the value under test so the matching oracle must report a failure.
enum class Fault { kNone, kLca, kDistance, kCutoff, kGradient, kFusion, kTargets };

Fault parse_fault(std::string_view name);
std::string_view to_string(Fault f);

struct OracleResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t checks = 0;
  std::size_t failures = 0;
  std::size_t skipped = 0;  // non-differentiable coordinates in the gradient check
  double max_error = 0.0;
  double seconds = 0.0;
  std::string first_failure;

  bool passed() const { return cases > 0 && failures == 0; }
};

/// Random recursive tree with 2..max_nodes nodes, built through from_edges
/// with shuffled edges. Each leaf is an ID class with probability 0.7 (at
/// least one).
Hierarchy random_hierarchy(Rng& rng, std::size_t max_nodes);

/// Ancestor-set intersection.
NodeId brute_lca(const Hierarchy& h, NodeId a, NodeId b);
/// Breadth-first search over the undirected tree, one source.
std::vector<int> bfs_distances(const Hierarchy& h, NodeId source);
/// Explicit per-bin counting followed by a running-peak scan.
Epoch brute_cutoff(std::span<const Epoch> epochs, Epoch current_epoch, int bin_width, double drop_threshold);
/// (ancestors-or-self ∪ descendants) ∩ depth space, as a set intersection.
std::vector<NodeId> brute_s_mapping(const Hierarchy& h, NodeId c, int d);

OracleResult check_tree_algebra(std::size_t trees, std::uint64_t seed, Fault fault = Fault::kNone,
                                std::size_t max_nodes = 200);
OracleResult check_fusion(std::size_t cases, std::uint64_t seed, Fault fault = Fault::kNone);
OracleResult check_cutoff(std::size_t cases, std::uint64_t seed, Fault fault = Fault::kNone);
/// Eval mode and frozen train-mode masks, central differences on every parameter.
OracleResult check_gradients(std::size_t heads, std::uint64_t seed, Fault fault = Fault::kNone,
                             double tolerance = 1e-6);
OracleResult check_targets(std::size_t trees, std::uint64_t seed, Fault fault = Fault::kNone);

/// All oracles; `cases` overrides every per-oracle default count.
std::vector<OracleResult> run_all(std::optional<std::size_t> cases, std::uint64_t seed, Fault fault = Fault::kNone);

}  // namespace semihoc::oracles
