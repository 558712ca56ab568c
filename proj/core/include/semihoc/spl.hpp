#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "semihoc/hierarchy.hpp"
#include "semihoc/prohoc.hpp"

namespace semihoc {

using Epoch = std::int32_t;
/// Cutoff value meaning "no cutoff detected".
inline constexpr Epoch kNoCutoff = std::numeric_limits<Epoch>::max();

/// Subtree pseudo-labels of one sample, shallow to deep.
struct SplChain {
  std::vector<NodeId> nodes;
  double tau = 0.0;

  bool operator==(const SplChain&) const = default;
};

/// Every non-root node whose subtree confidence is strictly above tau.
SplChain compute_spls(const HierarchicalDistribution& dist, const Hierarchy& hierarchy, double tau);

/// (node, sample) -> epoch of the current run of consecutive assignments.
class SplLog {
 public:
  /// Inserts chain nodes that are absent (first-assignment epoch is kept) and
  /// drops this sample's entries for nodes not in the chain. Returns the nodes
  /// that were newly inserted.
  std::vector<NodeId> update(std::uint64_t sample, const SplChain& chain, Epoch epoch);

  std::optional<Epoch> get(NodeId node, std::uint64_t sample) const;
  void set(NodeId node, std::uint64_t sample, Epoch epoch);
  std::size_t size() const;
  /// Epochs of all current entries for `node`.
  std::vector<Epoch> epochs_for(NodeId node) const;
  /// Current entries grouped per node, for all nodes in one pass.
  std::vector<std::vector<Epoch>> epochs_by_node(std::size_t node_count) const;

  const std::map<std::uint64_t, std::map<NodeId, Epoch>>& entries() const { return by_sample_; }

  bool operator==(const SplLog&) const = default;

 private:
  std::map<std::uint64_t, std::map<NodeId, Epoch>> by_sample_;
};

/// Scans width-w bins anchored at epoch 0 up to `current_epoch` and returns
/// the left edge of the first bin whose count falls strictly below
/// gamma * (running peak), or kNoCutoff.
Epoch detect_cutoff(std::span<const Epoch> epochs, Epoch current_epoch, int bin_width, double drop_threshold);

struct AgeGateState {
  std::vector<Epoch> cutoffs;  // per node
  int bin_width = 1;
  double drop_threshold = 0.01;

  AgeGateState() = default;
  AgeGateState(std::size_t node_count, int bin_width, double drop_threshold);

  bool operator==(const AgeGateState&) const = default;
};

/// End-of-epoch refresh; cutoffs only ever tighten.
void update_cutoffs(AgeGateState& state, const SplLog& log, Epoch current_epoch);

/// Drops every chain node whose log epoch for this sample exceeds its cutoff.
SplChain apply_gating(const SplChain& chain, const SplLog& log, const AgeGateState& state, std::uint64_t sample);

}  // namespace semihoc
