#include "semihoc/spl.hpp"

#include <algorithm>

#include "semihoc/error.hpp"

namespace semihoc {

SplChain compute_spls(const HierarchicalDistribution& dist, const Hierarchy& hierarchy, double tau) {
  const auto conf = subtree_confidences(dist, hierarchy);
  SplChain chain{{}, tau};
  for (NodeId c = 1; c < hierarchy.size(); ++c)
    if (conf[c] > tau) chain.nodes.push_back(c);
  std::stable_sort(chain.nodes.begin(), chain.nodes.end(),
                   [&](NodeId a, NodeId b) { return hierarchy.depth(a) < hierarchy.depth(b); });
  return chain;
}

std::vector<NodeId> SplLog::update(std::uint64_t sample, const SplChain& chain, Epoch epoch) {
  std::vector<NodeId> inserted;
  auto it = by_sample_.find(sample);
  if (chain.nodes.empty()) {
    if (it != by_sample_.end()) by_sample_.erase(it);
    return inserted;
  }
  auto& entries = by_sample_[sample];
  std::erase_if(entries, [&](const auto& kv) {
    return std::find(chain.nodes.begin(), chain.nodes.end(), kv.first) == chain.nodes.end();
  });
  for (NodeId c : chain.nodes) {
    if (entries.emplace(c, epoch).second) inserted.push_back(c);
  }
  return inserted;
}

std::optional<Epoch> SplLog::get(NodeId node, std::uint64_t sample) const {
  auto it = by_sample_.find(sample);
  if (it == by_sample_.end()) return std::nullopt;
  auto jt = it->second.find(node);
  if (jt == it->second.end()) return std::nullopt;
  return jt->second;
}

void SplLog::set(NodeId node, std::uint64_t sample, Epoch epoch) { by_sample_[sample][node] = epoch; }

std::size_t SplLog::size() const {
  std::size_t n = 0;
  for (const auto& [g, entries] : by_sample_) n += entries.size();
  return n;
}

std::vector<Epoch> SplLog::epochs_for(NodeId node) const {
  std::vector<Epoch> out;
  for (const auto& [g, entries] : by_sample_)
    if (auto it = entries.find(node); it != entries.end()) out.push_back(it->second);
  return out;
}

std::vector<std::vector<Epoch>> SplLog::epochs_by_node(std::size_t node_count) const {
  std::vector<std::vector<Epoch>> out(node_count);
  for (const auto& [g, entries] : by_sample_)
    for (const auto& [c, e] : entries)
      if (c < node_count) out[c].push_back(e);
  return out;
}

Epoch detect_cutoff(std::span<const Epoch> epochs, Epoch current_epoch, int bin_width, double drop_threshold) {
  if (bin_width < 1) throw InputError("bin width must be >= 1");
  if (epochs.empty()) return kNoCutoff;
  if (current_epoch < 0) throw InputError("current epoch must be >= 0");
  const auto bins = static_cast<std::size_t>(current_epoch / bin_width) + 1;
  std::vector<std::int64_t> counts(bins, 0);
  for (Epoch e : epochs) {
    if (e < 0 || e > current_epoch) throw InputError("assignment epoch outside [0, current epoch]");
    ++counts[static_cast<std::size_t>(e / bin_width)];
  }
  std::int64_t max_count = 0;
  for (std::size_t i = 0; i < bins; ++i) {
    if (counts[i] > max_count) {
      max_count = counts[i];
    } else if (static_cast<double>(counts[i]) < drop_threshold * static_cast<double>(max_count)) {
      return static_cast<Epoch>(i) * bin_width;
    }
  }
  return kNoCutoff;
}

AgeGateState::AgeGateState(std::size_t node_count, int bin_width, double drop_threshold)
    : cutoffs(node_count, kNoCutoff), bin_width(bin_width), drop_threshold(drop_threshold) {}

void update_cutoffs(AgeGateState& state, const SplLog& log, Epoch current_epoch) {
  const auto per_node = log.epochs_by_node(state.cutoffs.size());
  for (std::size_t c = 0; c < per_node.size(); ++c) {
    if (per_node[c].empty()) continue;
    const Epoch found = detect_cutoff(per_node[c], current_epoch, state.bin_width, state.drop_threshold);
    state.cutoffs[c] = std::min(state.cutoffs[c], found);
  }
}

SplChain apply_gating(const SplChain& chain, const SplLog& log, const AgeGateState& state, std::uint64_t sample) {
  SplChain out{{}, chain.tau};
  for (NodeId c : chain.nodes) {
    const auto assigned = log.get(c, sample);
    const Epoch cutoff = c < state.cutoffs.size() ? state.cutoffs[c] : kNoCutoff;
    if (assigned && *assigned > cutoff) continue;
    out.nodes.push_back(c);
  }
  return out;
}

}  // namespace semihoc
