#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "semihoc/hierarchy.hpp"

namespace semihoc {

enum class Split : std::uint8_t { kLabeled = 0, kUnlabeled = 1, kTest = 2 };

/// Pre-extracted feature vectors with ground truth, split tags and stable ids.
/// Ground truth of non-labeled samples may be kUnknownNode.
class FeatureDataset {
 public:
  FeatureDataset() = default;
  explicit FeatureDataset(std::uint32_t dim) : dim_(dim) {}

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }

  /// Appends one sample; `features.size()` must equal dim().
  void add(std::uint64_t id, NodeId truth, Split split, std::span<const float> features);

  std::uint64_t id(std::size_t i) const { return ids_[i]; }
  NodeId truth(std::size_t i) const { return truths_[i]; }
  Split split(std::size_t i) const { return splits_[i]; }
  void set_split(std::size_t i, Split s) { splits_[i] = s; }
  std::span<const float> features(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }

  std::vector<std::size_t> indices(Split s) const;
  /// True when every unlabeled sample carries a ground-truth node.
  bool has_unlabeled_truth() const;

  /// Throws InputError naming the first violated invariant.
  void validate(const Hierarchy& hierarchy) const;

  bool operator==(const FeatureDataset&) const = default;

 private:
  std::uint32_t dim_ = 0;
  std::vector<std::uint64_t> ids_;
  std::vector<NodeId> truths_;
  std::vector<Split> splits_;
  std::vector<float> features_;
};

struct SyntheticConfig {
  int branching = 3;
  int depth = 4;
  int dim = 32;
  int train_per_leaf = 30;
  int test_per_leaf = 10;
  double level_scale = 1.0;  // per-level mean drift sigma
  double noise_scale = 1.0;  // within-class sigma
  double ood_fraction = 0.2;
  int root_ood_count = 0;    // appended to both unlabeled and test
  std::uint64_t seed = 0;

  void validate() const;
};

struct GeneratedData {
  Hierarchy hierarchy;       // pruned: handed to the model
  FeatureDataset dataset;    // train samples all tagged unlabeled
  std::size_t leaves_before_pruning = 0;
  std::vector<std::string> warnings;
};

/// Balanced tree, hierarchical random-walk class means, random ID/OOD split.
/// Deterministic given `config.seed`.
GeneratedData generate(const SyntheticConfig& config);

/// Tags up to `per_class` train samples of each ID class as labeled; every
/// other train sample becomes unlabeled. Test samples are untouched.
FeatureDataset sample_labeled_subset(const FeatureDataset& dataset, const Hierarchy& hierarchy,
                                     int per_class, std::uint64_t seed);

void save_features(const FeatureDataset& dataset, std::uint64_t hierarchy_hash,
                   const std::filesystem::path& path);

struct LoadedFeatures {
  FeatureDataset dataset;
  std::uint64_t hierarchy_hash = 0;
};

/// Reads a feature file; when `hierarchy` is given, checks the stored hash and
/// validates every record against it.
LoadedFeatures load_features(const std::filesystem::path& path, const Hierarchy* hierarchy = nullptr);

}  // namespace semihoc
