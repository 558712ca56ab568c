#include "semihoc/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <unordered_set>

#include "semihoc/binary_io.hpp"
#include "semihoc/error.hpp"
#include "semihoc/rng.hpp"

namespace semihoc {

namespace {

constexpr char kMagic[4] = {'S', 'H', 'O', 'C'};
constexpr std::uint32_t kFormatVersion = 1;

}  // namespace

void FeatureDataset::add(std::uint64_t id, NodeId truth, Split split, std::span<const float> features) {
  if (features.size() != dim_)
    throw InputError("feature vector has " + std::to_string(features.size()) + " entries, expected " +
                     std::to_string(dim_));
  ids_.push_back(id);
  truths_.push_back(truth);
  splits_.push_back(split);
  features_.insert(features_.end(), features.begin(), features.end());
}

std::vector<std::size_t> FeatureDataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (splits_[i] == s) out.push_back(i);
  return out;
}

bool FeatureDataset::has_unlabeled_truth() const {
  for (std::size_t i = 0; i < size(); ++i)
    if (splits_[i] == Split::kUnlabeled && truths_[i] == kUnknownNode) return false;
  return true;
}

void FeatureDataset::validate(const Hierarchy& hierarchy) const {
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t i = 0; i < size(); ++i) {
    const std::string where = "sample " + std::to_string(i) + " (id " + std::to_string(ids_[i]) + "): ";
    if (!seen.insert(ids_[i]).second) throw InputError(where + "duplicate sample id");
    if (static_cast<std::uint8_t>(splits_[i]) > 2) throw InputError(where + "invalid split tag");
    if (truths_[i] == kUnknownNode) {
      if (splits_[i] == Split::kLabeled) throw InputError(where + "labeled sample without ground truth");
      continue;
    }
    if (truths_[i] >= hierarchy.size())
      throw InputError(where + "node " + std::to_string(truths_[i]) + " is not in the hierarchy");
    if (splits_[i] == Split::kLabeled && !hierarchy.is_id_class(truths_[i]))
      throw InputError(where + "labeled sample with non-ID ground truth " + hierarchy.name(truths_[i]));
  }
}

void SyntheticConfig::validate() const {
  if (branching < 2) throw InputError("branching must be >= 2");
  if (depth < 2) throw InputError("depth must be >= 2");
  if (dim < 1) throw InputError("feature dimension must be >= 1");
  if (train_per_leaf < 1 || test_per_leaf < 0) throw InputError("samples per leaf must be positive");
  if (!(level_scale > 0) || !(noise_scale > 0)) throw InputError("scales must be > 0");
  if (!(ood_fraction > 0 && ood_fraction < 1)) throw InputError("OOD fraction must lie in (0, 1)");
  if (root_ood_count < 0) throw InputError("root OOD count must be >= 0");
  const double leaves = std::pow(static_cast<double>(branching), depth);
  if (leaves > 1e6) throw InputError("tree too large");
}

GeneratedData generate(const SyntheticConfig& config) {
  config.validate();
  Rng rng = make_stream(config.seed, Stream::kDatagen);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto dim = static_cast<std::size_t>(config.dim);
  std::vector<std::string> warnings;

  // Full balanced tree, breadth-first ids.
  std::vector<NodeId> parents{kRootNode};
  std::vector<int> depths{0};
  std::vector<std::string> names{"root"};
  std::vector<NodeId> frontier{kRootNode};
  for (int d = 1; d <= config.depth; ++d) {
    std::vector<NodeId> next;
    int k = 0;
    for (NodeId p : frontier) {
      for (int b = 0; b < config.branching; ++b) {
        const auto id = static_cast<NodeId>(parents.size());
        parents.push_back(p);
        depths.push_back(d);
        names.push_back("n" + std::to_string(d) + "_" + std::to_string(k++));
        next.push_back(id);
      }
    }
    frontier = std::move(next);
  }
  const std::vector<NodeId> leaves = frontier;
  const std::size_t n_full = parents.size();

  // Hierarchical random walk of class means.
  std::vector<std::vector<double>> means(n_full, std::vector<double>(dim, 0.0));
  for (NodeId c = 1; c < n_full; ++c)
    for (std::size_t j = 0; j < dim; ++j) means[c][j] = means[parents[c]][j] + config.level_scale * normal(rng);

  // Random ID/OOD split over the leaves.
  auto n_ood = static_cast<std::size_t>(std::llround(config.ood_fraction * static_cast<double>(leaves.size())));
  if (n_ood == 0) warnings.push_back("OOD fraction too small: no leaf held out");
  if (n_ood >= leaves.size()) {
    n_ood = leaves.size() - 1;
    warnings.push_back("OOD fraction too large: keeping a single ID leaf");
  }
  std::vector<NodeId> shuffled = leaves;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::vector<bool> alive(n_full, true);
  for (std::size_t i = 0; i < n_ood; ++i) alive[shuffled[i]] = false;
  // Internal nodes that lost every child disappear too.
  std::vector<int> alive_children(n_full, 0);
  for (NodeId c = static_cast<NodeId>(n_full - 1); c >= 1; --c) {
    const bool was_internal = depths[c] < config.depth;
    if (was_internal && alive_children[c] == 0) alive[c] = false;
    if (alive[c]) ++alive_children[parents[c]];
  }
  std::size_t single_child = 0;
  for (NodeId c = 0; c < n_full; ++c)
    if (alive[c] && depths[c] < config.depth && alive_children[c] == 1) ++single_child;
  if (single_child > 0)
    warnings.push_back(std::to_string(single_child) + " internal node(s) left with a single child after pruning");

  std::vector<NodeId> new_id(n_full, kUnknownNode);
  std::vector<std::string> kept_names;
  std::vector<NodeId> kept_parents;
  std::vector<NodeId> id_classes;
  for (NodeId c = 0; c < n_full; ++c) {
    if (!alive[c]) continue;
    new_id[c] = static_cast<NodeId>(kept_names.size());
    kept_names.push_back(names[c]);
    kept_parents.push_back(c == kRootNode ? kRootNode : new_id[parents[c]]);
    if (depths[c] == config.depth) id_classes.push_back(new_id[c]);
  }
  Hierarchy hierarchy(std::move(kept_names), std::move(kept_parents), std::move(id_classes));

  auto surviving = [&](NodeId c) {
    while (!alive[c]) c = parents[c];
    return new_id[c];
  };

  FeatureDataset dataset(static_cast<std::uint32_t>(dim));
  std::vector<float> x(dim);
  std::uint64_t next_id = 0;
  auto emit = [&](const std::vector<double>& mean, NodeId truth, Split split) {
    for (std::size_t j = 0; j < dim; ++j) x[j] = static_cast<float>(mean[j] + config.noise_scale * normal(rng));
    dataset.add(next_id++, truth, split, x);
  };
  for (NodeId leaf : leaves) {
    const NodeId truth = surviving(leaf);
    for (int i = 0; i < config.train_per_leaf; ++i) emit(means[leaf], truth, Split::kUnlabeled);
    for (int i = 0; i < config.test_per_leaf; ++i) emit(means[leaf], truth, Split::kTest);
  }
  if (config.root_ood_count > 0) {
    std::vector<double> dir(dim);
    double norm = 0.0;
    for (auto& v : dir) {
      v = normal(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    std::vector<double> mean(dim);
    for (std::size_t j = 0; j < dim; ++j) mean[j] = dir[j] / norm * 10.0 * config.level_scale;
    for (int i = 0; i < config.root_ood_count; ++i) emit(mean, kRootNode, Split::kUnlabeled);
    for (int i = 0; i < config.root_ood_count; ++i) emit(mean, kRootNode, Split::kTest);
  }

  return GeneratedData{std::move(hierarchy), std::move(dataset), leaves.size(), std::move(warnings)};
}

FeatureDataset sample_labeled_subset(const FeatureDataset& dataset, const Hierarchy& hierarchy, int per_class,
                                     std::uint64_t seed) {
  if (per_class < 1) throw InputError("labels per class must be >= 1");
  FeatureDataset out = dataset;
  std::vector<std::vector<std::size_t>> by_class(hierarchy.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.split(i) == Split::kTest) continue;
    out.set_split(i, Split::kUnlabeled);
    const NodeId t = out.truth(i);
    if (t != kUnknownNode && t < hierarchy.size() && hierarchy.is_id_class(t)) by_class[t].push_back(i);
  }
  Rng rng = make_stream(seed, Stream::kLabeledSubset);
  for (NodeId c : hierarchy.id_classes()) {
    auto& members = by_class[c];
    std::shuffle(members.begin(), members.end(), rng);
    const std::size_t take = std::min(members.size(), static_cast<std::size_t>(per_class));
    for (std::size_t k = 0; k < take; ++k) out.set_split(members[k], Split::kLabeled);
  }
  return out;
}

void save_features(const FeatureDataset& dataset, std::uint64_t hierarchy_hash, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write feature file " + path.string());
  BinaryWriter w(out);
  w.bytes(std::string_view(kMagic, 4));
  w.u32(kFormatVersion);
  w.u64(dataset.size());
  w.u32(dataset.dim());
  w.u64(hierarchy_hash);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    w.u64(dataset.id(i));
    w.u32(dataset.truth(i));
    w.u8(static_cast<std::uint8_t>(dataset.split(i)));
    for (float v : dataset.features(i)) w.f32(v);
  }
  if (!out) throw InputError("failed writing feature file " + path.string());
}

LoadedFeatures load_features(const std::filesystem::path& path, const Hierarchy* hierarchy) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open feature file " + path.string());
  BinaryReader r(in);
  const std::string where = "feature file " + path.string() + ": ";
  if (r.bytes(4, "magic") != std::string_view(kMagic, 4)) throw DataError(where + "bad magic");
  if (const auto v = r.u32("version"); v != kFormatVersion)
    throw DataError(where + "unsupported format version " + std::to_string(v));
  const std::uint64_t count = r.u64("sample count");
  const std::uint32_t dim = r.u32("feature dim");
  if (dim == 0) throw DataError(where + "feature dimension is zero");
  LoadedFeatures loaded{FeatureDataset(dim), r.u64("hierarchy hash")};
  if (hierarchy != nullptr && loaded.hierarchy_hash != hierarchy->content_hash())
    throw DataError(where + "hierarchy hash mismatch (file was written for a different hierarchy)");

  std::unordered_set<std::uint64_t> seen;
  std::vector<float> x(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string rec = where + "record " + std::to_string(i) + ": ";
    try {
      const std::uint64_t id = r.u64("sample id");
      const NodeId truth = r.u32("node id");
      const std::uint8_t tag = r.u8("split tag");
      for (auto& v : x) v = r.f32("features");
      if (tag > 2) throw DataError("invalid split tag " + std::to_string(tag));
      if (!seen.insert(id).second) throw DataError("duplicate sample id " + std::to_string(id));
      if (hierarchy != nullptr && truth != kUnknownNode) {
        if (truth >= hierarchy->size()) throw DataError("node " + std::to_string(truth) + " is not in the hierarchy");
        if (tag == 0 && !hierarchy->is_id_class(truth))
          throw DataError("labeled sample with non-ID node " + hierarchy->name(truth));
      }
      if (truth == kUnknownNode && tag == 0) throw DataError("labeled sample without ground truth");
      loaded.dataset.add(id, truth, static_cast<Split>(tag), x);
    } catch (const DataError& e) {
      throw DataError(rec + e.what());
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(where + "trailing bytes after last record");
  return loaded;
}

}  // namespace semihoc
