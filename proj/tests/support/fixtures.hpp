#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "semihoc/datagen.hpp"
#include "semihoc/hierarchy.hpp"

namespace semihoc::testing {

// Root -> {Mammal, Bird}, Mammal -> {Cat, Dog}, Bird -> {Eagle, Junco}.
enum Animal : NodeId { kRoot = 0, kMammal, kBird, kCat, kDog, kEagle, kJunco };

inline Hierarchy animal_tree() {
  return Hierarchy({"Root", "Mammal", "Bird", "Cat", "Dog", "Eagle", "Junco"}, {0, 0, 0, 1, 1, 2, 2},
                   {kCat, kDog, kEagle, kJunco});
}

/// Distribution over the seven animal nodes.
inline std::vector<double> animal_probs(std::initializer_list<std::pair<NodeId, double>> mass) {
  std::vector<double> p(7, 0.0);
  for (auto [n, m] : mass) p[n] = m;
  return p;
}

/// Four labeled samples (one per ID leaf), unlabeled samples with truth
/// Mammal, Cat and Bird, and a small test split. Features are 2-d.
inline FeatureDataset animal_dataset() {
  FeatureDataset ds(2);
  auto add = [&](std::uint64_t id, NodeId truth, Split split, float x, float y) {
    const std::vector<float> f{x, y};
    ds.add(id, truth, split, f);
  };
  add(0, kCat, Split::kLabeled, 1.0f, 0.0f);
  add(1, kDog, Split::kLabeled, 0.0f, 1.0f);
  add(2, kEagle, Split::kLabeled, -1.0f, 0.0f);
  add(3, kJunco, Split::kLabeled, 0.0f, -1.0f);
  add(4, kMammal, Split::kUnlabeled, 0.5f, 0.5f);
  add(5, kCat, Split::kUnlabeled, 0.9f, 0.1f);
  add(6, kBird, Split::kUnlabeled, -0.5f, -0.5f);
  add(7, kCat, Split::kTest, 1.1f, 0.0f);
  add(8, kBird, Split::kTest, -0.6f, -0.4f);
  return ds;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("semihoc_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Small synthetic dataset for trainer-level tests.
inline GeneratedData small_problem(std::uint64_t seed, int labeled_per_class = 4) {
  SyntheticConfig cfg;
  cfg.branching = 2;
  cfg.depth = 3;
  cfg.dim = 6;
  cfg.train_per_leaf = 12;
  cfg.test_per_leaf = 3;
  cfg.level_scale = 1.0;
  cfg.noise_scale = 0.5;
  cfg.ood_fraction = 0.25;
  cfg.root_ood_count = 4;
  cfg.seed = seed;
  GeneratedData g = generate(cfg);
  g.dataset = sample_labeled_subset(g.dataset, g.hierarchy, labeled_per_class, seed);
  return g;
}

}  // namespace semihoc::testing
