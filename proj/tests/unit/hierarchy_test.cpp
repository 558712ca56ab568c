#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "fixtures.hpp"
#include "semihoc/error.hpp"
#include "semihoc/hierarchy.hpp"
#include "semihoc/oracles.hpp"
#include "semihoc/rng.hpp"

namespace semihoc {
namespace {

using namespace semihoc::testing;
using Nodes = std::vector<NodeId>;

TEST(HierarchyTest, SubtreeOfAnimalTree) {
  const Hierarchy h = animal_tree();
  EXPECT_EQ(h.subtree(kMammal), (Nodes{kMammal, kCat, kDog}));
  EXPECT_EQ(h.subtree(kJunco), (Nodes{kJunco}));
  EXPECT_EQ(h.subtree(kRoot).size(), 7u);
}

TEST(HierarchyTest, LowestCommonAncestor) {
  const Hierarchy h = animal_tree();
  EXPECT_EQ(h.lca(kCat, kDog), kMammal);
  EXPECT_EQ(h.lca(kCat, kCat), kCat);
  EXPECT_EQ(h.lca(kCat, kJunco), kRoot);
}

TEST(HierarchyTest, TreeDistance) {
  const Hierarchy h = animal_tree();
  EXPECT_EQ(h.tree_distance(kCat, kJunco), 4);
  EXPECT_EQ(h.tree_distance(kCat, kMammal), 1);
  EXPECT_EQ(h.tree_distance(kEagle, kEagle), 0);
}

TEST(HierarchyTest, DistanceMatchesBfsOnRandomTrees) {
  Rng rng = make_stream(11, Stream::kOracle, 99);
  for (int t = 0; t < 40; ++t) {
    const Hierarchy h = oracles::random_hierarchy(rng, 50);
    for (NodeId a = 0; a < h.size(); ++a) {
      const auto dist = oracles::bfs_distances(h, a);
      for (NodeId b = 0; b < h.size(); ++b) {
        ASSERT_EQ(h.tree_distance(a, b), dist[b]);
        ASSERT_EQ(h.lca(a, b), oracles::brute_lca(h, a, b));
      }
    }
  }
}

TEST(HierarchyTest, DepthSpaces) {
  const Hierarchy h = animal_tree();
  EXPECT_EQ(h.max_depth(), 2);
  EXPECT_EQ(h.depth_space(1).members, (Nodes{kMammal, kBird}));
  EXPECT_EQ(h.depth_space(2).members, (Nodes{kCat, kDog, kEagle, kJunco}));
  EXPECT_EQ(h.index_in_depth(kEagle, 2), 2u);
  EXPECT_FALSE(h.index_in_depth(kMammal, 2).has_value());
}

TEST(HierarchyTest, ShallowIdLeafCarriesDown) {
  // L is an ID leaf at depth 1; A -> B -> C reaches depth 3.
  const Hierarchy h({"R", "L", "A", "B", "C"}, {0, 0, 0, 2, 3}, {1, 4});
  ASSERT_EQ(h.max_depth(), 3);
  EXPECT_EQ(h.depth_space(2).members, (Nodes{1, 3}));
  EXPECT_EQ(h.depth_space(3).members, (Nodes{1, 4}));
}

TEST(HierarchyTest, SMapping) {
  const Hierarchy h = animal_tree();
  EXPECT_EQ(h.s_mapping(kJunco, 1), (Nodes{kBird}));
  EXPECT_EQ(h.s_mapping(kMammal, 2), (Nodes{kCat, kDog}));
  EXPECT_EQ(h.s_mapping(kMammal, 1), (Nodes{kMammal}));
  EXPECT_EQ(h.s_mapping(kRoot, 1), (Nodes{kMammal, kBird}));
}

TEST(HierarchyTest, TargetDistributions) {
  const Hierarchy h = animal_tree();
  const auto junco = h.target_distribution(kJunco, 1);
  ASSERT_TRUE(junco);
  EXPECT_EQ(junco->probs, (std::vector<double>{0.0, 1.0}));

  const auto mammal2 = h.target_distribution(kMammal, 2);
  ASSERT_TRUE(mammal2);
  EXPECT_EQ(mammal2->probs, (std::vector<double>{0.5, 0.5, 0.0, 0.0}));
  EXPECT_EQ(mammal2->support, (std::vector<std::size_t>{0, 1}));

  const auto mammal1 = h.target_distribution(kMammal, 1);
  ASSERT_TRUE(mammal1);
  EXPECT_EQ(mammal1->probs, (std::vector<double>{1.0, 0.0}));
}

TEST(HierarchyTest, EmptySMappingHasNoTarget) {
  // Q is a non-ID leaf at depth 1, so nothing at depth 2 relates to it.
  const Hierarchy h({"R", "A", "Q", "B"}, {0, 0, 0, 1}, {3});
  EXPECT_TRUE(h.s_mapping(2, 2).empty());
  EXPECT_FALSE(h.target_distribution(2, 2).has_value());
}

TEST(HierarchyTest, RejectsInvalidTrees) {
  EXPECT_THROW(Hierarchy({"R", "A"}, {0, 0}, {0}), InputError);         // root as ID class
  EXPECT_THROW(Hierarchy({"R", "A", "B"}, {0, 0, 1}, {1}), InputError);  // internal ID class
  EXPECT_THROW(Hierarchy({"R", "A", "B"}, {0, 2, 0}, {1, 2}), InputError);
  EXPECT_THROW(Hierarchy::from_edges({{"A", "B"}, {"B", "A"}, {"C", "R"}}, {"C"}), InputError);  // cycle
  EXPECT_THROW(Hierarchy::parse("A\tR\n"), InputError);  // no #id section
}

TEST(HierarchyTest, SerializeRoundTrip) {
  const Hierarchy h = animal_tree();
  const Hierarchy back = Hierarchy::parse(h.serialize());
  EXPECT_EQ(back.serialize(), h.serialize());
  EXPECT_EQ(back.content_hash(), h.content_hash());
  for (NodeId c = 0; c < h.size(); ++c) {
    EXPECT_EQ(back.name(c), h.name(c));
    EXPECT_EQ(back.parent(c), h.parent(c));
    EXPECT_EQ(back.is_id_class(c), h.is_id_class(c));
  }
}

TEST(HierarchyTest, FromEdgesAssignsBreadthFirstIds) {
  const Hierarchy h = Hierarchy::from_edges(
      {{"Junco", "Bird"}, {"Cat", "Mammal"}, {"Bird", "Root"}, {"Mammal", "Root"}, {"Dog", "Mammal"}, {"Eagle", "Bird"}},
      {"Cat", "Dog", "Eagle", "Junco"});
  EXPECT_EQ(h.size(), 7u);
  for (NodeId c = 1; c < h.size(); ++c) EXPECT_LT(h.parent(c), c);
  EXPECT_EQ(h.depth(*h.find("Junco")), 2);
  EXPECT_EQ(h.lca(*h.find("Cat"), *h.find("Junco")), kRootNode);
}

}  // namespace
}  // namespace semihoc
