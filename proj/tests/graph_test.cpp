#include <gtest/gtest.h>

#include <random>

#include "mrforest/error.hpp"
#include "mrforest/features.hpp"
#include "mrforest/graph.hpp"
#include "support.hpp"

namespace mrf {
namespace {

TEST(Graph, GridLayoutAndEdgeOrder) {
  const MarkovNetwork net = build_network(2, 4, {3, 12});
  ASSERT_TRUE(net.grid());
  EXPECT_EQ(net.num_nodes(), 8);
  EXPECT_EQ(net.num_edges(), 2 * 3 + 4);
  EXPECT_EQ(net.node_at(1, 2), 6);
  EXPECT_EQ(net.level_of(6), 1);
  EXPECT_EQ(net.slice_of(6), 2);
  EXPECT_EQ(net.state_size(net.node_at(0, 3)), 3);
  EXPECT_EQ(net.state_size(net.node_at(1, 0)), 12);
  // chain edges of level 0, of level 1, then the cross edges
  EXPECT_EQ(net.edge(0), (Edge{0, 1}));
  EXPECT_EQ(net.edge(3), (Edge{4, 5}));
  EXPECT_EQ(net.edge(6), (Edge{0, 4}));
  EXPECT_EQ(net.find_edge(5, 1), std::optional<EdgeId>(7));
  EXPECT_FALSE(net.find_edge(0, 5));
  EXPECT_EQ(net.cliques().size(), 18u);
}

TEST(Graph, EdgesAreNormalized) {
  const MarkovNetwork net({2, 2, 2}, {{2, 0}, {1, 2}});
  EXPECT_EQ(net.edge(0), (Edge{0, 2}));
  EXPECT_EQ(net.neighbors(2).size(), 2u);
}

TEST(Graph, RejectsBadNetworks) {
  EXPECT_THROW(MarkovNetwork({2, 0}, {}), Error);
  EXPECT_THROW(MarkovNetwork({2, 2}, {{0, 0}}), Error);
  EXPECT_THROW(MarkovNetwork({2, 2}, {{0, 1}, {1, 0}}), Error);
  EXPECT_THROW(MarkovNetwork({2, 2}, {{0, 2}}), Error);
  EXPECT_THROW(build_network(2, 0, {2, 2}), Error);
  EXPECT_THROW(build_network(2, 3, {2}), Error);
}

TEST(Graph, ProcessTreesOfGrid) {
  const MarkovNetwork net = build_network(2, 5, {3, 4});
  const auto trees = spanning_trees_for_grid(net, 7);
  ASSERT_EQ(trees.size(), 2u);
  EXPECT_EQ(trees[0].name, "top-process");
  EXPECT_EQ(trees[1].name, "bottom-process");
  for (const auto& t : trees) {
    EXPECT_EQ(t.edges.size(), static_cast<std::size_t>(net.num_nodes() - 1));
    EXPECT_EQ(t.params.size(), 7);
    EXPECT_NO_THROW(validate_tree(net, t.edges));
  }
  // tree 0 holds the top chain and no bottom chain edge
  for (EdgeId e : trees[0].edges) {
    const Edge& ed = net.edge(e);
    EXPECT_FALSE(net.level_of(ed.a) == 1 && net.level_of(ed.b) == 1);
  }
}

TEST(Graph, ValidateTreeErrors) {
  const MarkovNetwork net = build_network(2, 3, {2, 2});
  try {
    validate_tree(net, {0, 1, 2, 4, 5});  // both chains and two cross edges close a cycle
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::cycle_detected);
  }
  try {
    validate_tree(net, {0, 1, 2, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::disconnected);
  }
  EXPECT_THROW(validate_tree(net, {0, 99}), Error);
}

TEST(Features, PotentialsAgreeWithFeatureDotProduct) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 30; ++rep) {
    const MarkovNetwork net = rep % 2 ? test::random_tree(rng, 6, 3) : test::random_grid(rng, 3, 3);
    const IndicatorTemplate tmpl(net, 2);
    const Instance inst = test::random_instance(rng, net, 2, 0.0);
    const ParameterVector w = test::random_params(rng, tmpl.dimension());
    const CliqueFeatures f = tmpl.extract(net, inst);
    const Potentials pot = make_potentials(net, tmpl, f, w);
    test::for_each_assignment(net, free_clamp(net), [&](const std::vector<State>& x) {
      EXPECT_NEAR(dot(compute_features(net, tmpl, f, x), w), test::score_of(net, pot, x), 1e-12);
      EXPECT_NEAR(assignment_score(net, pot, x), test::score_of(net, pot, x), 1e-12);
    });
  }
}

TEST(Features, IndexMapIsInjective) {
  const MarkovNetwork net = build_network(2, 3, {2, 3});
  const IndicatorTemplate tmpl(net, 1);
  std::vector<int> seen(tmpl.dimension(), 0);
  for (const auto& b : tmpl.blocks()) {
    for (int r = 0; r < b.rows; ++r) {
      for (int c = 0; c < b.cols; ++c) {
        for (int k = 0; k < b.components; ++k) ++seen[b.index(r, c, k)];
      }
    }
  }
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(Features, NonFinitePotentialIsNumericalError) {
  const MarkovNetwork net({2, 2}, {{0, 1}});
  const IndicatorTemplate tmpl(net);
  ParameterVector w = ParameterVector::Zero(tmpl.dimension());
  w[0] = std::numeric_limits<double>::infinity();
  try {
    make_potentials(net, tmpl, tmpl.extract(net, unlabelled_instance(net)), w);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::numerical_error);
  }
}

TEST(Features, TreeMaskZeroesOffTreeBlocks) {
  const MarkovNetwork net = build_network(2, 3, {2, 2});
  const IndicatorTemplate tmpl(net);
  const auto trees = spanning_trees_for_grid(net);
  const auto f = tmpl.extract(net, unlabelled_instance(net));
  const auto mask = tree_parameter_mask(net, tmpl, f, trees[0].edges);
  std::vector<char> in_tree(net.num_edges(), 0);
  for (EdgeId e : trees[0].edges) in_tree[e] = 1;
  for (int e = 0; e < net.num_edges(); ++e) {
    const auto& b = tmpl.blocks()[net.num_nodes() + e];
    for (int k = 0; k < b.size(); ++k) EXPECT_EQ(mask[b.offset + k], in_tree[e]);
  }
}

}  // namespace
}  // namespace mrf
