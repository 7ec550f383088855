#include <gtest/gtest.h>

#include <cmath>

#include "mgmn/ged.hpp"
#include "support/random_graphs.hpp"

namespace mgmn {
namespace {

using testing::random_graph;

Graph unlabeled(int n, std::vector<Edge> edges) {
  Graph g;
  g.features = Eigen::MatrixXd::Ones(n, 1);
  g.edges = std::move(edges);
  return g;
}

Graph triangle() { return unlabeled(3, {{0, 1}, {1, 2}, {0, 2}}); }
Graph path3() { return unlabeled(3, {{0, 1}, {1, 2}}); }

TEST(GedExact, IdentityIsZero) {
  const Graph g = triangle();
  const GedResult r = ged_exact(g, g);
  EXPECT_EQ(r.distance, 0.0);
  EXPECT_EQ(r.normalized_similarity, 1.0);
}

TEST(GedExact, TriangleVersusPath) {
  const GedResult r = ged_exact(triangle(), path3());
  EXPECT_EQ(r.distance, 1.0);
  EXPECT_NEAR(r.normalized_similarity, 0.71653, 1e-5);
  EXPECT_EQ(ged_bruteforce(triangle(), path3()).distance, 1.0);
}

TEST(GedExact, SingleNodeVersusEdge) {
  const Graph a = unlabeled(1, {});
  const Graph b = unlabeled(2, {{0, 1}});
  EXPECT_EQ(ged_exact(a, b).distance, 2.0);
  EXPECT_EQ(ged_bruteforce(a, b).distance, 2.0);
}

TEST(GedExact, SubstitutionOfDifferentLabels) {
  Graph a = unlabeled(1, {});
  Graph b = unlabeled(1, {});
  a.labels = {0};
  b.labels = {1};
  EXPECT_EQ(ged_bruteforce(a, b).distance, 1.0);
  EXPECT_EQ(ged_exact(a, b).distance, 1.0);
}

TEST(GedExact, OverBudgetIsRefused) {
  const Graph big = unlabeled(11, {});
  EXPECT_THROW(ged_exact(big, triangle()), GedBudgetError);
  GedOptions o;
  o.node_budget = 2;
  EXPECT_THROW(ged_exact(triangle(), triangle(), o), GedBudgetError);
}

TEST(GedExact, TimeoutReportsBound) {
  Rng rng(9);
  const Graph a = random_graph(rng, 10, 10, 0.5, 0, "a");
  const Graph b = random_graph(rng, 10, 10, 0.2, 0, "b");
  GedOptions o;
  o.timeout = std::chrono::milliseconds(0);
  try {
    ged_exact(a, b, o);
    FAIL() << "expected a timeout";
  } catch (const GedTimeoutError& e) {
    EXPECT_GE(e.lower_bound(), ged_lower_bound(a, b));
  }
}

TEST(GedBruteforce, RefusesLargeGraphs) {
  EXPECT_THROW(ged_bruteforce(unlabeled(6, {}), triangle()), GedBudgetError);
}

TEST(GedBruteforce, Symmetric) {
  Rng rng(21);
  for (int i = 0; i < 50; ++i) {
    const Graph a = random_graph(rng, 1, 4, 0.5, i % 2 == 0 ? 0 : 3);
    const Graph b = random_graph(rng, 1, 4, 0.5, i % 2 == 0 ? 0 : 3);
    EXPECT_EQ(ged_bruteforce(a, b).distance, ged_bruteforce(b, a).distance);
  }
}

TEST(GedOracle, ExactEqualsBruteforceOnRandomPairs) {
  Rng rng(33);
  for (int i = 0; i < 200; ++i) {
    const int labels = i % 2 == 0 ? 0 : 2 + i % 3;
    const Graph a = random_graph(rng, 1, 4, 0.5, labels);
    const Graph b = random_graph(rng, 1, 4, 0.5, labels);
    ASSERT_EQ(ged_exact(a, b).distance, ged_bruteforce(a, b).distance) << "pair " << i;
  }
}

TEST(GedOracle, TriangleInequality) {
  Rng rng(34);
  for (int i = 0; i < 100; ++i) {
    const int labels = i % 2 == 0 ? 0 : 3;
    const Graph a = random_graph(rng, 1, 4, 0.5, labels);
    const Graph b = random_graph(rng, 1, 4, 0.5, labels);
    const Graph c = random_graph(rng, 1, 4, 0.5, labels);
    EXPECT_LE(ged_exact(a, c).distance, ged_exact(a, b).distance + ged_exact(b, c).distance);
  }
}

TEST(GedOracle, PermutedGraphIsAtDistanceZero) {
  Rng rng(35);
  for (int i = 0; i < 30; ++i) {
    const Graph a = random_graph(rng, 2, 8, 0.4, 3);
    const Graph b = permute_nodes(a, random_permutation(a.num_nodes(), rng));
    EXPECT_EQ(ged_exact(a, b).distance, 0.0);
  }
}

TEST(GedOracle, HeuristicIsAdmissibleAtRoot) {
  Rng rng(36);
  for (int i = 0; i < 100; ++i) {
    const Graph a = random_graph(rng, 1, 4, 0.5, i % 3);
    const Graph b = random_graph(rng, 1, 4, 0.5, i % 3);
    EXPECT_LE(ged_lower_bound(a, b), ged_bruteforce(a, b).distance);
  }
}

TEST(NormalizedSimilarity, Values) {
  EXPECT_EQ(normalized_similarity(0.0, 3, 4), 1.0);
  EXPECT_NEAR(normalized_similarity(2.0, 3, 3), 0.51342, 1e-5);
  const double far = normalized_similarity(1e3, 5, 5);
  EXPECT_GT(far, 0.0);
  EXPECT_LT(far, 1e-80);
}

}  // namespace
}  // namespace mgmn
