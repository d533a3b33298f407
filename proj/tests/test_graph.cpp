#include <gtest/gtest.h>

#include <random>

#include "specrev/graph.hpp"
#include "support.hpp"

using namespace specrev;
using specrev::testing::Tri;

TEST(CombinedEdgeCost, SumsMemberWeights) {
  Multigraph g;
  const auto a = g.add_vertex();
  const auto b = g.add_vertex();
  const auto e0 = g.add_edge(a, b, 3.0);
  const auto e1 = g.add_edge(b, a, 3.0);
  const auto e2 = g.add_edge(a, b, 3.0);
  const Specification spec({Constraint{"g1", ConstraintKind::penalty, {e1, e2}, 0.0, 9.0},
                            Constraint{"g2", ConstraintKind::reward, {e2}, -1.5, 0.0}},
                           g.edge_count());
  const std::vector<double> w{2.0, -1.0};
  EXPECT_DOUBLE_EQ(combined_edge_cost(g.edge(e0), spec, w), 3.0);
  EXPECT_DOUBLE_EQ(combined_edge_cost(g.edge(e1), spec, w), 5.0);
  EXPECT_DOUBLE_EQ(combined_edge_cost(g.edge(e2), spec, w), 4.0);
  EXPECT_THROW(combined_edge_cost(g.edge(e0), spec, std::vector<double>{1.0}), DimensionMismatch);
}

TEST(ShortestPath, TriFixtureByEnumeration) {
  Tri tri;
  // Both simple a->c paths: [e3] costs 3 + w, [e1, e2] costs 4.
  const auto p0 = shortest_path(tri.graph, tri.spec, std::vector<double>{0.0}, tri.task);
  EXPECT_EQ(p0.edges, std::vector<EdgeId>{tri.e3});
  EXPECT_DOUBLE_EQ(path_cost(p0, std::vector<double>{0.0}), 3.0);

  const auto p2 = shortest_path(tri.graph, tri.spec, std::vector<double>{2.0}, tri.task);
  EXPECT_EQ(p2.edges, (std::vector<EdgeId>{tri.e1, tri.e2}));
  EXPECT_DOUBLE_EQ(path_cost(p2, std::vector<double>{2.0}), 4.0);

  const auto p1 = shortest_path(tri.graph, tri.spec, std::vector<double>{1.0}, tri.task);
  EXPECT_EQ(p1.edges, std::vector<EdgeId>{tri.e3}) << "tie resolved toward fewer edges";
}

TEST(ShortestPath, LexicographicTieBreak) {
  // Two parallel two-edge routes of equal cost; smaller edge-id sequence wins.
  Multigraph g;
  const auto a = g.add_vertex();
  const auto b = g.add_vertex();
  const auto c = g.add_vertex();
  const auto ab_slow = g.add_edge(a, b, 1.0);
  const auto bc = g.add_edge(b, c, 1.0);
  const auto ab_other = g.add_edge(a, b, 1.0);
  const Specification spec;
  const auto p = shortest_path(g, spec, std::vector<double>{}, Task{a, c, ""});
  EXPECT_EQ(p.edges, (std::vector<EdgeId>{ab_slow, bc}));
  (void)ab_other;
}

TEST(ShortestPath, UnreachableGoalThrows) {
  Tri tri;
  EXPECT_THROW(shortest_path(tri.graph, tri.spec, std::vector<double>{0.0}, Task{2, 0, ""}),
               PlanningError);
}

TEST(PathFeatures, CountsMemberEdges) {
  Tri tri;
  EXPECT_EQ(path_features(tri.graph, std::vector<EdgeId>{tri.e3}, tri.spec), FeatureVector{1});
  EXPECT_EQ(path_features(tri.graph, std::vector<EdgeId>{tri.e1, tri.e2}, tri.spec), FeatureVector{0});
  EXPECT_THROW(path_features(tri.graph, std::vector<EdgeId>{99}, tri.spec), std::out_of_range);

  // Path crossing three edges of a five-edge constraint.
  Multigraph g;
  for (int i = 0; i < 6; ++i) g.add_vertex();
  std::vector<EdgeId> line;
  for (VertexId i = 0; i < 5; ++i) line.push_back(g.add_edge(i, i + 1, 1.0));
  const Specification spec({Constraint{"z", ConstraintKind::penalty, line, 0.0, 5.0}}, g.edge_count());
  EXPECT_EQ(path_features(g, std::vector<EdgeId>{line[0], line[1], line[2]}, spec), FeatureVector{3});
}

TEST(PathCost, DotProductPlusDuration) {
  EXPECT_DOUBLE_EQ(path_cost(std::vector<int>{0, 0}, 8.0, std::vector<double>{5.0, -1.0}), 8.0);
  EXPECT_DOUBLE_EQ(path_cost(std::vector<int>{1}, 3.0, std::vector<double>{2.0}), 5.0);
  EXPECT_THROW(path_cost(std::vector<int>{1}, 3.0, std::vector<double>{2.0, 1.0}), DimensionMismatch);
}

TEST(PathCost, FeatureAndEdgeCostingAgree) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = specrev::testing::random_graph(rng, 8, 14);
    const auto spec = specrev::testing::random_spec(rng, g, 3);
    const auto w = specrev::testing::uniform_weight(rng, spec);
    std::uniform_int_distribution<VertexId> v(0, 7);
    const auto s = v(rng);
    auto t = v(rng);
    if (s == t) t = (t + 1) % 8;
    const auto paths = specrev::testing::enumerate_simple_paths(g, s, t, 50);
    for (const auto& edges : paths) {
      const auto p = make_path(g, edges, spec);
      double by_edges = 0.0;
      for (auto e : edges) by_edges += combined_edge_cost(g.edge(e), spec, w);
      EXPECT_NEAR(path_cost(p, w), by_edges, 1e-9);
    }
  }
}

TEST(ValidateSpecification, PenaltyOnlyIsValid) {
  Tri tri;
  EXPECT_TRUE(validate_specification(tri.graph, tri.spec).valid());
}

TEST(ValidateSpecification, EpsilonScaledRewardIsValid) {
  Tri tri;
  const double eps = 1e-3;
  const Specification spec({Constraint{"r", ConstraintKind::reward, {tri.e1, tri.e3}, -(1 - eps) * 2.0, 0.0}},
                           tri.graph.edge_count());
  EXPECT_TRUE(validate_specification(tri.graph, spec).valid());
}

TEST(ValidateSpecification, OverlappingRewardsFlagSharedEdge) {
  Tri tri;
  // Each reward alone leaves 0.1 * t(e3); together 3 - 2 * 2.7 < 0.
  const Specification spec({Constraint{"r1", ConstraintKind::reward, {tri.e3}, -0.9 * 3.0, 0.0},
                            Constraint{"r2", ConstraintKind::reward, {tri.e3}, -0.9 * 3.0, 0.0}},
                           tri.graph.edge_count());
  const auto report = validate_specification(tri.graph, spec);
  EXPECT_FALSE(report.valid());
  EXPECT_EQ(report.offending_edges, std::vector<EdgeId>{tri.e3});
  EXPECT_THROW(shortest_path(tri.graph, spec, std::vector<double>{-2.7, -2.7}, tri.task), PlanningError);
}

TEST(Specification, RejectsBadConstraints) {
  Tri tri;
  EXPECT_THROW(Specification({Constraint{"p", ConstraintKind::penalty, {}, 0.0, 1.0}}, 3), std::invalid_argument);
  EXPECT_THROW(Specification({Constraint{"p", ConstraintKind::penalty, {7}, 0.0, 1.0}}, 3), std::invalid_argument);
  EXPECT_THROW(Specification({Constraint{"p", ConstraintKind::penalty, {0}, -1.0, 1.0}}, 3), std::invalid_argument);
  EXPECT_THROW(Specification({Constraint{"r", ConstraintKind::reward, {0}, -1.0, 1.0}}, 3), std::invalid_argument);
  EXPECT_THROW(Specification({Constraint{"p", ConstraintKind::penalty, {0}, 0.0, 1.0},
                              Constraint{"p", ConstraintKind::penalty, {1}, 0.0, 1.0}},
                             3),
               std::invalid_argument);
}

// Property checks against brute-force enumeration on small random graphs.
TEST(ShortestPathProperty, OptimalDeterministicAndNoFasterThanTimeOptimum) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 4 + rng() % 9;  // 4..12 vertices
    const auto g = specrev::testing::random_graph(rng, n, n + rng() % n);
    const auto spec = specrev::testing::random_spec(rng, g, 1 + rng() % 4);
    ASSERT_TRUE(validate_specification(g, spec).valid());
    const auto w = specrev::testing::uniform_weight(rng, spec);
    const Task task{static_cast<VertexId>(rng() % n), static_cast<VertexId>(0), ""};
    if (task.start == task.goal) continue;
    const auto p = shortest_path(g, spec, w, task);
    EXPECT_LE(path_cost(p, w), specrev::testing::brute_force_min_cost(g, spec, task, w) + 1e-9);
    EXPECT_EQ(shortest_path(g, spec, w, task).edges, p.edges);
    EXPECT_GE(p.duration + 1e-12, fastest_path(g, spec, task).duration);
    EXPECT_DOUBLE_EQ(p.duration, path_duration(g, p.edges));
    for (std::size_t i = 1; i < p.edges.size(); ++i) {
      EXPECT_EQ(g.edge(p.edges[i - 1]).head, g.edge(p.edges[i]).tail);
    }
  }
}

TEST(Multigraph, StrongConnectivity) {
  Tri tri;
  EXPECT_FALSE(tri.graph.is_strongly_connected());
  std::mt19937_64 rng(1);
  EXPECT_TRUE(specrev::testing::random_graph(rng, 6, 3).is_strongly_connected());
}
