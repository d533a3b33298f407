#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "specrev/document.hpp"
#include "specrev/metrics.hpp"
#include "support.hpp"

using namespace specrev;
using specrev::testing::Tri;

namespace {

// One vertex with parallel edges to two (or more) neighbors.
struct Fan {
  Multigraph graph;
  Specification spec{{}, 0};
  explicit Fan(const std::vector<double>& times) {
    const auto hub = graph.add_vertex("hub");
    for (std::size_t i = 0; i < times.size(); ++i) {
      const auto v = graph.add_vertex("n" + std::to_string(i));
      graph.add_edge(hub, v, times[i]);
      graph.add_edge(hub, v, times[i] * 3.0, 1);  // slower parallel tier never wins
    }
    spec = Specification({}, graph.edge_count());
  }
};

}  // namespace

TEST(Entropy, HandValues) {
  EXPECT_NEAR(vertex_entropy(Fan({2, 2}).graph, Fan({2, 2}).spec, {}, 0), 1.0, 1e-15);
  const Fan one({5});
  EXPECT_EQ(vertex_entropy(one.graph, one.spec, {}, 0), 0.0);
  // p = (3/4, 1/4): H = 0.811278...
  const Fan skew({1, 3});
  const double expected = -(0.75 * std::log2(0.75) + 0.25 * std::log2(0.25));
  EXPECT_NEAR(vertex_entropy(skew.graph, skew.spec, {}, 0), expected, 1e-12);
  EXPECT_NEAR(expected, 0.8113, 1e-4);
}

TEST(Entropy, FacilityProbabilitiesSumToOne) {
  const auto world = build_world(load_environment(std::string(SPECREV_DATA_DIR) + "/facility_small.json"));
  WeightVector w;
  for (const auto& c : world->spec().constraints()) w.push_back(c.kind == ConstraintKind::penalty ? c.upper : c.lower);
  for (VertexId v = 0; v < world->graph().vertex_count(); ++v) {
    const auto p = transition_probabilities(world->graph(), world->spec(), w, v);
    const double sum = std::accumulate(p.begin(), p.end(), 0.0, [](double s, const auto& x) { return s + x.second; });
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Metrics, ZeroWeightRatiosAreOne) {
  const auto world = build_world(load_environment(std::string(SPECREV_DATA_DIR) + "/facility_small.json"));
  const WeightVector zero(world->spec().dimension(), 0.0);
  const auto r = evaluate_metrics(world->graph(), world->spec(), zero, world->tasks);
  EXPECT_EQ(*r.entropy_ratio, 1.0);
  EXPECT_EQ(*r.global_time_ratio, 1.0);
  EXPECT_EQ(r.task_time_ratio, 1.0);
}

TEST(Metrics, TriTimeRatio) {
  const Tri tri;
  const std::vector<Task> tasks{tri.task};
  EXPECT_DOUBLE_EQ(task_time_ratio(tri.graph, tri.spec, WeightVector{2.0}, tasks), 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(task_time_ratio(tri.graph, tri.spec, WeightVector{0.5}, tasks), 1.0);
}

TEST(Metrics, SingleVertexEntropyRatioUndefined) {
  Multigraph g;
  g.add_vertex("only");
  const Specification spec({}, 0);
  EXPECT_FALSE(entropy_ratio(g, spec, WeightVector{}).has_value());
}

TEST(Metrics, NonpositiveCostIsAnError) {
  Multigraph g;
  const auto a = g.add_vertex("a");
  const auto b = g.add_vertex("b");
  const auto e = g.add_edge(a, b, 1.0);
  const Specification spec({Constraint{"r", ConstraintKind::reward, {e}, -2.0, 0.0}}, g.edge_count());
  EXPECT_THROW(vertex_entropy(g, spec, WeightVector{-1.5}, a), MetricError);
}

TEST(Acceptance, Rates) {
  // 20 queries over 5 tasks: 9 acceptances, on tasks 0, 1 and 2 only.
  std::vector<AnsweredQuery> answers;
  const std::size_t accept_tasks[] = {0, 1, 2, 0, 1, 2, 0, 1, 2};
  for (auto t : accept_tasks) answers.push_back({t, true});
  for (int i = 0; i < 11; ++i) answers.push_back({static_cast<std::size_t>(i % 5), false});
  const auto r = acceptance_rates(answers);
  ASSERT_TRUE(r);
  EXPECT_DOUBLE_EQ(r->all, 0.45);
  EXPECT_DOUBLE_EQ(r->tasks, 0.6);

  std::vector<AnsweredQuery> none{{0, false}, {1, false}};
  const auto z = acceptance_rates(none);
  EXPECT_EQ(z->all, 0.0);
  EXPECT_EQ(z->tasks, 0.0);
  EXPECT_FALSE(acceptance_rates({}).has_value());
}

// Values from an independent scratch implementation of grid building, zone
// compilation and the entropy formulas, run on the shipped document.
TEST(Entropy, FacilityRegression) {
  const auto world = build_world(load_environment(std::string(SPECREV_DATA_DIR) + "/facility_small.json"));
  ASSERT_EQ(world->spec().dimension(), 16u);
  ASSERT_EQ(world->graph().edge_count(), 3368u);
  WeightVector upper, initial;
  for (const auto& c : world->spec().constraints()) {
    upper.push_back(c.upper);
    initial.push_back(c.kind == ConstraintKind::penalty ? c.upper : c.lower);
  }
  EXPECT_NEAR(*entropy_ratio(world->graph(), world->spec(), upper), 0.886853676288743, 1e-9);
  EXPECT_NEAR(*entropy_ratio(world->graph(), world->spec(), initial), 0.851793641343944, 1e-9);
}

TEST(Entropy, TwoByTwoGrid) {
  const auto gg = build_graph(Environment{{"..", ".."}, 1.0, {1.0}});
  const Specification spec({}, gg.graph.edge_count());
  // Every cell sees two orthogonal neighbors at cost 1 and one diagonal at sqrt 2.
  const double inv[3] = {1.0, 1.0, 1.0 / std::sqrt(2.0)};
  const double sum = inv[0] + inv[1] + inv[2];
  double h = 0.0;
  for (double x : inv) h -= x / sum * std::log2(x / sum);
  EXPECT_NEAR(graph_entropy(gg.graph, spec, WeightVector{}), 4.0 * h, 1e-12);
}

TEST(Entropy, BoundsAndUniformMaximum) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    auto g = specrev::testing::random_graph(rng, 7, 12);
    // Rebuild with uniform times so the unconstrained entropy is maximal at each vertex.
    Multigraph u;
    for (VertexId v = 0; v < g.vertex_count(); ++v) u.add_vertex();
    for (const auto& e : g.edges()) u.add_edge(e.tail, e.head, 1.0);
    const auto spec = specrev::testing::random_spec(rng, u, 3);
    const auto w = specrev::testing::uniform_weight(rng, spec);
    for (VertexId v = 0; v < u.vertex_count(); ++v) {
      const auto n = transition_probabilities(u, spec, w, v).size();
      const double hv = vertex_entropy(u, spec, w, v);
      EXPECT_GE(hv, 0.0);
      EXPECT_LE(hv, std::log2(static_cast<double>(n)) + 1e-12);
    }
    EXPECT_LE(*entropy_ratio(u, spec, w), 1.0 + 1e-12);
    EXPECT_GE(global_time_ratio(u, spec, w), 1.0 - 1e-12);
  }
}
