// Shared fixtures and independent oracles for the test suites.
#ifndef SPECREV_TESTS_SUPPORT_HPP
#define SPECREV_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "specrev/graph.hpp"
#include "specrev/polytope.hpp"

namespace specrev::testing {

/// TRI: a->b (2), b->c (2), a->c (3); gamma1 = penalty{e3} with bounds [0, 7].
struct Tri {
  Multigraph graph;
  Specification spec;
  Task task;
  EdgeId e1{}, e2{}, e3{};

  Tri() {
    const auto a = graph.add_vertex("a");
    const auto b = graph.add_vertex("b");
    const auto c = graph.add_vertex("c");
    e1 = graph.add_edge(a, b, 2.0);
    e2 = graph.add_edge(b, c, 2.0);
    e3 = graph.add_edge(a, c, 3.0);
    spec = Specification({Constraint{"g1", ConstraintKind::penalty, {e3}, 0.0, graph.total_time()}},
                         graph.edge_count());
    task = Task{a, c, "a->c"};
  }
};

/// All walks with distinct vertices from start to goal (edge-id sequences).
/// With strictly positive costs these contain every optimum.
inline std::vector<std::vector<EdgeId>> enumerate_simple_paths(const Multigraph& g, VertexId start,
                                                               VertexId goal,
                                                               std::size_t limit = 2'000'000) {
  std::vector<std::vector<EdgeId>> out;
  std::vector<char> on_path(g.vertex_count(), 0);
  std::vector<EdgeId> current;
  std::function<void(VertexId)> dfs = [&](VertexId v) {
    if (out.size() >= limit) return;
    if (v == goal) {
      out.push_back(current);
      return;
    }
    on_path[v] = 1;
    for (auto id : g.out_edges(v)) {
      const auto& e = g.edge(id);
      if (on_path[e.head]) continue;
      current.push_back(id);
      dfs(e.head);
      current.pop_back();
    }
    on_path[v] = 0;
  };
  dfs(start);
  return out;
}

/// Direct per-edge costing, independent of the feature representation.
inline double edge_sum_cost(const Multigraph& g, const Specification& spec,
                            const std::vector<EdgeId>& edges, const std::vector<double>& w) {
  double c = 0.0;
  for (auto id : edges) {
    c += g.edge(id).time;
    for (std::size_t k = 0; k < spec.dimension(); ++k) {
      const auto& m = spec.constraint(k).edges;
      if (std::binary_search(m.begin(), m.end(), id)) c += w[k];
    }
  }
  return c;
}

inline double brute_force_min_cost(const Multigraph& g, const Specification& spec, const Task& task,
                                   const std::vector<double>& w) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : enumerate_simple_paths(g, task.start, task.goal)) {
    best = std::min(best, edge_sum_cost(g, spec, p, w));
  }
  return best;
}

/// Random strongly connected multigraph: a Hamiltonian cycle plus extra
/// (possibly parallel) edges, integer-ish times in [1, 6].
inline Multigraph random_graph(std::mt19937_64& rng, std::size_t vertices, std::size_t extra_edges) {
  Multigraph g;
  for (std::size_t i = 0; i < vertices; ++i) g.add_vertex();
  std::vector<VertexId> order(vertices);
  for (std::size_t i = 0; i < vertices; ++i) order[i] = static_cast<VertexId>(i);
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<int> time(2, 12);
  for (std::size_t i = 0; i < vertices; ++i) {
    g.add_edge(order[i], order[(i + 1) % vertices], time(rng) * 0.5);
  }
  std::uniform_int_distribution<std::size_t> pick(0, vertices - 1);
  for (std::size_t i = 0; i < extra_edges; ++i) {
    const auto a = static_cast<VertexId>(pick(rng));
    auto b = static_cast<VertexId>(pick(rng));
    if (a == b) b = static_cast<VertexId>((b + 1) % vertices);
    g.add_edge(a, b, time(rng) * 0.5);
  }
  return g;
}

/// Random specification whose bounds follow the construction rules
/// (penalty u = total time; reward l = -(1 - eps) t_min / mu).
inline Specification random_spec(std::mt19937_64& rng, const Multigraph& g, std::size_t d,
                                 double reward_probability = 0.4, double eps = 1e-3) {
  std::bernoulli_distribution is_reward(reward_probability);
  std::uniform_int_distribution<std::size_t> edge(0, g.edge_count() - 1);
  std::uniform_int_distribution<std::size_t> size(1, std::max<std::size_t>(1, g.edge_count() / 3));
  std::vector<Constraint> cs;
  for (std::size_t k = 0; k < d; ++k) {
    Constraint c;
    c.id = "c" + std::to_string(k);
    c.kind = is_reward(rng) ? ConstraintKind::reward : ConstraintKind::penalty;
    const auto n = size(rng);
    for (std::size_t i = 0; i < n; ++i) c.edges.push_back(static_cast<EdgeId>(edge(rng)));
    std::sort(c.edges.begin(), c.edges.end());
    c.edges.erase(std::unique(c.edges.begin(), c.edges.end()), c.edges.end());
    cs.push_back(std::move(c));
  }
  std::vector<int> reward_count(g.edge_count(), 0);
  for (const auto& c : cs) {
    if (c.kind == ConstraintKind::reward) {
      for (auto e : c.edges) ++reward_count[e];
    }
  }
  for (auto& c : cs) {
    if (c.kind == ConstraintKind::penalty) {
      c.lower = 0.0;
      c.upper = g.total_time();
    } else {
      double tmin = std::numeric_limits<double>::infinity();
      int mu = 1;
      for (auto e : c.edges) {
        tmin = std::min(tmin, g.edge(e).time);
        mu = std::max(mu, reward_count[e]);
      }
      c.lower = -(1.0 - eps) * tmin / mu;
      c.upper = 0.0;
    }
  }
  return Specification(std::move(cs), g.edge_count());
}

inline std::vector<double> uniform_weight(std::mt19937_64& rng, const Specification& spec) {
  std::vector<double> w;
  for (const auto& c : spec.constraints()) {
    std::uniform_real_distribution<double> u(c.lower, c.upper);
    w.push_back(u(rng));
  }
  return w;
}

/// Random box plus rows through a margin around its center, so never empty.
inline FeasibleSpace random_space(std::mt19937_64& rng, std::size_t d, std::size_t rows) {
  std::uniform_real_distribution<double> lo(-5.0, 0.0);
  std::uniform_real_distribution<double> width(0.5, 6.0);
  std::vector<double> l, u;
  for (std::size_t k = 0; k < d; ++k) {
    l.push_back(lo(rng));
    u.push_back(l.back() + width(rng));
  }
  FeasibleSpace f(l, u);
  std::uniform_int_distribution<int> coef(-2, 2);
  std::vector<double> center;
  for (std::size_t k = 0; k < d; ++k) center.push_back(0.5 * (l[k] + u[k]));
  std::uniform_real_distribution<double> margin(0.0, 2.0);
  for (std::size_t r = 0; r < rows; ++r) {
    HalfSpace h;
    for (std::size_t k = 0; k < d; ++k) h.normal.push_back(coef(rng));
    double dot = 0.0;
    for (std::size_t k = 0; k < d; ++k) dot += h.normal[k] * center[k];
    h.offset = dot + margin(rng);
    f = f.with_row(h);
  }
  return f;
}

}  // namespace specrev::testing

#endif  // SPECREV_TESTS_SUPPORT_HPP
