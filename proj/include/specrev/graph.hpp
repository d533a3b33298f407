#ifndef SPECREV_GRAPH_HPP
#define SPECREV_GRAPH_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace specrev {

using VertexId = std::uint32_t;
using EdgeId = std::uint32_t;

/// Raised when vectors that must share the specification dimension do not.
class DimensionMismatch : public std::invalid_argument {
public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : std::invalid_argument("dimension mismatch: expected " + std::to_string(expected) +
                              ", got " + std::to_string(got)) {}
};

/// Raised when the planner cannot produce a path (unreachable goal, rejected spec).
class PlanningError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Edge {
  EdgeId id{};
  VertexId tail{};
  VertexId head{};
  double time{};  // seconds, > 0
  std::uint32_t tier{};
};

/// Directed multigraph with per-edge traversal times. Edge ids are dense and
/// assigned in insertion order; parallel edges are distinguished by id.
class Multigraph {
public:
  VertexId add_vertex(std::string label = {}) {
    labels_.push_back(label.empty() ? "v" + std::to_string(labels_.size()) : std::move(label));
    out_.emplace_back();
    return static_cast<VertexId>(labels_.size() - 1);
  }

  EdgeId add_edge(VertexId tail, VertexId head, double time, std::uint32_t tier = 0) {
    if (tail >= vertex_count() || head >= vertex_count()) {
      throw std::out_of_range("edge endpoint does not exist");
    }
    if (tail == head) throw std::invalid_argument("self loops are not allowed");
    if (!(time > 0.0) || !std::isfinite(time)) {
      throw std::invalid_argument("edge traversal time must be positive");
    }
    const auto id = static_cast<EdgeId>(edges_.size());
    edges_.push_back(Edge{id, tail, head, time, tier});
    out_[tail].push_back(id);
    return id;
  }

  [[nodiscard]] std::size_t vertex_count() const noexcept { return labels_.size(); }
  [[nodiscard]] std::size_t edge_count() const noexcept { return edges_.size(); }
  [[nodiscard]] const Edge& edge(EdgeId id) const { return edges_.at(id); }
  [[nodiscard]] std::span<const Edge> edges() const noexcept { return edges_; }
  [[nodiscard]] std::span<const EdgeId> out_edges(VertexId v) const { return out_.at(v); }
  [[nodiscard]] const std::string& label(VertexId v) const { return labels_.at(v); }

  [[nodiscard]] std::optional<VertexId> find_vertex(const std::string& label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] == label) return static_cast<VertexId>(i);
    }
    return std::nullopt;
  }

  [[nodiscard]] double total_time() const noexcept {
    double sum = 0.0;
    for (const auto& e : edges_) sum += e.time;
    return sum;
  }

  [[nodiscard]] bool is_strongly_connected() const {
    const auto n = vertex_count();
    if (n == 0) return false;
    std::vector<std::vector<VertexId>> reverse(n);
    for (const auto& e : edges_) reverse[e.head].push_back(e.tail);
    auto reaches_all = [n](auto&& next) {
      std::vector<char> seen(n, 0);
      std::vector<VertexId> stack{0};
      seen[0] = 1;
      std::size_t count = 1;
      while (!stack.empty()) {
        const auto v = stack.back();
        stack.pop_back();
        next(v, [&](VertexId w) {
          if (!seen[w]) {
            seen[w] = 1;
            ++count;
            stack.push_back(w);
          }
        });
      }
      return count == n;
    };
    const bool forward = reaches_all([this](VertexId v, auto&& visit) {
      for (auto id : out_[v]) visit(edges_[id].head);
    });
    const bool backward = reaches_all([&reverse](VertexId v, auto&& visit) {
      for (auto w : reverse[v]) visit(w);
    });
    return forward && backward;
  }

private:
  std::vector<std::string> labels_;
  std::vector<Edge> edges_;
  std::vector<std::vector<EdgeId>> out_;
};

enum class ConstraintKind { penalty, reward };

inline const char* to_string(ConstraintKind kind) noexcept {
  return kind == ConstraintKind::penalty ? "penalty" : "reward";
}

struct Constraint {
  std::string id;
  ConstraintKind kind{ConstraintKind::penalty};
  std::vector<EdgeId> edges;  // sorted, unique
  double lower{};
  double upper{};
};

using WeightVector = std::vector<double>;
using FeatureVector = std::vector<int>;

/// Ordered constraint list; constraint k is coordinate k of every weight vector.
class Specification {
public:
  Specification() = default;

  Specification(std::vector<Constraint> constraints, std::size_t edge_count)
      : constraints_(std::move(constraints)), membership_(edge_count) {
    for (std::size_t k = 0; k < constraints_.size(); ++k) {
      auto& c = constraints_[k];
      std::sort(c.edges.begin(), c.edges.end());
      c.edges.erase(std::unique(c.edges.begin(), c.edges.end()), c.edges.end());
      if (c.edges.empty()) throw std::invalid_argument("constraint " + c.id + " has no edges");
      for (auto e : c.edges) {
        if (e >= edge_count) throw std::invalid_argument("constraint " + c.id + " names unknown edge");
        membership_[e].push_back(k);
      }
      if (c.kind == ConstraintKind::penalty && !(c.lower == 0.0 && c.upper > 0.0)) {
        throw std::invalid_argument("penalty constraint " + c.id + " needs l = 0 < u");
      }
      if (c.kind == ConstraintKind::reward && !(c.upper == 0.0 && c.lower < 0.0)) {
        throw std::invalid_argument("reward constraint " + c.id + " needs l < 0 = u");
      }
      for (std::size_t j = 0; j < k; ++j) {
        if (constraints_[j].id == c.id) throw std::invalid_argument("duplicate constraint id " + c.id);
      }
    }
  }

  [[nodiscard]] std::size_t dimension() const noexcept { return constraints_.size(); }
  [[nodiscard]] std::size_t edge_count() const noexcept { return membership_.size(); }
  [[nodiscard]] const std::vector<Constraint>& constraints() const noexcept { return constraints_; }
  [[nodiscard]] const Constraint& constraint(std::size_t k) const { return constraints_.at(k); }

  /// Indices of the constraints that contain the edge.
  [[nodiscard]] std::span<const std::size_t> memberships(EdgeId e) const {
    if (e >= membership_.size()) return {};
    return membership_[e];
  }

  [[nodiscard]] WeightVector lower_bounds() const {
    WeightVector l;
    for (const auto& c : constraints_) l.push_back(c.lower);
    return l;
  }
  [[nodiscard]] WeightVector upper_bounds() const {
    WeightVector u;
    for (const auto& c : constraints_) u.push_back(c.upper);
    return u;
  }

private:
  std::vector<Constraint> constraints_;
  std::vector<std::vector<std::size_t>> membership_;
};

struct Task {
  VertexId start{};
  VertexId goal{};
  std::string label;
};

struct Path {
  std::vector<EdgeId> edges;
  double duration{};
  FeatureVector features;

  friend bool operator==(const Path& a, const Path& b) { return a.edges == b.edges; }
};

/// Cost comparisons closer than this are treated as ties by the planner.
inline constexpr double kCostTieTolerance = 1e-9;

inline void check_dimension(const Specification& spec, std::span<const double> w) {
  if (w.size() != spec.dimension()) throw DimensionMismatch(spec.dimension(), w.size());
}

/// t(e) plus the weights of every constraint containing e.
inline double combined_edge_cost(const Edge& edge, const Specification& spec,
                                 std::span<const double> w) {
  check_dimension(spec, w);
  double cost = edge.time;
  for (auto k : spec.memberships(edge.id)) cost += w[k];
  return cost;
}

/// phi_k = |E(P) ∩ E_k|.
inline FeatureVector path_features(const Multigraph& graph, std::span<const EdgeId> edges,
                                   const Specification& spec) {
  FeatureVector phi(spec.dimension(), 0);
  for (auto e : edges) {
    if (e >= graph.edge_count()) throw std::out_of_range("unknown edge id " + std::to_string(e));
    for (auto k : spec.memberships(e)) ++phi[k];
  }
  return phi;
}

inline double path_duration(const Multigraph& graph, std::span<const EdgeId> edges) {
  double t = 0.0;
  for (auto e : edges) t += graph.edge(e).time;
  return t;
}

/// C(P) = phi·w + t(P).
inline double path_cost(std::span<const int> features, double duration,
                        std::span<const double> w) {
  if (features.size() != w.size()) throw DimensionMismatch(features.size(), w.size());
  double cost = duration;
  for (std::size_t k = 0; k < w.size(); ++k) cost += features[k] * w[k];
  return cost;
}

inline double path_cost(const Path& path, std::span<const double> w) {
  return path_cost(path.features, path.duration, w);
}

inline Path make_path(const Multigraph& graph, std::vector<EdgeId> edges, const Specification& spec) {
  Path p;
  p.features = path_features(graph, edges, spec);
  p.duration = path_duration(graph, edges);
  p.edges = std::move(edges);
  return p;
}

struct ValidationReport {
  std::vector<EdgeId> offending_edges;
  [[nodiscard]] bool valid() const noexcept { return offending_edges.empty(); }
};

/// Checks t(e) + sum of reward lower bounds over e's constraints > 0 for every edge.
inline ValidationReport validate_specification(const Multigraph& graph, const Specification& spec) {
  ValidationReport report;
  if (spec.edge_count() != graph.edge_count()) {
    throw std::invalid_argument("specification was built for a different graph");
  }
  for (const auto& e : graph.edges()) {
    double worst = e.time;
    for (auto k : spec.memberships(e.id)) {
      const auto& c = spec.constraint(k);
      if (c.kind == ConstraintKind::reward) worst += c.lower;
    }
    if (!(worst > 0.0)) report.offending_edges.push_back(e.id);
  }
  return report;
}

namespace detail {

/// Label-setting search over strictly positive edge costs. Labels are ordered
/// by (cost within kCostTieTolerance, edge count, edge-id sequence); the
/// sequence comparison reconstructs prefixes from settled predecessors.
class LabelSearch {
public:
  /// Stops once `target` is settled; settled labels are final, so the result
  /// for the target matches a full run.
  LabelSearch(const Multigraph& graph, std::vector<double> edge_costs, VertexId source,
              std::optional<VertexId> target = std::nullopt)
      : graph_(graph), cost_(std::move(edge_costs)), source_(source), target_(target),
        dist_(graph.vertex_count(), std::numeric_limits<double>::infinity()),
        hops_(graph.vertex_count(), 0),
        pred_(graph.vertex_count(), kNone),
        settled_(graph.vertex_count(), 0) {
    run();
  }

  [[nodiscard]] bool reached(VertexId v) const { return std::isfinite(dist_[v]); }
  [[nodiscard]] double distance(VertexId v) const { return dist_[v]; }

  [[nodiscard]] std::vector<EdgeId> path_to(VertexId v) const {
    std::vector<EdgeId> seq;
    while (v != source_) {
      const auto e = pred_[v];
      seq.push_back(e);
      v = graph_.edge(e).tail;
    }
    std::reverse(seq.begin(), seq.end());
    return seq;
  }

private:
  static constexpr EdgeId kNone = std::numeric_limits<EdgeId>::max();

  // Negative if candidate (via edge e into v) beats the current label of v.
  int compare_candidate(double cost, std::uint32_t hops, EdgeId via, VertexId v) const {
    const double scale = std::max(1.0, std::abs(cost));
    if (cost < dist_[v] - kCostTieTolerance * scale) return -1;
    if (cost > dist_[v] + kCostTieTolerance * scale) return 1;
    if (hops != hops_[v]) return hops < hops_[v] ? -1 : 1;
    // Equal lengths: walk both edge sequences backwards in step until they
    // share a vertex; the earliest differing position decides.
    EdgeId a = via;
    EdgeId b = pred_[v];
    int order = 0;
    while (true) {
      if (a != b) order = a < b ? -1 : 1;
      const auto ta = graph_.edge(a).tail;
      const auto tb = graph_.edge(b).tail;
      if (ta == tb) return order;
      a = pred_[ta];
      b = pred_[tb];
    }
  }

  void run() {
    using Item = std::pair<double, VertexId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    dist_[source_] = 0.0;
    open.emplace(0.0, source_);
    while (!open.empty()) {
      const auto [d, v] = open.top();
      open.pop();
      if (settled_[v] || d != dist_[v]) continue;
      settled_[v] = 1;
      if (target_ && v == *target_) return;
      for (auto id : graph_.out_edges(v)) {
        const auto& e = graph_.edge(id);
        if (settled_[e.head]) continue;
        const double cand = d + cost_[id];
        const auto hops = hops_[v] + 1;
        if (pred_[e.head] == kNone && e.head != source_) {
          dist_[e.head] = cand;
          hops_[e.head] = hops;
          pred_[e.head] = id;
          open.emplace(cand, e.head);
        } else if (compare_candidate(cand, hops, id, e.head) < 0) {
          dist_[e.head] = cand;
          hops_[e.head] = hops;
          pred_[e.head] = id;
          open.emplace(cand, e.head);
        }
      }
    }
  }

  const Multigraph& graph_;
  std::vector<double> cost_;
  VertexId source_;
  std::optional<VertexId> target_;
  std::vector<double> dist_;
  std::vector<std::uint32_t> hops_;
  std::vector<EdgeId> pred_;
  std::vector<char> settled_;
};

inline std::vector<double> combined_costs(const Multigraph& graph, const Specification& spec,
                                          std::span<const double> w) {
  check_dimension(spec, w);
  std::vector<double> costs(graph.edge_count());
  for (const auto& e : graph.edges()) {
    double c = e.time;
    for (auto k : spec.memberships(e.id)) c += w[k];
    if (!(c > 0.0)) {
      throw PlanningError("edge " + std::to_string(e.id) +
                          " has nonpositive combined cost; validate the specification bounds");
    }
    costs[e.id] = c;
  }
  return costs;
}

inline std::vector<double> time_costs(const Multigraph& graph) {
  std::vector<double> costs(graph.edge_count());
  for (const auto& e : graph.edges()) costs[e.id] = e.time;
  return costs;
}

}  // namespace detail

/// Minimum combined-cost path for the task. Ties: fewer edges, then the
/// lexicographically smallest edge-id sequence.
inline Path shortest_path(const Multigraph& graph, const Specification& spec,
                          std::span<const double> w, const Task& task) {
  if (task.start >= graph.vertex_count() || task.goal >= graph.vertex_count()) {
    throw std::out_of_range("task endpoint does not exist");
  }
  detail::LabelSearch search(graph, detail::combined_costs(graph, spec, w), task.start, task.goal);
  if (!search.reached(task.goal)) {
    throw PlanningError("goal " + graph.label(task.goal) + " unreachable from " +
                        graph.label(task.start));
  }
  return make_path(graph, search.path_to(task.goal), spec);
}

/// Time-only shortest path (all constraint weights zero).
inline Path fastest_path(const Multigraph& graph, const Specification& spec, const Task& task) {
  const WeightVector zero(spec.dimension(), 0.0);
  return shortest_path(graph, spec, zero, task);
}

/// Optimal paths from one source to every vertex, under combined cost.
class ShortestPathTree {
public:
  ShortestPathTree(const Multigraph& graph, const Specification& spec, std::span<const double> w,
                   VertexId source)
      : graph_(graph), search_(graph, detail::combined_costs(graph, spec, w), source) {}

  [[nodiscard]] bool reached(VertexId v) const { return search_.reached(v); }
  [[nodiscard]] double cost(VertexId v) const { return search_.distance(v); }
  [[nodiscard]] std::vector<EdgeId> edges_to(VertexId v) const { return search_.path_to(v); }
  [[nodiscard]] double duration_to(VertexId v) const {
    return path_duration(graph_, search_.path_to(v));
  }

private:
  const Multigraph& graph_;
  detail::LabelSearch search_;
};

/// The graph, constraint specification and tasks a session learns over.
struct RoutingProblem {
  Multigraph graph;
  Specification spec;
  std::vector<Task> tasks;
};

}  // namespace specrev

#endif  // SPECREV_GRAPH_HPP
