#ifndef SPECREV_METRICS_HPP
#define SPECREV_METRICS_HPP

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "specrev/graph.hpp"

namespace specrev {

struct MetricError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Move probabilities out of v: p(v, j) proportional to 1 / c_min(v, j), where
/// c_min is the cheapest combined cost t(e) + w(e) over parallel edges v -> j.
/// Returned in ascending neighbor order.
inline std::vector<std::pair<VertexId, double>> transition_probabilities(
    const Multigraph& graph, const Specification& spec, std::span<const double> w, VertexId v) {
  check_dimension(spec, w);
  std::map<VertexId, double> cmin;
  for (auto id : graph.out_edges(v)) {
    const auto& e = graph.edge(id);
    const double c = combined_edge_cost(e, spec, w);
    auto [it, inserted] = cmin.emplace(e.head, c);
    if (!inserted) it->second = std::min(it->second, c);
  }
  double norm = 0.0;
  for (const auto& [j, c] : cmin) {
    if (!(c > 0.0)) {
      throw MetricError("nonpositive combined cost from " + graph.label(v) + " to " + graph.label(j));
    }
    norm += 1.0 / c;
  }
  std::vector<std::pair<VertexId, double>> p;
  for (const auto& [j, c] : cmin) p.emplace_back(j, (1.0 / c) / norm);
  return p;
}

/// H(v) = -sum p log2 p, in bits.
inline double vertex_entropy(const Multigraph& graph, const Specification& spec,
                             std::span<const double> w, VertexId v) {
  double h = 0.0;
  for (const auto& [j, p] : transition_probabilities(graph, spec, w, v)) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

inline double graph_entropy(const Multigraph& graph, const Specification& spec, std::span<const double> w) {
  double h = 0.0;
  for (VertexId v = 0; v < graph.vertex_count(); ++v) h += vertex_entropy(graph, spec, w, v);
  return h;
}

/// Constrained over unconstrained graph entropy; nullopt when the
/// unconstrained entropy is zero (e.g. a single vertex).
inline std::optional<double> entropy_ratio(const Multigraph& graph, const Specification& spec,
                                           std::span<const double> w) {
  const WeightVector zero(spec.dimension(), 0.0);
  const double base = graph_entropy(graph, spec, zero);
  if (base == 0.0) return std::nullopt;
  return graph_entropy(graph, spec, w) / base;
}

/// Mean duration of the combined-cost optimal paths over the pairs divided by
/// the mean duration of the time-only optimal paths.
inline double time_ratio(const Multigraph& graph, const Specification& spec, std::span<const double> w,
                         std::span<const std::pair<VertexId, VertexId>> pairs) {
  if (pairs.empty()) throw std::invalid_argument("time ratio needs at least one pair");
  const WeightVector zero(spec.dimension(), 0.0);
  double constrained = 0.0;
  double base = 0.0;
  for (const auto& [s, g] : pairs) {
    const Task task{s, g, {}};
    constrained += shortest_path(graph, spec, w, task).duration;
    base += shortest_path(graph, spec, zero, task).duration;
  }
  return constrained / base;
}

inline double task_time_ratio(const Multigraph& graph, const Specification& spec, std::span<const double> w,
                              std::span<const Task> tasks) {
  std::vector<std::pair<VertexId, VertexId>> pairs;
  for (const auto& t : tasks) pairs.emplace_back(t.start, t.goal);
  return time_ratio(graph, spec, w, pairs);
}

/// Time ratio over every ordered vertex pair with s != g, one search tree per source.
inline double global_time_ratio(const Multigraph& graph, const Specification& spec, std::span<const double> w) {
  const WeightVector zero(spec.dimension(), 0.0);
  double constrained = 0.0;
  double base = 0.0;
  std::size_t pairs = 0;
  for (VertexId s = 0; s < graph.vertex_count(); ++s) {
    const ShortestPathTree weighted(graph, spec, w, s);
    const ShortestPathTree fastest(graph, spec, zero, s);
    for (VertexId g = 0; g < graph.vertex_count(); ++g) {
      if (g == s) continue;
      if (!weighted.reached(g)) throw PlanningError("global time ratio needs a strongly connected graph");
      constrained += weighted.duration_to(g);
      base += fastest.duration_to(g);
      ++pairs;
    }
  }
  if (pairs == 0) throw std::invalid_argument("time ratio needs at least one pair");
  return constrained / base;
}

struct AcceptanceRates {
  double all{};    // accepted alternatives / queries
  double tasks{};  // tasks with an acceptance / tasks presented
};

struct AnsweredQuery {
  std::size_t task{};
  bool accepted_alternative{};
};

inline std::optional<AcceptanceRates> acceptance_rates(std::span<const AnsweredQuery> answers) {
  if (answers.empty()) return std::nullopt;
  std::set<std::size_t> presented;
  std::set<std::size_t> accepted;
  std::size_t count = 0;
  for (const auto& a : answers) {
    presented.insert(a.task);
    if (a.accepted_alternative) {
      accepted.insert(a.task);
      ++count;
    }
  }
  return AcceptanceRates{static_cast<double>(count) / static_cast<double>(answers.size()),
                         static_cast<double>(accepted.size()) / static_cast<double>(presented.size())};
}

struct MetricReport {
  std::optional<double> entropy_ratio;
  std::optional<double> global_time_ratio;
  double task_time_ratio{1.0};
  std::vector<double> vertex_entropies;
};

struct MetricOptions {
  bool global_time_ratio = true;  // skipped when the graph is not strongly connected
  bool vertex_entropies = false;
};

inline MetricReport evaluate_metrics(const Multigraph& graph, const Specification& spec,
                                     std::span<const double> w, std::span<const Task> tasks,
                                     MetricOptions options = {}) {
  MetricReport r;
  r.entropy_ratio = entropy_ratio(graph, spec, w);
  if (!tasks.empty()) r.task_time_ratio = task_time_ratio(graph, spec, w, tasks);
  if (options.global_time_ratio && graph.vertex_count() > 1 && graph.is_strongly_connected()) {
    r.global_time_ratio = global_time_ratio(graph, spec, w);
  }
  if (options.vertex_entropies) {
    for (VertexId v = 0; v < graph.vertex_count(); ++v) r.vertex_entropies.push_back(vertex_entropy(graph, spec, w, v));
  }
  return r;
}

}  // namespace specrev

#endif  // SPECREV_METRICS_HPP
