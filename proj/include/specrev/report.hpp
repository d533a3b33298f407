#ifndef SPECREV_REPORT_HPP
#define SPECREV_REPORT_HPP

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "specrev/batch.hpp"
#include "specrev/document.hpp"
#include "specrev/learning.hpp"

namespace specrev {

using nlohmann::json;

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

inline json metric_report_to_json(const MetricReport& m) {
  json j = {{"entropy_ratio", optional_json(m.entropy_ratio)},
            {"global_time_ratio", optional_json(m.global_time_ratio)},
            {"task_time_ratio", m.task_time_ratio}};
  if (!m.vertex_entropies.empty()) j["vertex_entropies"] = m.vertex_entropies;
  return j;
}

inline json acceptance_to_json(const std::optional<AcceptanceRates>& a) {
  if (!a) return nullptr;
  return {{"all", a->all}, {"tasks", a->tasks}};
}

/// Path as clients see it: edges, vertex labels, grid cells when the session
/// has a map, duration and the penalty constraints it violates.
inline json path_payload(const Path& p, const RoutingProblem& problem, const World* world) {
  json labels = json::array();
  json cells = json::array();
  std::vector<VertexId> vertices;
  if (!p.edges.empty()) vertices.push_back(problem.graph.edge(p.edges.front()).tail);
  for (auto e : p.edges) vertices.push_back(problem.graph.edge(e).head);
  for (auto v : vertices) {
    labels.push_back(problem.graph.label(v));
    if (world) cells.push_back({world->grid.cells[v].row, world->grid.cells[v].col});
  }
  json violations = json::array();
  for (auto k : violated_penalties(problem.spec, p)) violations.push_back(problem.spec.constraint(k).id);
  json j = {{"edges", p.edges}, {"vertices", labels}, {"duration", p.duration}, {"violations", violations}};
  if (world) j["cells"] = cells;
  return j;
}

inline json task_payload(const Task& t, const RoutingProblem& problem) {
  return {{"name", t.label}, {"start", problem.graph.label(t.start)}, {"goal", problem.graph.label(t.goal)}};
}

inline json final_report_to_json(const FinalReport& r, const RoutingProblem& problem, const World* world) {
  json ids = json::array();
  for (const auto& c : problem.spec.constraints()) ids.push_back(c.id);
  json tasks = json::array();
  for (std::size_t i = 0; i < problem.tasks.size(); ++i) {
    tasks.push_back({{"task", task_payload(problem.tasks[i], problem)},
                     {"initial_path", path_payload(r.initial_paths[i], problem, world)},
                     {"final_path", path_payload(r.final_paths[i], problem, world)}});
  }
  return {{"status", to_string(r.status)},
          {"contradictory", r.contradictory},
          {"iterations", r.iterations},
          {"constraints", ids},
          {"w_initial", r.initial_weight},
          {"w_final", r.final_weight},
          {"tasks", tasks},
          {"metrics", {{"initial", metric_report_to_json(r.initial_metrics)},
                       {"final", metric_report_to_json(r.final_metrics)}}},
          {"acceptance", acceptance_to_json(r.acceptance)}};
}

inline json summary_to_json(const Summary& s) {
  return {{"mean", s.mean}, {"median", s.median}, {"min", s.min}, {"max", s.max}};
}

inline json batch_report_to_json(const BatchReport& r) {
  json sessions = json::array();
  for (const auto& s : r.sessions) {
    sessions.push_back({{"seed", s.seed},
                        {"w_star", s.w_star},
                        {"w_final", s.report.final_weight},
                        {"queries", s.queries},
                        {"status", to_string(s.report.status)},
                        {"max_row_violation", s.max_row_violation},
                        {"true_cost_monotone", s.true_cost_monotone},
                        {"initial", metric_report_to_json(s.report.initial_metrics)},
                        {"final", metric_report_to_json(s.report.final_metrics)},
                        {"acceptance", acceptance_to_json(s.report.acceptance)}});
  }
  return {{"sessions", sessions},
          {"aggregate",
           {{"initial_task_time_ratio", summary_to_json(r.initial_task_time_ratio)},
            {"final_task_time_ratio", summary_to_json(r.final_task_time_ratio)},
            {"initial_entropy_ratio", summary_to_json(r.initial_entropy_ratio)},
            {"final_entropy_ratio", summary_to_json(r.final_entropy_ratio)},
            {"initial_global_time_ratio", summary_to_json(r.initial_global_time_ratio)},
            {"final_global_time_ratio", summary_to_json(r.final_global_time_ratio)},
            {"acceptance_all", summary_to_json(r.acceptance_all)},
            {"acceptance_tasks", summary_to_json(r.acceptance_tasks)},
            {"queries", summary_to_json(r.queries)}}}};
}

}  // namespace specrev

#endif  // SPECREV_REPORT_HPP
