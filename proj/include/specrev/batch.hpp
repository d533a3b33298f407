#ifndef SPECREV_BATCH_HPP
#define SPECREV_BATCH_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <variant>
#include <vector>

#include "specrev/learning.hpp"
#include "specrev/user_model.hpp"

namespace specrev {

struct BatchConfig {
  LearningConfig learning;
  std::vector<std::uint64_t> seeds;  // one simulated user and session seed each
  TieRule ties = TieRule::prefer_current;
  MetricOptions metrics;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct SessionOutcome {
  std::uint64_t seed{};
  WeightVector w_star;
  FinalReport report;
  std::size_t queries{};
  double max_row_violation{};  // worst a.w* - b over all rows, checked after every choice
  bool true_cost_monotone{true};
  std::vector<std::vector<double>> true_cost_trace;  // per instance, C_w*(P_best) after each iteration
};

/// One full simulated session. Soundness data is collected along the way.
inline SessionOutcome run_simulated_session(std::shared_ptr<const RoutingProblem> problem, LearningConfig config,
                                            const SimulatedUser& user, MetricOptions metrics = {}) {
  SessionOutcome out;
  out.w_star = user.w_star;
  SessionState state(std::move(problem), config);
  const auto& instances = state.instances();
  out.true_cost_trace.resize(instances.size());
  auto snapshot = [&] {
    for (std::size_t i = 0; i < instances.size(); ++i) {
      const double c = path_cost(instances[i].best_path, user.w_star);
      auto& trace = out.true_cost_trace[i];
      if (!trace.empty() && c > trace.back() + kCostTieTolerance * std::max(1.0, std::abs(trace.back()))) {
        out.true_cost_monotone = false;
      }
      trace.push_back(c);
    }
  };
  snapshot();
  while (true) {
    auto next = state.next_query();
    if (std::holds_alternative<SessionStatus>(next)) break;
    const auto& q = std::get<Query>(next);
    state.record_choice(q.id, simulate_choice(user, q));
    ++out.queries;
    for (const auto& row : state.space().rows()) {
      double dot = 0.0;
      for (std::size_t k = 0; k < row.normal.size(); ++k) dot += row.normal[k] * user.w_star[k];
      out.max_row_violation = std::max(out.max_row_violation, dot - row.offset);
    }
    snapshot();
  }
  out.report = finalize(state, metrics);
  return out;
}

struct Summary {
  double mean{};
  double median{};
  double min{};
  double max{};
};

inline Summary summarize(std::vector<double> xs) {
  if (xs.empty()) return {};
  std::sort(xs.begin(), xs.end());
  Summary s;
  double sum = 0.0;
  for (double x : xs) sum += x;  // ascending order keeps the sum reproducible
  s.mean = sum / static_cast<double>(xs.size());
  const auto n = xs.size();
  s.median = n % 2 ? xs[n / 2] : (xs[n / 2 - 1] + xs[n / 2]) / 2.0;
  s.min = xs.front();
  s.max = xs.back();
  return s;
}

struct BatchReport {
  std::vector<SessionOutcome> sessions;  // in seed order
  Summary initial_task_time_ratio, final_task_time_ratio;
  Summary initial_entropy_ratio, final_entropy_ratio;
  Summary initial_global_time_ratio, final_global_time_ratio;
  Summary acceptance_all, acceptance_tasks;
  Summary queries;
};

struct ContradictionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Runs one session per seed (in parallel) and aggregates in seed order.
/// A contradiction under a deterministic user is a hard failure.
inline BatchReport run_batch(std::shared_ptr<const RoutingProblem> problem, const BatchConfig& config) {
  BatchReport r;
  r.sessions.resize(config.seeds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      try {
        const auto seed = config.seeds[i];
        auto user = random_user(problem->spec, seed);
        user.ties = config.ties;
        auto learning = config.learning;
        learning.seed = seed;
        r.sessions[i] = run_simulated_session(problem, learning, user, config.metrics);
        r.sessions[i].seed = seed;
        if (r.sessions[i].report.contradictory) {
          throw ContradictionError("session with seed " + std::to_string(seed) + " reached contradictory feedback");
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, config.seeds.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<double> it, ft, ie, fe, ig, fg, aa, at, q;
  for (const auto& s : r.sessions) {
    it.push_back(s.report.initial_metrics.task_time_ratio);
    ft.push_back(s.report.final_metrics.task_time_ratio);
    if (s.report.initial_metrics.entropy_ratio) ie.push_back(*s.report.initial_metrics.entropy_ratio);
    if (s.report.final_metrics.entropy_ratio) fe.push_back(*s.report.final_metrics.entropy_ratio);
    if (s.report.initial_metrics.global_time_ratio) ig.push_back(*s.report.initial_metrics.global_time_ratio);
    if (s.report.final_metrics.global_time_ratio) fg.push_back(*s.report.final_metrics.global_time_ratio);
    if (s.report.acceptance) {
      aa.push_back(s.report.acceptance->all);
      at.push_back(s.report.acceptance->tasks);
    }
    q.push_back(static_cast<double>(s.queries));
  }
  r.initial_task_time_ratio = summarize(it);
  r.final_task_time_ratio = summarize(ft);
  r.initial_entropy_ratio = summarize(ie);
  r.final_entropy_ratio = summarize(fe);
  r.initial_global_time_ratio = summarize(ig);
  r.final_global_time_ratio = summarize(fg);
  r.acceptance_all = summarize(aa);
  r.acceptance_tasks = summarize(at);
  r.queries = summarize(q);
  return r;
}

}  // namespace specrev

#endif  // SPECREV_BATCH_HPP
