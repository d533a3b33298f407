#ifndef SPECREV_LEARNING_HPP
#define SPECREV_LEARNING_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "specrev/graph.hpp"
#include "specrev/metrics.hpp"
#include "specrev/polytope.hpp"

namespace specrev {

enum class SearchPolicy { min_vertex, vertex_search };

inline const char* to_string(SearchPolicy p) noexcept {
  return p == SearchPolicy::min_vertex ? "minvertex" : "vertexsearch";
}

inline SearchPolicy parse_policy(const std::string& s) {
  if (s == "minvertex") return SearchPolicy::min_vertex;
  if (s == "vertexsearch") return SearchPolicy::vertex_search;
  throw std::invalid_argument("unknown policy " + s + " (expected minvertex or vertexsearch)");
}

struct LearningConfig {
  std::size_t budget = 20;
  std::size_t subset_size = 5;
  SearchPolicy policy = SearchPolicy::min_vertex;
  std::uint64_t seed = 0;
  std::size_t max_expansions = 500;
};

/// Raised when the feasible space is empty where a nonempty one is required.
struct InfeasibleSpace : std::runtime_error {
  InfeasibleSpace() : std::runtime_error("feasible weight space is empty (contradictory feedback)") {}
};

/// Optimal paths per weight for one task, memoized, with the equivalence test.
class EquivalenceOracle {
public:
  EquivalenceOracle(const Multigraph& graph, const Specification& spec, Task task)
      : graph_(graph), spec_(spec), task_(std::move(task)) {}

  const Path& path(const WeightVector& w) {
    auto it = cache_.find(w);
    if (it == cache_.end()) it = cache_.emplace(w, shortest_path(graph_, spec_, w, task_)).first;
    return it->second;
  }

  /// Same decision as weights_equivalent().
  bool equivalent(const WeightVector& a, const WeightVector& b) {
    const Path pa = path(a);
    const Path& pb = path(b);
    auto close = [](double x, double y) {
      return std::abs(x - y) <= kEquivalenceTolerance * std::max(1.0, std::abs(x));
    };
    return close(path_cost(pb, a), path_cost(pa, a)) && close(path_cost(pa, b), path_cost(pb, b));
  }

  bool equivalent_to_any(const WeightVector& w, const std::vector<WeightVector>& set) {
    return std::any_of(set.begin(), set.end(), [&](const auto& s) { return equivalent(w, s); });
  }

  [[nodiscard]] const Task& task() const noexcept { return task_; }

  /// Drops memoized paths once there are more than `limit`.
  void trim(std::size_t limit = 50000) {
    if (cache_.size() > limit) cache_.clear();
  }

private:
  const Multigraph& graph_;
  const Specification& spec_;
  Task task_;
  std::map<WeightVector, Path> cache_;
};

/// A vertex of the space near w: w itself when it is a vertex; otherwise the
/// min-sum vertex with the coordinates sitting on a box bound held fixed; and
/// failing that the plain min-sum vertex.
inline PolytopeVertex project_to_vertex(const FeasibleSpace& space, const WeightVector& w) {
  if (auto v = vertex_at(space, w)) return *v;
  const std::vector<double> ones(space.dimension(), 1.0);
  if (space.contains(w)) {
    auto lower = space.lower();
    auto upper = space.upper();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double tol = kFeasibilityTolerance * std::max(1.0, std::abs(w[k]));
      if (std::abs(w[k] - space.lower()[k]) <= tol) upper[k] = lower[k];
      else if (std::abs(w[k] - space.upper()[k]) <= tol) lower[k] = upper[k];
    }
    if (auto pinned = solve_lp(space.with_bounds(lower, upper), ones)) {
      if (auto v = vertex_at(space, pinned->w)) return *v;
    }
  }
  auto v = solve_lp(space, ones);
  if (!v) throw InfeasibleSpace();
  return *v;
}

/// Depth-first walk over polytope vertices from the vertex nearest `best`,
/// collecting up to k vertices not equivalent to any weight in `presented`
/// or already collected. At most `max_expansions` vertices are popped.
inline std::vector<WeightVector> vertex_search(const FeasibleSpace& space, std::size_t k,
                                               const std::vector<WeightVector>& presented,
                                               const WeightVector& best, EquivalenceOracle& oracle,
                                               std::size_t max_expansions = 500) {
  std::vector<WeightVector> found;
  if (k == 0) return found;
  std::vector<PolytopeVertex> open{project_to_vertex(space, best)};
  PointSet seen;  // every point ever pushed
  seen.insert(open.front().w);
  for (std::size_t i = 0; i < max_expansions; ++i) {
    if (open.empty()) return found;
    const auto v = std::move(open.back());
    open.pop_back();
    if (!oracle.equivalent_to_any(v.w, presented) && !oracle.equivalent_to_any(v.w, found)) {
      found.push_back(v.w);
      if (found.size() == k) return found;
    }
    for (auto& n : adjacent_vertices(space, v)) {
      if (seen.insert(n.w)) open.push_back(std::move(n));
    }
  }
  return found;
}

/// Greedy variant: the min-sum vertex first, then the min-sum vertex with the
/// sign flipped on each constraint used by the min-sum vertex's path, then a
/// depth-first vertex search for whatever remains.
inline std::vector<WeightVector> min_vertex_search(const FeasibleSpace& space, std::size_t k,
                                                   const std::vector<WeightVector>& presented,
                                                   const WeightVector& best, EquivalenceOracle& oracle,
                                                   std::size_t max_expansions = 500) {
  std::vector<WeightVector> found;
  if (k == 0) return found;
  const auto d = space.dimension();
  const std::vector<double> ones(d, 1.0);
  const auto min_sum = solve_lp(space, ones);
  if (!min_sum) throw InfeasibleSpace();
  if (!oracle.equivalent_to_any(min_sum->w, presented)) {
    found.push_back(min_sum->w);
    if (found.size() == k) return found;
  }
  const auto features = oracle.path(min_sum->w).features;
  for (std::size_t i = 0; i < d; ++i) {
    if (features[i] <= 0) continue;
    auto c = ones;
    c[i] = -1.0;
    const auto flipped = solve_lp(space, c);
    if (!flipped) throw InfeasibleSpace();
    if (!oracle.equivalent_to_any(flipped->w, presented) && !oracle.equivalent_to_any(flipped->w, found)) {
      found.push_back(flipped->w);
      if (found.size() == k) return found;
    }
  }
  auto known = presented;
  known.insert(known.end(), found.begin(), found.end());
  auto rest = vertex_search(space, k - found.size(), known, best, oracle, max_expansions);
  found.insert(found.end(), rest.begin(), rest.end());
  return found;
}

struct LearningInstance {
  Task task;
  WeightVector best_weight;
  Path best_path;
  std::vector<WeightVector> presented;  // W_i
};

struct Candidate {
  WeightVector weight;
  Path path;
  double saving{};  // t(P_best) - t(candidate path)
};

struct TaskChoice {
  std::optional<std::size_t> selected;           // instance index
  std::vector<std::size_t> subset;               // evaluated instances, ascending
  std::vector<std::optional<Candidate>> candidates;  // per subset entry
};

/// Draws min(size, n) distinct indices (partial Fisher-Yates on the raw engine
/// output), returned ascending. Every draw is appended to `draws`.
inline std::vector<std::size_t> sample_subset(std::size_t n, std::size_t size, std::mt19937_64& rng,
                                              std::vector<std::uint64_t>* draws = nullptr) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (size >= n) return idx;
  for (std::size_t i = 0; i < size; ++i) {
    const auto r = rng();
    if (draws) draws->push_back(r);
    const auto j = i + static_cast<std::size_t>(r % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(size);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// One candidate alternative for an instance under the configured policy.
/// `cache` may carry optimal paths over from earlier calls for the same task.
inline std::optional<Candidate> evaluate_instance(const RoutingProblem& problem, const FeasibleSpace& space,
                                                  const LearningInstance& inst, const LearningConfig& config,
                                                  EquivalenceOracle* cache = nullptr) {
  std::optional<EquivalenceOracle> local;
  if (!cache) local.emplace(problem.graph, problem.spec, inst.task);
  EquivalenceOracle& oracle = cache ? *cache : *local;
  oracle.trim();
  const auto weights = config.policy == SearchPolicy::min_vertex
                           ? min_vertex_search(space, 1, inst.presented, inst.best_weight, oracle,
                                               config.max_expansions)
                           : vertex_search(space, 1, inst.presented, inst.best_weight, oracle,
                                           config.max_expansions);
  if (weights.empty()) return std::nullopt;
  Candidate c{weights.front(), oracle.path(weights.front()), 0.0};
  c.saving = inst.best_path.duration - c.path.duration;
  return c;
}

/// Task selection over the given instance indices: the instance whose
/// tentative alternative saves the most time; first index wins ties;
/// instances without a new weight are skipped.
inline TaskChoice choose_task_among(const RoutingProblem& problem, const FeasibleSpace& space,
                                    const std::vector<LearningInstance>& instances,
                                    std::vector<std::size_t> subset, const LearningConfig& config,
                                    std::vector<EquivalenceOracle>* caches = nullptr) {
  TaskChoice choice;
  choice.subset = std::move(subset);
  double best_saving = -std::numeric_limits<double>::infinity();
  for (auto i : choice.subset) {
    auto c = evaluate_instance(problem, space, instances.at(i), config, caches ? &caches->at(i) : nullptr);
    if (c && c->saving > best_saving) {
      best_saving = c->saving;
      choice.selected = i;
    }
    choice.candidates.push_back(std::move(c));
  }
  return choice;
}

inline TaskChoice choose_task(const RoutingProblem& problem, const FeasibleSpace& space,
                              const std::vector<LearningInstance>& instances, std::size_t subset_size,
                              std::mt19937_64& rng, const LearningConfig& config,
                              std::vector<std::uint64_t>* draws = nullptr,
                              std::vector<EquivalenceOracle>* caches = nullptr) {
  if (instances.empty()) throw std::invalid_argument("no learning instances");
  return choose_task_among(problem, space, instances, sample_subset(instances.size(), subset_size, rng, draws),
                           config, caches);
}

enum class Choice { current, alternative };

inline const char* to_string(Choice c) noexcept { return c == Choice::current ? "current" : "alternative"; }

inline Choice parse_choice(const std::string& s) {
  if (s == "current") return Choice::current;
  if (s == "alternative") return Choice::alternative;
  throw std::invalid_argument("choice must be current or alternative");
}

struct Query {
  std::uint64_t id{};
  std::size_t instance{};
  Path current;
  Path alternative;
  WeightVector weight;  // generating weight of the alternative
  std::vector<std::uint64_t> rng_draws;
};

/// Penalty constraints a path uses.
inline std::vector<std::size_t> violated_penalties(const Specification& spec, const Path& path) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < spec.dimension(); ++k) {
    if (spec.constraint(k).kind == ConstraintKind::penalty && path.features[k] > 0) out.push_back(k);
  }
  return out;
}

enum class SessionStatus { active, converged, budget_exhausted, contradictory };

inline const char* to_string(SessionStatus s) noexcept {
  switch (s) {
    case SessionStatus::active: return "active";
    case SessionStatus::converged: return "converged";
    case SessionStatus::budget_exhausted: return "budget_exhausted";
    case SessionStatus::contradictory: return "contradictory";
  }
  return "?";
}

struct ChoiceRecord {
  std::uint64_t query_id{};
  std::size_t instance{};
  Choice choice{};
  std::optional<HalfSpace> row;
  std::size_t iteration{};  // iteration the choice answered (0-based)
};

struct StaleQuery : std::logic_error {
  using std::logic_error::logic_error;
};

/// Session state for the interactive loop: shared feasible space, one learning
/// instance per task, the outstanding query and the choice log. The state
/// machine is strictly sequential: next_query issues, record_choice answers.
class SessionState {
public:
  SessionState(std::shared_ptr<const RoutingProblem> problem, LearningConfig config)
      : problem_(std::move(problem)), config_(config), rng_(config.seed) {
    const auto& p = *problem_;
    const auto report = validate_specification(p.graph, p.spec);
    if (!report.valid()) {
      throw std::invalid_argument("specification admits nonpositive edge costs on " +
                                  std::to_string(report.offending_edges.size()) + " edges");
    }
    space_ = init_feasible_space(p.spec);
    for (const auto& task : p.tasks) {
      if (task.start == task.goal) throw std::invalid_argument("task " + task.label + " has start == goal");
      auto w0 = initial_weight();
      LearningInstance inst{task, w0, shortest_path(p.graph, p.spec, w0, task), {w0}};
      instances_.push_back(std::move(inst));
      caches_.emplace_back(p.graph, p.spec, task);
    }
  }

  /// w0: upper bound for penalties, lower bound for rewards.
  [[nodiscard]] WeightVector initial_weight() const {
    WeightVector w;
    for (const auto& c : problem_->spec.constraints()) {
      w.push_back(c.kind == ConstraintKind::penalty ? c.upper : c.lower);
    }
    return w;
  }

  [[nodiscard]] const RoutingProblem& problem() const noexcept { return *problem_; }
  [[nodiscard]] std::shared_ptr<const RoutingProblem> problem_ptr() const noexcept { return problem_; }
  [[nodiscard]] const LearningConfig& config() const noexcept { return config_; }
  [[nodiscard]] const FeasibleSpace& space() const noexcept { return space_; }
  [[nodiscard]] const std::vector<LearningInstance>& instances() const noexcept { return instances_; }
  [[nodiscard]] std::size_t iteration() const noexcept { return iteration_; }
  [[nodiscard]] const std::vector<ChoiceRecord>& choices() const noexcept { return choices_; }
  [[nodiscard]] const std::vector<Query>& issued() const noexcept { return issued_; }
  [[nodiscard]] const std::optional<Query>& outstanding() const noexcept { return outstanding_; }
  [[nodiscard]] bool contradictory() const noexcept { return consistent_rows_.has_value(); }
  [[nodiscard]] bool converged() const noexcept { return converged_; }

  /// The last consistent space (all rows when no contradiction occurred).
  [[nodiscard]] FeasibleSpace consistent_space() const {
    return consistent_rows_ ? space_.prefix(*consistent_rows_) : space_;
  }

  [[nodiscard]] SessionStatus status() const noexcept {
    if (contradictory()) return SessionStatus::contradictory;
    if (converged_) return SessionStatus::converged;
    if (iteration_ >= config_.budget) return SessionStatus::budget_exhausted;
    return SessionStatus::active;
  }

  /// The outstanding query, a freshly chosen one, or the terminal status.
  std::variant<Query, SessionStatus> next_query() {
    if (outstanding_) return *outstanding_;
    if (const auto s = status(); s != SessionStatus::active) return s;
    std::vector<std::uint64_t> draws;
    auto choice = choose_task(*problem_, space_, instances_, config_.subset_size, rng_, config_, &draws, &caches_);
    if (!choice.selected && choice.subset.size() < instances_.size()) {
      std::vector<std::size_t> all(instances_.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      choice = choose_task_among(*problem_, space_, instances_, std::move(all), config_, &caches_);
    }
    if (!choice.selected) {
      converged_ = true;
      return SessionStatus::converged;
    }
    const auto pos = static_cast<std::size_t>(
        std::find(choice.subset.begin(), choice.subset.end(), *choice.selected) - choice.subset.begin());
    auto& candidate = *choice.candidates[pos];
    Query q;
    q.id = next_query_id_++;
    q.instance = *choice.selected;
    q.current = instances_[q.instance].best_path;
    q.alternative = std::move(candidate.path);
    q.weight = std::move(candidate.weight);
    q.rng_draws = std::move(draws);
    outstanding_ = q;
    issued_.push_back(q);
    return q;
  }

  /// Applies the user's answer to the outstanding query.
  const ChoiceRecord& record_choice(std::uint64_t query_id, Choice choice) {
    if (!outstanding_ || outstanding_->id != query_id) {
      throw StaleQuery("query " + std::to_string(query_id) + " is not outstanding");
    }
    const Query q = std::move(*outstanding_);
    outstanding_.reset();
    const bool alt = choice == Choice::alternative;
    const Path& chosen = alt ? q.alternative : q.current;
    const Path& rejected = alt ? q.current : q.alternative;

    ChoiceRecord rec{q.id, q.instance, choice, std::nullopt, iteration_};
    if (chosen.edges != rejected.edges) rec.row = preference_row(chosen, rejected);
    if (rec.row) {
      const auto before = space_.rows().size();
      space_ = space_.with_row(*rec.row);
      if (!consistent_rows_ && !solve_lp(space_, std::vector<double>(space_.dimension(), 1.0))) {
        consistent_rows_ = before;
      }
    }
    auto& inst = instances_[q.instance];
    inst.presented.push_back(q.weight);
    if (alt) {
      inst.best_weight = q.weight;
      inst.best_path = q.alternative;
    }
    ++iteration_;
    choices_.push_back(std::move(rec));
    return choices_.back();
  }

  [[nodiscard]] std::vector<AnsweredQuery> answers() const {
    std::vector<AnsweredQuery> out;
    for (const auto& c : choices_) out.push_back({c.instance, c.choice == Choice::alternative});
    return out;
  }

private:
  std::shared_ptr<const RoutingProblem> problem_;
  LearningConfig config_;
  std::mt19937_64 rng_;
  FeasibleSpace space_;
  std::vector<LearningInstance> instances_;
  std::vector<EquivalenceOracle> caches_;  // per instance, kept across queries
  std::size_t iteration_ = 0;
  std::uint64_t next_query_id_ = 1;
  std::optional<Query> outstanding_;
  std::vector<Query> issued_;
  std::vector<ChoiceRecord> choices_;
  std::optional<std::size_t> consistent_rows_;
  bool converged_ = false;
};

struct FinalReport {
  WeightVector initial_weight;
  WeightVector final_weight;
  std::vector<Path> initial_paths;
  std::vector<Path> final_paths;
  MetricReport initial_metrics;
  MetricReport final_metrics;
  std::optional<AcceptanceRates> acceptance;
  bool contradictory{};
  std::size_t iterations{};
  SessionStatus status{};
};

/// w_final = argmax of the coordinate sum over the (last consistent) space,
/// final paths optimal for w_final, and metrics for both stages. w_final is a
/// vertex, often on a learned row where the accepted and rejected paths cost
/// the same; such ties keep the accepted path.
inline FinalReport finalize(const SessionState& state, MetricOptions options = {}) {
  const auto& p = state.problem();
  FinalReport r;
  r.contradictory = state.contradictory();
  r.iterations = state.iteration();
  r.status = state.status();
  r.initial_weight = state.initial_weight();
  const auto w = max_sum_vertex(state.consistent_space());
  if (!w) throw InfeasibleSpace();
  r.final_weight = *w;
  const auto& instances = state.instances();
  for (std::size_t i = 0; i < p.tasks.size(); ++i) {
    const auto& t = p.tasks[i];
    r.initial_paths.push_back(shortest_path(p.graph, p.spec, r.initial_weight, t));
    auto best = shortest_path(p.graph, p.spec, r.final_weight, t);
    const auto& accepted = instances[i].best_path;
    const double c = path_cost(best, r.final_weight);
    if (std::abs(path_cost(accepted, r.final_weight) - c) <= kCostTieTolerance * std::max(1.0, std::abs(c))) {
      best = accepted;
    }
    r.final_paths.push_back(std::move(best));
  }
  r.initial_metrics = evaluate_metrics(p.graph, p.spec, r.initial_weight, p.tasks, options);
  r.final_metrics = evaluate_metrics(p.graph, p.spec, r.final_weight, p.tasks, options);
  const auto answers = state.answers();
  r.acceptance = acceptance_rates(answers);
  return r;
}

}  // namespace specrev

#endif  // SPECREV_LEARNING_HPP
