#ifndef SPECREV_SESSION_HPP
#define SPECREV_SESSION_HPP

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "specrev/document.hpp"
#include "specrev/learning.hpp"
#include "specrev/user_model.hpp"

namespace specrev {

using nlohmann::json;

// ---- wire forms -----------------------------------------------------------

inline json config_to_json(const LearningConfig& c) {
  return {{"budget", c.budget}, {"subset", c.subset_size}, {"policy", to_string(c.policy)},
          {"seed", c.seed}, {"max_expansions", c.max_expansions}};
}

inline LearningConfig config_from_json(const json& j) {
  LearningConfig c;
  if (!j.is_object()) throw SchemaError("/config", "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    const auto at = "/config/" + k;
    if (k == "policy") {
      if (!it->is_string()) throw SchemaError(at, "expected a string");
      try {
        c.policy = parse_policy(it->get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw SchemaError(at, e.what());
      }
      continue;
    }
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) throw SchemaError(at, "expected a nonnegative integer");
    if (k == "budget") c.budget = it->get<std::size_t>();
    else if (k == "subset") c.subset_size = it->get<std::size_t>();
    else if (k == "seed") c.seed = it->get<std::uint64_t>();
    else if (k == "max_expansions") c.max_expansions = it->get<std::size_t>();
    else throw SchemaError(at, "unknown field");
  }
  if (c.subset_size == 0) throw SchemaError("/config/subset", "must be positive");
  return c;
}

/// Raw problem form, for sessions not built from an environment document.
inline json problem_to_json(const RoutingProblem& p) {
  json vertices = json::array();
  for (VertexId v = 0; v < p.graph.vertex_count(); ++v) vertices.push_back(p.graph.label(v));
  json edges = json::array();
  for (const auto& e : p.graph.edges()) edges.push_back({e.tail, e.head, e.time, e.tier});
  json constraints = json::array();
  for (const auto& c : p.spec.constraints()) {
    constraints.push_back({{"id", c.id}, {"kind", to_string(c.kind)}, {"edges", c.edges},
                           {"lower", c.lower}, {"upper", c.upper}});
  }
  json tasks = json::array();
  for (const auto& t : p.tasks) tasks.push_back({{"start", t.start}, {"goal", t.goal}, {"name", t.label}});
  return {{"vertices", vertices}, {"edges", edges}, {"constraints", constraints}, {"tasks", tasks}};
}

inline std::shared_ptr<const RoutingProblem> problem_from_json(const json& j) {
  RoutingProblem p;
  for (const auto& v : j.at("vertices")) p.graph.add_vertex(v.get<std::string>());
  for (const auto& e : j.at("edges")) {
    p.graph.add_edge(e.at(0).get<VertexId>(), e.at(1).get<VertexId>(), e.at(2).get<double>(),
                     e.at(3).get<std::uint32_t>());
  }
  std::vector<Constraint> constraints;
  for (const auto& c : j.at("constraints")) {
    const auto kind = c.at("kind").get<std::string>();
    if (kind != "penalty" && kind != "reward") throw std::invalid_argument("unknown constraint kind " + kind);
    constraints.push_back({c.at("id").get<std::string>(),
                           kind == "penalty" ? ConstraintKind::penalty : ConstraintKind::reward,
                           c.at("edges").get<std::vector<EdgeId>>(), c.at("lower").get<double>(),
                           c.at("upper").get<double>()});
  }
  p.spec = Specification(std::move(constraints), p.graph.edge_count());
  for (const auto& t : j.at("tasks")) {
    p.tasks.push_back({t.at("start").get<VertexId>(), t.at("goal").get<VertexId>(), t.at("name").get<std::string>()});
  }
  return std::make_shared<const RoutingProblem>(std::move(p));
}

/// Where a session's problem came from; documents keep the map for clients.
struct SessionSource {
  std::shared_ptr<const World> world;             // set for document sessions
  std::shared_ptr<const RoutingProblem> problem;  // always set

  static SessionSource from_world(std::shared_ptr<const World> w) {
    auto p = w->problem;
    return {std::move(w), std::move(p)};
  }
  static SessionSource from_problem(std::shared_ptr<const RoutingProblem> p) { return {nullptr, std::move(p)}; }

  [[nodiscard]] json to_json() const {
    if (world) return {{"environment", serialize_environment(world->document)}};
    return {{"problem", problem_to_json(*problem)}};
  }

  static SessionSource from_json(const json& j) {
    if (j.contains("environment")) return from_world(build_world(parse_environment(j.at("environment"))));
    return from_problem(problem_from_json(j.at("problem")));
  }
};

inline json path_to_json(const Path& p) { return {{"edges", p.edges}, {"duration", p.duration}}; }

inline json row_to_json(const std::optional<HalfSpace>& row) {
  if (!row) return nullptr;
  return {{"normal", row->normal}, {"offset", row->offset}};
}

inline std::string timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
  return std::to_string(ms);
}

// ---- logged session ---------------------------------------------------------

/// A SessionState that appends a JSON line for every decision it makes.
/// Timestamps are metadata; replay ignores them.
class Session {
public:
  Session(std::string id, SessionSource source, LearningConfig config, std::string log_path = {})
      : id_(std::move(id)), source_(std::move(source)), state_(source_.problem, config), log_path_(std::move(log_path)) {
    json created = {{"type", "session_created"}, {"session", id_}, {"time", timestamp_now()},
                    {"config", config_to_json(config)}};
    created.update(source_.to_json());
    append(std::move(created));
  }

  [[nodiscard]] const std::string& id() const noexcept { return id_; }
  [[nodiscard]] const SessionSource& source() const noexcept { return source_; }
  [[nodiscard]] const SessionState& state() const noexcept { return state_; }
  [[nodiscard]] const std::vector<json>& records() const noexcept { return records_; }

  std::variant<Query, SessionStatus> next_query() {
    const bool fresh = !state_.outstanding();
    auto next = state_.next_query();
    if (auto* q = std::get_if<Query>(&next); q && fresh) {
      append({{"type", "query_issued"}, {"time", timestamp_now()}, {"query", q->id}, {"instance", q->instance},
              {"weight", q->weight}, {"current", path_to_json(q->current)},
              {"alternative", path_to_json(q->alternative)}, {"rng_draws", q->rng_draws}});
    } else if (auto* s = std::get_if<SessionStatus>(&next); s && !terminal_logged_) {
      terminal_logged_ = true;
      append({{"type", "status"}, {"time", timestamp_now()}, {"status", to_string(*s)}});
    }
    return next;
  }

  const ChoiceRecord& record_choice(std::uint64_t query_id, Choice choice) {
    const auto& rec = state_.record_choice(query_id, choice);
    append({{"type", "choice"}, {"time", timestamp_now()}, {"query", rec.query_id}, {"choice", to_string(choice)},
            {"row", row_to_json(rec.row)}, {"iteration", rec.iteration}, {"contradictory", state_.contradictory()}});
    return rec;
  }

  FinalReport finalize(MetricOptions options = {}) {
    auto report = specrev::finalize(state_, options);
    append({{"type", "finalized"}, {"time", timestamp_now()}, {"w_final", report.final_weight}});
    return report;
  }

  /// Rebuilds a session from its log without writing, then resumes appending
  /// to `log_path`. Any logged decision that does not reproduce throws.
  static std::unique_ptr<Session> restore(const std::vector<json>& records, std::string log_path = {});

private:
  struct Restoring {};
  Session(Restoring, std::string id, SessionSource source, LearningConfig config)
      : id_(std::move(id)), source_(std::move(source)), state_(source_.problem, config) {}

  void append(json record) {
    if (!log_path_.empty()) {
      std::ofstream out(log_path_, std::ios::app);
      out << record.dump() << '\n';
      out.flush();
      if (!out) throw std::runtime_error("cannot append to session log " + log_path_);
    }
    records_.push_back(std::move(record));
  }

  std::string id_;
  SessionSource source_;
  SessionState state_;
  std::string log_path_;
  std::vector<json> records_;
  bool terminal_logged_ = false;
};

struct ReplayMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::vector<json> read_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open session log " + path);
  std::vector<json> records;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      records.push_back(json::parse(line));
    } catch (const json::parse_error&) {
      // A torn final line from a crash mid-write is dropped; anything earlier is corrupt.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw std::runtime_error("corrupt session log " + path + " at line " + std::to_string(n));
    }
  }
  return records;
}

namespace detail {

inline void expect_same(const json& logged, const json& replayed, const std::string& what) {
  if (logged != replayed) {
    throw ReplayMismatch(what + " differs: logged " + logged.dump() + ", replayed " + replayed.dump());
  }
}

}  // namespace detail

inline std::unique_ptr<Session> Session::restore(const std::vector<json>& records, std::string log_path) {
  if (records.empty() || records.front().value("type", "") != "session_created") {
    throw std::runtime_error("session log does not start with session_created");
  }
  const auto& head = records.front();
  std::unique_ptr<Session> s(new Session(Restoring{}, head.at("session").get<std::string>(),
                                         SessionSource::from_json(head), config_from_json(head.at("config"))));
  s->records_.push_back(head);
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto type = r.at("type").get<std::string>();
    if (type == "query_issued") {
      auto next = s->state_.next_query();
      const auto* q = std::get_if<Query>(&next);
      if (!q) throw ReplayMismatch("logged query " + r.at("query").dump() + " but session is " +
                                   to_string(std::get<SessionStatus>(next)));
      detail::expect_same(r.at("query"), json(q->id), "query id");
      detail::expect_same(r.at("instance"), json(q->instance), "instance");
      detail::expect_same(r.at("weight"), json(q->weight), "weight");
      detail::expect_same(r.at("current"), path_to_json(q->current), "current path");
      detail::expect_same(r.at("alternative"), path_to_json(q->alternative), "alternative path");
      detail::expect_same(r.at("rng_draws"), json(q->rng_draws), "rng draws");
    } else if (type == "choice") {
      const auto& rec = s->state_.record_choice(r.at("query").get<std::uint64_t>(),
                                                parse_choice(r.at("choice").get<std::string>()));
      detail::expect_same(r.at("row"), row_to_json(rec.row), "row");
    } else if (type == "status") {
      auto next = s->state_.next_query();
      const auto* st = std::get_if<SessionStatus>(&next);
      if (!st) throw ReplayMismatch("logged terminal status but a query is available");
      detail::expect_same(r.at("status"), json(to_string(*st)), "status");
      s->terminal_logged_ = true;
    } else if (type == "finalized") {
      const auto report = specrev::finalize(s->state_, {.global_time_ratio = false});
      detail::expect_same(r.at("w_final"), json(report.final_weight), "w_final");
    } else {
      throw std::runtime_error("unknown session log record " + type);
    }
    s->records_.push_back(r);
  }
  s->log_path_ = std::move(log_path);
  if (!s->log_path_.empty()) {
    // Rewrite without any torn tail so later appends start on a clean line.
    const auto tmp = s->log_path_ + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      for (const auto& r : s->records_) out << r.dump() << '\n';
      if (!out) throw std::runtime_error("cannot rewrite session log " + s->log_path_);
    }
    std::filesystem::rename(tmp, s->log_path_);
  }
  return s;
}

/// Answers every query of `session` with `user`, then finalizes. Everything lands in the log.
inline FinalReport answer_until_done(Session& session, const SimulatedUser& user, MetricOptions options = {}) {
  while (true) {
    auto next = session.next_query();
    const auto* q = std::get_if<Query>(&next);
    if (!q) break;
    session.record_choice(q->id, simulate_choice(user, *q));
  }
  return session.finalize(options);
}

}  // namespace specrev

#endif  // SPECREV_SESSION_HPP
