#ifndef SPECREV_SERVICE_HPP
#define SPECREV_SERVICE_HPP

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "specrev/report.hpp"
#include "specrev/session.hpp"

// After Eigen: <resolv.h>, pulled in here, defines a _res macro that breaks Eigen.
#include "httplib.h"

namespace specrev {

struct ServiceResponse {
  int status = 200;
  json body;
};

inline ServiceResponse error_response(int status, const std::string& message, const std::string& field = {}) {
  json body = {{"error", message}};
  if (!field.empty()) body["field"] = field;
  return {status, std::move(body)};
}

/// Sessions keyed by opaque id. Each session is guarded by its own lock; the
/// table lock is held only for lookups and inserts. With a directory, every
/// session writes an append-only log there and an index lists the sessions;
/// a new service on the same directory restores them by replay.
class SessionService {
public:
  explicit SessionService(std::string directory = {}) : directory_(std::move(directory)) {
    if (directory_.empty()) return;
    std::filesystem::create_directories(directory_);
    const auto index = index_path();
    if (!std::filesystem::exists(index)) return;
    std::ifstream in(index);
    const auto j = json::parse(in);
    for (const auto& entry : j.at("sessions")) {
      const auto id = entry.at("id").get<std::string>();
      auto e = std::make_shared<Entry>();
      e->created = entry.at("created").get<std::string>();
      e->session = Session::restore(read_log(log_path(id)), log_path(id));
      sessions_.emplace(id, std::move(e));
      counter_ = std::max(counter_, std::stoull(id.substr(1)) + 1);
    }
  }

  /// POST /sessions. Body: {"environment": document} or {"problem": raw form},
  /// optional "config".
  ServiceResponse create_session(const json& body) {
    try {
      if (!body.is_object()) return error_response(400, "expected a JSON object", "/");
      for (auto it = body.begin(); it != body.end(); ++it) {
        if (it.key() != "environment" && it.key() != "problem" && it.key() != "config") {
          return error_response(400, "unknown field", "/" + it.key());
        }
      }
      if (body.contains("environment") == body.contains("problem")) {
        return error_response(400, "give exactly one of environment or problem", "/environment");
      }
      const auto config = body.contains("config") ? config_from_json(body.at("config")) : LearningConfig{};
      SessionSource source;
      if (body.contains("environment")) {
        auto doc = parse_environment(body.at("environment"));
        source = SessionSource::from_world(build_world(std::move(doc)));
      } else {
        source = SessionSource::from_problem(problem_from_json(body.at("problem")));
      }
      return create_session(std::move(source), config);
    } catch (const SchemaError& e) {
      return error_response(400, e.what(), e.field());
    } catch (const std::exception& e) {
      return error_response(400, e.what());
    }
  }

  ServiceResponse create_session(SessionSource source, LearningConfig config) {
    std::string id;
    {
      std::lock_guard lock(table_mutex_);
      std::ostringstream s;
      s << 's' << std::setw(6) << std::setfill('0') << counter_++;
      id = s.str();
    }
    auto e = std::make_shared<Entry>();
    e->created = timestamp_now();
    const auto path = directory_.empty() ? std::string{} : log_path(id);
    if (!path.empty()) std::filesystem::remove(path);
    try {
      e->session = std::make_unique<Session>(id, std::move(source), config, path);
      e->session->next_query();  // settles immediate convergence
    } catch (...) {
      if (!path.empty()) std::filesystem::remove(path);
      throw;
    }
    json body;
    {
      std::lock_guard session_lock(e->mutex);
      const auto& state = e->session->state();
      const auto& problem = state.problem();
      const auto* world = e->session->source().world.get();
      json paths = json::array();
      for (const auto& inst : state.instances()) {
        paths.push_back({{"task", task_payload(inst.task, problem)},
                         {"path", path_payload(inst.best_path, problem, world)}});
      }
      const auto w0 = state.initial_weight();
      const auto metrics = evaluate_metrics(problem.graph, problem.spec, w0, problem.tasks);
      body = {{"id", id},
              {"status", to_string(state.status())},
              {"instances", state.instances().size()},
              {"initial_paths", paths},
              {"initial_metrics", metric_report_to_json(metrics)}};
    }
    {
      std::lock_guard lock(table_mutex_);
      sessions_.emplace(id, e);
      write_index();
    }
    return {201, std::move(body)};
  }

  /// GET /sessions/{id}/query
  ServiceResponse get_query(const std::string& id) {
    return with_session(id, [&](Session& s) -> ServiceResponse {
      auto next = s.next_query();
      const auto& state = s.state();
      if (auto* st = std::get_if<SessionStatus>(&next)) {
        return {200, {{"status", to_string(*st)}, {"iteration", state.iteration()}, {"budget", state.config().budget}}};
      }
      const auto& q = std::get<Query>(next);
      const auto& problem = state.problem();
      const auto* world = s.source().world.get();
      return {200,
              {{"status", to_string(state.status())},
               {"iteration", state.iteration()},
               {"budget", state.config().budget},
               {"query",
                {{"id", q.id},
                 {"instance", q.instance},
                 {"task", task_payload(state.instances()[q.instance].task, problem)},
                 {"current", path_payload(q.current, problem, world)},
                 {"alternative", path_payload(q.alternative, problem, world)}}}}};
    });
  }

  /// POST /sessions/{id}/choice. Body: {"query_id": n, "choice": "current" | "alternative"}.
  ServiceResponse post_choice(const std::string& id, const json& body) {
    if (!body.is_object() || !body.contains("query_id") || !body.at("query_id").is_number_unsigned()) {
      return error_response(400, "query_id must be a nonnegative integer", "/query_id");
    }
    if (!body.contains("choice") || !body.at("choice").is_string()) {
      return error_response(400, "choice must be current or alternative", "/choice");
    }
    Choice choice;
    try {
      choice = parse_choice(body.at("choice").get<std::string>());
    } catch (const std::invalid_argument& e) {
      return error_response(400, e.what(), "/choice");
    }
    const auto query_id = body.at("query_id").get<std::uint64_t>();
    return with_session(id, [&](Session& s) -> ServiceResponse {
      if (s.state().status() != SessionStatus::active && !s.state().outstanding()) {
        return error_response(409, std::string("session is ") + to_string(s.state().status()));
      }
      try {
        s.record_choice(query_id, choice);
      } catch (const StaleQuery& e) {
        return error_response(409, e.what());
      }
      const auto& state = s.state();
      json ratio = nullptr;
      if (auto w = max_sum_vertex(state.consistent_space())) {
        const auto& p = state.problem();
        ratio = task_time_ratio(p.graph, p.spec, *w, p.tasks);
      }
      touch_index();
      return {200, {{"status", to_string(state.status())}, {"iteration", state.iteration()}, {"task_time_ratio", ratio}}};
    });
  }

  /// GET /sessions/{id}/state
  ServiceResponse get_state(const std::string& id) {
    return with_session(id, [&](Session& s) -> ServiceResponse {
      const auto& state = s.state();
      const auto& problem = state.problem();
      const auto* world = s.source().world.get();
      json instances = json::array();
      for (const auto& inst : state.instances()) {
        instances.push_back({{"task", task_payload(inst.task, problem)},
                             {"best_path", path_payload(inst.best_path, problem, world)},
                             {"best_weight", inst.best_weight},
                             {"presented", inst.presented.size()}});
      }
      json choices = json::array();
      for (const auto& c : state.choices()) {
        choices.push_back({{"query", c.query_id}, {"instance", c.instance}, {"choice", to_string(c.choice)},
                           {"row", row_to_json(c.row)}});
      }
      json constraints = json::array();
      for (const auto& c : problem.spec.constraints()) {
        constraints.push_back({{"id", c.id}, {"kind", to_string(c.kind)}, {"lower", c.lower}, {"upper", c.upper}});
      }
      return {200,
              {{"id", s.id()},
               {"status", to_string(state.status())},
               {"iteration", state.iteration()},
               {"budget", state.config().budget},
               {"config", config_to_json(state.config())},
               {"constraints", constraints},
               {"rows", state.space().rows().size()},
               {"outstanding_query", state.outstanding() ? json(state.outstanding()->id) : json(nullptr)},
               {"instances", instances},
               {"choices", choices}}};
    });
  }

  /// POST /sessions/{id}/finalize
  ServiceResponse finalize(const std::string& id) {
    return with_session(id, [&](Session& s) -> ServiceResponse {
      const auto report = s.finalize();
      return {200, final_report_to_json(report, s.state().problem(), s.source().world.get())};
    });
  }

  /// GET /sessions/{id}/metrics: both stages for the current state.
  ServiceResponse metrics(const std::string& id) {
    return with_session(id, [&](Session& s) -> ServiceResponse {
      const auto report = specrev::finalize(s.state());
      return {200,
              {{"status", to_string(report.status)},
               {"iteration", report.iterations},
               {"initial", metric_report_to_json(report.initial_metrics)},
               {"final", metric_report_to_json(report.final_metrics)},
               {"acceptance", acceptance_to_json(report.acceptance)}}};
    });
  }

  [[nodiscard]] std::vector<std::string> session_ids() {
    std::lock_guard lock(table_mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, e] : sessions_) ids.push_back(id);
    return ids;
  }

private:
  struct Entry {
    std::mutex mutex;
    std::unique_ptr<Session> session;
    std::string created;
  };

  template <typename F>
  ServiceResponse with_session(const std::string& id, F&& f) {
    std::shared_ptr<Entry> e;
    {
      std::lock_guard lock(table_mutex_);
      const auto it = sessions_.find(id);
      if (it == sessions_.end()) return error_response(404, "unknown session " + id);
      e = it->second;
    }
    std::lock_guard lock(e->mutex);
    try {
      return f(*e->session);
    } catch (const std::exception& ex) {
      return error_response(500, ex.what());
    }
  }

  [[nodiscard]] std::string log_path(const std::string& id) const { return directory_ + "/" + id + ".jsonl"; }
  [[nodiscard]] std::string index_path() const { return directory_ + "/index.json"; }

  void touch_index() {
    std::lock_guard lock(table_mutex_);
    write_index();
  }

  // Caller holds table_mutex_. Written to a temporary file and renamed.
  void write_index() {
    if (directory_.empty()) return;
    json sessions = json::array();
    for (const auto& [id, e] : sessions_) sessions.push_back({{"id", id}, {"created", e->created}});
    const auto tmp = index_path() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << json{{"sessions", sessions}}.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, index_path());
  }

  std::string directory_;
  std::mutex table_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  unsigned long long counter_ = 1;
};

/// Registers the HTTP routes for `service` on `server`.
inline void mount_routes(httplib::Server& server, SessionService& service) {
  auto reply = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto parse_body = [](const httplib::Request& req, json& out) -> std::optional<ServiceResponse> {
    try {
      out = req.body.empty() ? json::object() : json::parse(req.body);
      return std::nullopt;
    } catch (const json::parse_error& e) {
      return error_response(400, std::string("malformed JSON: ") + e.what(), "/");
    }
  };
  server.Post("/sessions", [=, &service](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (auto err = parse_body(req, body)) return reply(res, *err);
    reply(res, service.create_session(body));
  });
  server.Get(R"(/sessions/([^/]+)/query)", [=, &service](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.get_query(req.matches[1]));
  });
  server.Post(R"(/sessions/([^/]+)/choice)", [=, &service](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (auto err = parse_body(req, body)) return reply(res, *err);
    reply(res, service.post_choice(req.matches[1], body));
  });
  server.Get(R"(/sessions/([^/]+)/state)", [=, &service](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.get_state(req.matches[1]));
  });
  server.Post(R"(/sessions/([^/]+)/finalize)", [=, &service](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.finalize(req.matches[1]));
  });
  server.Get(R"(/sessions/([^/]+)/metrics)", [=, &service](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.metrics(req.matches[1]));
  });
}

/// Host and port from SPECREV_BIND ("host:port"), defaulting to 127.0.0.1:8080.
inline std::pair<std::string, int> bind_address() {
  const char* env = std::getenv("SPECREV_BIND");
  if (!env || !*env) return {"127.0.0.1", 8080};
  const std::string s(env);
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("SPECREV_BIND must be host:port");
  return {s.substr(0, colon), std::stoi(s.substr(colon + 1))};
}

}  // namespace specrev

#endif  // SPECREV_SERVICE_HPP
