#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "specrev/batch.hpp"
#include "specrev/document.hpp"
#include "specrev/report.hpp"
#include "specrev/session.hpp"
#include "specrev/service.hpp"

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace specrev;
using nlohmann::json;

namespace {

struct Globals {
  std::string env;
  std::uint64_t seed = 0;
  std::size_t budget = 20;
  std::string policy = "minvertex";
  std::size_t subset = 5;
  std::string out;
  bool json_output = false;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string fmt(const std::optional<double>& x) { return x ? fmt(*x) : std::string("n/a"); }

std::string exact(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

LearningConfig learning_config(const Globals& g) {
  LearningConfig c;
  c.budget = g.budget;
  c.subset_size = g.subset;
  c.policy = parse_policy(g.policy);
  c.seed = g.seed;
  return c;
}

std::shared_ptr<const World> load_world(const Globals& g) {
  if (g.env.empty()) throw std::invalid_argument("--env is required");
  auto world = build_world(load_environment(g.env));
  for (const auto& w : world->compiled.warnings) std::cerr << "warning: " << w << '\n';
  return world;
}

// JSON goes to --out when given; plain text goes to stdout unless --json.
void emit(const Globals& g, const json& j, const std::string& text) {
  if (!g.out.empty()) {
    std::ofstream f(g.out);
    f << j.dump(2) << '\n';
    if (!f) throw std::runtime_error("cannot write " + g.out);
  }
  if (g.json_output) std::cout << j.dump(2) << '\n';
  else std::cout << text;
}

std::string weight_text(const Specification& spec, const WeightVector& w) {
  std::ostringstream s;
  for (std::size_t k = 0; k < w.size(); ++k) s << "  " << spec.constraint(k).id << " = " << exact(w[k]) << '\n';
  return s.str();
}

// Weight for plan/metrics: initial (w0), final (max-sum vertex of the box or of a logged
// session's consistent space), or an explicit list.
WeightVector stage_weight(const World& world, const std::string& stage, const std::vector<double>& explicit_w,
                          const std::string& log) {
  const auto& spec = world.spec();
  if (!explicit_w.empty()) {
    if (explicit_w.size() != spec.dimension()) {
      throw std::invalid_argument("--weights needs " + std::to_string(spec.dimension()) + " values");
    }
    return explicit_w;
  }
  if (stage == "initial") {
    WeightVector w;
    for (const auto& c : spec.constraints()) w.push_back(c.kind == ConstraintKind::penalty ? c.upper : c.lower);
    return w;
  }
  if (!log.empty()) {
    auto session = Session::restore(read_log(log));
    return *max_sum_vertex(session->state().consistent_space());
  }
  return *max_sum_vertex(init_feasible_space(spec));
}

int run_plan(const Globals& g, const std::string& stage, const std::vector<double>& weights, const std::string& log) {
  const auto world = load_world(g);
  const auto w = stage_weight(*world, stage, weights, log);
  const auto& problem = *world->problem;
  json tasks = json::array();
  std::ostringstream text;
  text << "stage " << (weights.empty() ? stage : "explicit") << ", weights:\n" << weight_text(world->spec(), w);
  for (const auto& t : problem.tasks) {
    const auto p = shortest_path(problem.graph, problem.spec, w, t);
    const auto payload = path_payload(p, problem, world.get());
    tasks.push_back({{"task", task_payload(t, problem)}, {"path", payload}});
    text << t.label << ": " << problem.graph.label(t.start) << " -> " << problem.graph.label(t.goal)
         << "  duration " << fmt(p.duration) << "  edges " << p.edges.size();
    if (!payload["violations"].empty()) {
      text << "  violates";
      for (const auto& v : payload["violations"]) text << ' ' << v.get<std::string>();
    }
    text << '\n';
  }
  emit(g, {{"weights", w}, {"tasks", tasks}}, text.str());
  return 0;
}

int run_metrics(const Globals& g, const std::string& stage, const std::vector<double>& weights, const std::string& log,
                bool vertex_entropies) {
  const auto world = load_world(g);
  const auto w = stage_weight(*world, stage, weights, log);
  const auto& problem = *world->problem;
  const auto m = evaluate_metrics(problem.graph, problem.spec, w, problem.tasks,
                                  {.global_time_ratio = true, .vertex_entropies = vertex_entropies});
  std::ostringstream text;
  text << "entropy ratio      " << fmt(m.entropy_ratio) << '\n'
       << "task time ratio    " << fmt(m.task_time_ratio) << '\n'
       << "global time ratio  " << fmt(m.global_time_ratio) << '\n';
  emit(g, {{"weights", w}, {"metrics", metric_report_to_json(m)}}, text.str());
  return 0;
}

int run_simulate(const Globals& g, std::size_t count, unsigned threads, const std::string& ties,
                 const std::string& log_dir) {
  const auto world = load_world(g);
  BatchConfig cfg;
  cfg.learning = learning_config(g);
  for (std::size_t i = 0; i < count; ++i) cfg.seeds.push_back(g.seed + i);
  cfg.ties = parse_tie_rule(ties);
  cfg.threads = threads;
  const auto r = run_batch(world->problem, cfg);

  if (!log_dir.empty()) {
    std::filesystem::create_directories(log_dir);
    for (auto seed : cfg.seeds) {
      auto user = random_user(world->spec(), seed);
      user.ties = cfg.ties;
      auto learning = cfg.learning;
      learning.seed = seed;
      const auto path = (std::filesystem::path(log_dir) / ("seed" + std::to_string(seed) + ".jsonl")).string();
      std::filesystem::remove(path);
      Session session("seed" + std::to_string(seed), SessionSource::from_world(world), learning, path);
      answer_until_done(session, user, {.global_time_ratio = false});
    }
  }

  std::ostringstream text;
  auto row = [&](const char* name, const Summary& a, const Summary& b) {
    text << name << "  initial mean " << fmt(a.mean) << " median " << fmt(a.median) << "  final mean " << fmt(b.mean)
         << " median " << fmt(b.median) << '\n';
  };
  text << r.sessions.size() << " sessions, " << world->problem->tasks.size() << " tasks, d = " << world->spec().dimension()
       << ", mean queries " << fmt(r.queries.mean) << '\n';
  row("task time ratio   ", r.initial_task_time_ratio, r.final_task_time_ratio);
  row("entropy ratio     ", r.initial_entropy_ratio, r.final_entropy_ratio);
  row("global time ratio ", r.initial_global_time_ratio, r.final_global_time_ratio);
  text << "acceptance all " << fmt(r.acceptance_all.mean) << ", tasks " << fmt(r.acceptance_tasks.mean) << '\n';
  emit(g, batch_report_to_json(r), text.str());
  return 0;
}

int run_serve(const std::string& dir) {
  SessionService service(dir);
  httplib::Server server;
  mount_routes(server, service);
  const auto [host, port] = bind_address();
  std::cerr << "listening on " << host << ':' << port << '\n';
  if (!server.listen(host, port)) {
    std::cerr << "cannot bind " << host << ':' << port << '\n';
    return 1;
  }
  return 0;
}

int run_replay(const Globals& g, const std::string& log) {
  const auto records = read_log(log);
  auto session = Session::restore(records);  // throws on any mismatch
  const bool logged_final = !records.empty() && records.back().value("type", "") == "finalized";
  const auto report = session->finalize({.global_time_ratio = false});
  std::size_t queries = 0;
  for (const auto& r : records) queries += r.value("type", "") == "query_issued";
  const auto& spec = session->state().problem().spec;
  std::ostringstream text;
  text << "replayed " << records.size() << " records, " << queries << " queries, status "
       << to_string(report.status) << (logged_final ? ", w_final matches log" : "") << "\nw_final:\n"
       << weight_text(spec, report.final_weight);
  emit(g,
       {{"session", session->id()},
        {"records", records.size()},
        {"queries", queries},
        {"status", to_string(report.status)},
        {"w_final", report.final_weight},
        {"verified_final", logged_final}},
       text.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Revise traffic-rule specifications from path preferences"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the verb
  Globals g;
  app.add_option("--env", g.env, "environment document (JSON)");
  app.add_option("--seed", g.seed, "session seed; first user seed for simulate");
  app.add_option("--budget", g.budget, "query budget")->capture_default_str();
  app.add_option("--policy", g.policy, "vertex search policy")
      ->check(CLI::IsMember({"minvertex", "vertexsearch"}))
      ->capture_default_str();
  app.add_option("--subset", g.subset, "tasks sampled per iteration")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--out", g.out, "write the JSON report here");
  app.add_flag("--json", g.json_output, "print JSON instead of text");

  std::string stage = "initial", log;
  std::vector<double> weights;
  auto add_stage = [&](CLI::App* sub) {
    sub->add_option("--stage", stage, "weight stage")->check(CLI::IsMember({"initial", "final"}))->capture_default_str();
    sub->add_option("--weights", weights, "explicit weight vector, overrides --stage")->delimiter(',');
    sub->add_option("--log", log, "for --stage final: use this session log's feasible space");
  };
  auto* plan = app.add_subcommand("plan", "shortest paths per task for a weight stage");
  add_stage(plan);
  auto* metrics = app.add_subcommand("metrics", "metric report for a weight stage");
  add_stage(metrics);
  bool vertex_entropies = false;
  metrics->add_flag("--vertex-entropies", vertex_entropies, "include per-vertex entropies in JSON");

  auto* simulate = app.add_subcommand("simulate", "batch of sessions against simulated users");
  std::size_t count = 100;
  unsigned threads = 0;
  std::string ties = "prefer-current", log_dir;
  simulate->add_option("--sessions", count, "number of seeds, starting at --seed")->capture_default_str();
  simulate->add_option("--threads", threads, "worker threads (0: all cores)");
  simulate->add_option("--ties", ties, "simulated tie rule")
      ->check(CLI::IsMember({"prefer-current", "prefer-alternative"}))
      ->capture_default_str();
  simulate->add_option("--log-dir", log_dir, "also write one session log per seed here");

  auto* serve = app.add_subcommand("serve", "HTTP session service (bind address from SPECREV_BIND)");
  std::string dir;
  serve->add_option("--dir", dir, "session directory (in-memory when empty)");

  auto* replay = app.add_subcommand("replay", "verify a session log and recompute w_final");
  std::string replay_log;
  replay->add_option("log", replay_log, "session log (JSONL)")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*plan) return run_plan(g, stage, weights, log);
    if (*metrics) return run_metrics(g, stage, weights, log, vertex_entropies);
    if (*simulate) return run_simulate(g, count, threads, ties, log_dir);
    if (*serve) return run_serve(dir);
    if (*replay) return run_replay(g, replay_log);
  } catch (const SchemaError& e) {
    std::cerr << "invalid document at " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
