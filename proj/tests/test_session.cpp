#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <unistd.h>

#include "specrev/batch.hpp"
#include "specrev/service.hpp"
#include "specrev/session.hpp"
#include "specrev/user_model.hpp"
#include "support.hpp"

using namespace specrev;
using specrev::testing::Tri;

namespace {

std::shared_ptr<const RoutingProblem> tri_problem() {
  const Tri tri;
  return std::make_shared<RoutingProblem>(RoutingProblem{tri.graph, tri.spec, {tri.task}});
}

Query tri_query() {
  SessionState s(tri_problem(), {});
  return std::get<Query>(s.next_query());
}

std::string temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("specrev_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  return dir.string();
}

std::shared_ptr<const World> facility() {
  static const auto world = build_world(load_environment(std::string(SPECREV_DATA_DIR) + "/facility_small.json"));
  return world;
}

// Runs a logged session to the end with a simulated user.
void drive(Session& s, const SimulatedUser& user) {
  while (true) {
    auto next = s.next_query();
    if (std::holds_alternative<SessionStatus>(next)) return;
    const auto& q = std::get<Query>(next);
    s.record_choice(q.id, simulate_choice(user, q));
  }
}

}  // namespace

TEST(SimulatedUser, TriAnswers) {
  const auto q = tri_query();
  EXPECT_EQ(simulate_choice({{0.5}}, q), Choice::alternative);
  EXPECT_EQ(simulate_choice({{3.0}}, q), Choice::current);
  EXPECT_EQ(simulate_choice({{1.0}}, q), Choice::current);
  EXPECT_EQ(simulate_choice({{1.0}, TieRule::prefer_alternative}, q), Choice::alternative);
}

TEST(SimulatedUser, PreferencesAreATotalPreorder) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = specrev::testing::random_graph(rng, 6, 8);
    const auto spec = specrev::testing::random_spec(rng, g, 3);
    const auto user = random_user(spec, static_cast<std::uint64_t>(trial));
    validate_user(user, spec);
    std::vector<Path> paths;
    for (const auto& e : specrev::testing::enumerate_simple_paths(g, 0, 3, 12)) paths.push_back(make_path(g, e, spec));
    // prefers(a, b): shown a as current and b as alternative, the user keeps a.
    auto prefers = [&](const Path& a, const Path& b) {
      Query q;
      q.current = a;
      q.alternative = b;
      return simulate_choice(user, q) == Choice::current;
    };
    for (const auto& a : paths) {
      for (const auto& b : paths) {
        EXPECT_TRUE(prefers(a, b) || prefers(b, a));
        for (const auto& c : paths) {
          if (prefers(a, b) && prefers(b, c)) {
            EXPECT_LE(path_cost(a, user.w_star), path_cost(c, user.w_star) + 1e-9);
          }
        }
      }
    }
  }
}

TEST(SimulatedUser, RandomUserInsideBox) {
  const auto world = facility();
  for (std::uint64_t seed = 0; seed < 50; ++seed) EXPECT_NO_THROW(validate_user(random_user(world->spec(), seed), world->spec()));
  SimulatedUser outside{WeightVector(world->spec().dimension(), -1e9)};
  EXPECT_THROW(validate_user(outside, world->spec()), std::invalid_argument);
}

TEST(Batch, ZeroBudgetFinalizesAtUpperBounds) {
  BatchConfig cfg;
  cfg.learning.budget = 0;
  cfg.seeds = {1, 2};
  cfg.metrics.global_time_ratio = false;
  const auto world = facility();
  const auto r = run_batch(world->problem, cfg);
  for (const auto& s : r.sessions) {
    EXPECT_EQ(s.queries, 0u);
    EXPECT_EQ(s.report.status, SessionStatus::budget_exhausted);
    for (std::size_t k = 0; k < world->spec().dimension(); ++k) {
      EXPECT_NEAR(s.report.final_weight[k], world->spec().constraint(k).upper, 1e-9);
    }
  }
}

TEST(Batch, TriSeedsConvergeToBruteForce) {
  const Tri tri;
  BatchConfig cfg;
  cfg.learning.budget = 10;
  for (std::uint64_t s = 0; s < 25; ++s) cfg.seeds.push_back(s);
  const auto r = run_batch(tri_problem(), cfg);
  for (const auto& s : r.sessions) {
    EXPECT_EQ(s.report.status, SessionStatus::converged);
    const double best = specrev::testing::brute_force_min_cost(tri.graph, tri.spec, tri.task, s.w_star);
    // The kept path is the user's optimum; the final weight may land on a tie.
    EXPECT_NEAR(specrev::testing::edge_sum_cost(tri.graph, tri.spec, s.report.final_paths[0].edges, s.w_star), best,
                kEquivalenceTolerance * std::max(1.0, std::abs(best)) + 1e-9)
        << "seed " << s.seed;
  }
}

TEST(Batch, RerunIsBitIdentical) {
  BatchConfig cfg;
  cfg.seeds = {3, 4, 5};
  cfg.threads = 3;
  cfg.metrics.global_time_ratio = false;
  const auto a = batch_report_to_json(run_batch(facility()->problem, cfg));
  cfg.threads = 1;
  const auto b = batch_report_to_json(run_batch(facility()->problem, cfg));
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(SessionLog, ConfigAcceptsAnyNonnegativeInteger) {
  const std::uint64_t big = (std::uint64_t{1} << 63) + 5;
  EXPECT_EQ(config_from_json({{"seed", big}}).seed, big);
  EXPECT_EQ(config_from_json(json::parse(R"({"seed": 1, "budget": 3})")).budget, 3u);
  EXPECT_EQ(config_from_json({{"seed", 7}}).seed, 7u);
  EXPECT_EQ(config_from_json(config_to_json(config_from_json({{"seed", big}}))).seed, big);
  EXPECT_THROW(config_from_json({{"seed", -1}}), SchemaError);
  EXPECT_THROW(config_from_json({{"budget", 2.5}}), SchemaError);
  EXPECT_THROW(config_from_json({{"subset", 0}}), SchemaError);
  EXPECT_THROW(config_from_json({{"policy", "greedy"}}), SchemaError);
}

TEST(SessionLog, ReplayReproducesQueriesAndFinalWeight) {
  const auto world = facility();
  LearningConfig cfg;
  cfg.seed = 9;
  Session s("s1", SessionSource::from_world(world), cfg);
  drive(s, random_user(world->spec(), 9));
  const auto report = s.finalize({.global_time_ratio = false});
  // Through text, as a log on disk would be.
  std::vector<json> records;
  for (const auto& r : s.records()) records.push_back(json::parse(r.dump()));
  const auto restored = Session::restore(records);
  EXPECT_EQ(restored->state().iteration(), s.state().iteration());
  EXPECT_EQ(restored->state().issued().size(), s.state().issued().size());
  EXPECT_EQ(finalize(restored->state(), {.global_time_ratio = false}).final_weight, report.final_weight);
}

TEST(SessionLog, TamperedLogIsRejected) {
  const auto world = facility();
  Session s("s1", SessionSource::from_world(world), {});
  drive(s, random_user(world->spec(), 2));
  auto records = s.records();
  for (auto& r : records) {
    if (r["type"] == "query_issued") {
      r["weight"][0] = r["weight"][0].get<double>() + 1e-12;
      break;
    }
  }
  EXPECT_THROW(Session::restore(records), ReplayMismatch);
}

TEST(SessionLog, CrashRestoreContinuesWithSameQuery) {
  const auto dir = temp_dir("crash");
  std::filesystem::create_directories(dir);
  const auto path = dir + "/s.jsonl";
  const auto world = facility();
  const auto user = random_user(world->spec(), 4);
  std::uint64_t pending_id = 0;
  WeightVector pending_weight;
  {
    Session s("s", SessionSource::from_world(world), {}, path);
    for (int i = 0; i < 6; ++i) {
      const auto q = std::get<Query>(s.next_query());
      s.record_choice(q.id, simulate_choice(user, q));
    }
    const auto q = std::get<Query>(s.next_query());
    pending_id = q.id;
    pending_weight = q.weight;
  }  // crash with a query outstanding
  {
    std::ofstream torn(path, std::ios::app);
    torn << R"({"type": "choi)";  // partial write
  }
  auto restored = Session::restore(read_log(path), path);
  const auto q = std::get<Query>(restored->next_query());
  EXPECT_EQ(q.id, pending_id);
  EXPECT_EQ(q.weight, pending_weight);
  std::filesystem::remove_all(dir);
}

TEST(Service, TriQueryPayload) {
  SessionService service;
  const auto created = service.create_session({{"problem", problem_to_json(*tri_problem())}});
  ASSERT_EQ(created.status, 201) << created.body.dump();
  const auto id = created.body["id"].get<std::string>();
  const auto first = service.get_query(id);
  ASSERT_EQ(first.status, 200);
  const auto& q = first.body["query"];
  EXPECT_EQ(q["current"]["duration"], 4.0);
  EXPECT_EQ(q["alternative"]["duration"], 3.0);
  EXPECT_EQ(q["alternative"]["violations"], json::array({"g1"}));
  EXPECT_EQ(q["current"]["violations"], json::array());
  EXPECT_EQ(service.get_query(id).body.dump(), first.body.dump());

  const auto qid = q["id"].get<std::uint64_t>();
  const auto posted = service.post_choice(id, {{"query_id", qid}, {"choice", "alternative"}});
  ASSERT_EQ(posted.status, 200) << posted.body.dump();
  EXPECT_EQ(posted.body["iteration"], 1);
  const auto replayed = service.post_choice(id, {{"query_id", qid}, {"choice", "alternative"}});
  EXPECT_EQ(replayed.status, 409);
  EXPECT_EQ(service.get_state(id).body["iteration"], 1);
  EXPECT_EQ(service.get_query(id).body["status"], "converged");
  EXPECT_EQ(service.post_choice(id, {{"query_id", qid + 1}, {"choice", "current"}}).status, 409);
  const auto fin = service.finalize(id);
  EXPECT_EQ(fin.body["w_final"], json::array({1.0}));
  EXPECT_EQ(service.get_query("nope").status, 404);
  EXPECT_EQ(service.post_choice(id, {{"choice", "current"}}).status, 400);
}

TEST(Service, FacilitySessionRunsToBudget) {
  SessionService service;
  const auto doc = serialize_environment(facility()->document);
  const auto created = service.create_session({{"environment", doc}, {"config", {{"seed", 1}}}});
  ASSERT_EQ(created.status, 201);
  EXPECT_EQ(created.body["instances"], 8);
  const auto id = created.body["id"].get<std::string>();
  const auto user = random_user(facility()->spec(), 1);
  json last;
  for (int i = 0; i < 20; ++i) {
    const auto q = service.get_query(id);
    ASSERT_TRUE(q.body.contains("query")) << q.body.dump();
    Query query;
    query.current = make_path(facility()->graph(), q.body["query"]["current"]["edges"].get<std::vector<EdgeId>>(),
                              facility()->spec());
    query.alternative = make_path(facility()->graph(),
                                  q.body["query"]["alternative"]["edges"].get<std::vector<EdgeId>>(), facility()->spec());
    last = service.post_choice(id, {{"query_id", q.body["query"]["id"]},
                                    {"choice", to_string(simulate_choice(user, query))}})
               .body;
  }
  EXPECT_EQ(last["status"], "budget_exhausted");
  EXPECT_EQ(last["iteration"], 20);
  EXPECT_EQ(service.get_query(id).body["status"], "budget_exhausted");
  const auto m = service.metrics(id);
  EXPECT_EQ(m.body["final"]["task_time_ratio"], last["task_time_ratio"]);
}

TEST(Service, EmptySpecificationStartsConverged) {
  auto doc = serialize_environment(facility()->document);
  doc["zones"] = json::array();
  SessionService service;
  const auto created = service.create_session({{"environment", doc}});
  ASSERT_EQ(created.status, 201);
  EXPECT_EQ(created.body["status"], "converged");
}

TEST(Service, MalformedDocumentPersistsNothing) {
  const auto dir = temp_dir("malformed");
  SessionService service(dir);
  auto doc = serialize_environment(facility()->document);
  doc["zones"][0]["polygon"] = json::array({json::array({0, 0}), json::array({1, 1})});
  const auto r = service.create_session({{"environment", doc}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["field"], "/zones/0/polygon");
  EXPECT_TRUE(service.session_ids().empty());
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& f : std::filesystem::directory_iterator(dir)) ++files;
  EXPECT_EQ(files, 0u);
  std::filesystem::remove_all(dir);
}

TEST(Service, RestartRestoresSessions) {
  const auto dir = temp_dir("restart");
  std::string id;
  json pending;
  {
    SessionService service(dir);
    id = service.create_session({{"environment", serialize_environment(facility()->document)}}).body["id"];
    for (int i = 0; i < 3; ++i) {
      const auto q = service.get_query(id).body["query"];
      service.post_choice(id, {{"query_id", q["id"]}, {"choice", i % 2 ? "alternative" : "current"}});
    }
    pending = service.get_query(id).body;
  }
  SessionService restarted(dir);
  EXPECT_EQ(restarted.session_ids(), std::vector<std::string>{id});
  EXPECT_EQ(restarted.get_query(id).body.dump(), pending.dump());
  const auto next = restarted.create_session({{"problem", problem_to_json(*tri_problem())}});
  EXPECT_NE(next.body["id"], id);
  std::filesystem::remove_all(dir);
}

TEST(Service, HttpRoundTrip) {
  SessionService service;
  httplib::Server server;
  mount_routes(server, service);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  auto created = client.Post("/sessions", json{{"problem", problem_to_json(*tri_problem())}}.dump(), "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const auto id = json::parse(created->body)["id"].get<std::string>();
  auto q = client.Get("/sessions/" + id + "/query");
  ASSERT_TRUE(q);
  const auto qid = json::parse(q->body)["query"]["id"];
  auto c = client.Post("/sessions/" + id + "/choice", json{{"query_id", qid}, {"choice", "current"}}.dump(),
                       "application/json");
  EXPECT_EQ(c->status, 200);
  EXPECT_EQ(client.Get("/sessions/" + id + "/state")->status, 200);
  EXPECT_EQ(client.Get("/sessions/" + id + "/metrics")->status, 200);
  EXPECT_EQ(client.Post("/sessions/" + id + "/finalize", "", "application/json")->status, 200);
  EXPECT_EQ(client.Post("/sessions", "{not json", "application/json")->status, 400);
  EXPECT_EQ(client.Get("/sessions/zzz/state")->status, 404);
  server.stop();
  t.join();
}
