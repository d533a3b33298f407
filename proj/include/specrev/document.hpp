#ifndef SPECREV_DOCUMENT_HPP
#define SPECREV_DOCUMENT_HPP

#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "specrev/environment.hpp"

namespace specrev {

/// Schema violation; `field` is a JSON pointer to the offending value.
class SchemaError : public std::invalid_argument {
public:
  SchemaError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

/// Environment document: grid, speed tiers, zones, tasks and labeled areas.
struct EnvironmentDocument {
  std::string name;
  Environment env;
  std::vector<Zone> zones;
  std::vector<NamedTask> tasks;
  std::vector<Area> areas;
};

namespace detail {

using nlohmann::json;

inline void require_keys(const json& j, const std::string& at, std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional) {
  if (!j.is_object()) throw SchemaError(at.empty() ? "/" : at, "expected an object");
  for (const char* k : required) {
    if (!j.contains(k)) throw SchemaError(at + "/" + k, "missing required field");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : required) known = known || it.key() == k;
    for (const char* k : optional) known = known || it.key() == k;
    if (!known) throw SchemaError(at + "/" + it.key(), "unknown field");
  }
}

inline double number_at(const json& j, const std::string& at) {
  if (!j.is_number()) throw SchemaError(at, "expected a number");
  return j.get<double>();
}

inline std::string string_at(const json& j, const std::string& at) {
  if (!j.is_string()) throw SchemaError(at, "expected a string");
  return j.get<std::string>();
}

inline Point point_at(const json& j, const std::string& at) {
  if (!j.is_array() || j.size() != 2) throw SchemaError(at, "expected [x, y]");
  return {number_at(j[0], at + "/0"), number_at(j[1], at + "/1")};
}

inline Cell cell_at(const json& j, const std::string& at) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw SchemaError(at, "expected [row, col] integers");
  }
  return {j[0].get<int>(), j[1].get<int>()};
}

inline std::vector<Point> polygon_at(const json& j, const std::string& at) {
  if (!j.is_array()) throw SchemaError(at, "expected an array of points");
  std::vector<Point> poly;
  for (std::size_t i = 0; i < j.size(); ++i) poly.push_back(point_at(j[i], at + "/" + std::to_string(i)));
  if (!geometry::is_simple_polygon(poly)) {
    throw SchemaError(at, "polygon must be simple with at least 3 points");
  }
  return poly;
}

inline json to_json(Point p) { return json::array({p.x, p.y}); }
inline json to_json(Cell c) { return json::array({c.row, c.col}); }
inline json to_json(const std::vector<Point>& poly) {
  json a = json::array();
  for (const auto& p : poly) a.push_back(to_json(p));
  return a;
}

}  // namespace detail

/// Parses and validates an environment document. Unknown fields are rejected.
inline EnvironmentDocument parse_environment(const nlohmann::json& j) {
  using detail::json;
  detail::require_keys(j, "", {"grid", "cell_size_m", "zones", "tasks"}, {"name", "speeds_mps", "areas"});
  EnvironmentDocument doc;
  if (j.contains("name")) doc.name = detail::string_at(j["name"], "/name");

  const auto& grid = j["grid"];
  if (!grid.is_array() || grid.empty()) throw SchemaError("/grid", "expected a non-empty array of rows");
  for (std::size_t r = 0; r < grid.size(); ++r) {
    const auto row = detail::string_at(grid[r], "/grid/" + std::to_string(r));
    if (row.empty() || row.find_first_not_of(".#") != std::string::npos) {
      throw SchemaError("/grid/" + std::to_string(r), "rows use '.' (free) and '#' (occupied)");
    }
    if (!doc.env.grid.empty() && row.size() != doc.env.grid.front().size()) {
      throw SchemaError("/grid/" + std::to_string(r), "row length differs from row 0");
    }
    doc.env.grid.push_back(row);
  }
  doc.env.cell_size_m = detail::number_at(j["cell_size_m"], "/cell_size_m");
  if (!(doc.env.cell_size_m > 0.0)) throw SchemaError("/cell_size_m", "must be positive");
  if (j.contains("speeds_mps")) {
    const auto& s = j["speeds_mps"];
    if (!s.is_array() || s.empty()) throw SchemaError("/speeds_mps", "expected a non-empty array");
    doc.env.speeds_mps.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      doc.env.speeds_mps.push_back(detail::number_at(s[i], "/speeds_mps/" + std::to_string(i)));
    }
  }
  try {
    validate_environment(doc.env);
  } catch (const EnvironmentError& e) {
    throw SchemaError("/grid", e.what());
  }

  const auto& zones = j["zones"];
  if (!zones.is_array()) throw SchemaError("/zones", "expected an array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < zones.size(); ++i) {
    const auto at = "/zones/" + std::to_string(i);
    const auto& zj = zones[i];
    detail::require_keys(zj, at, {"kind", "polygon"}, {"name", "direction", "two_way"});
    Zone z;
    const auto kind = detail::string_at(zj["kind"], at + "/kind");
    if (kind == "road") z.kind = ZoneKind::road;
    else if (kind == "avoid") z.kind = ZoneKind::avoid;
    else if (kind == "speed_limit") z.kind = ZoneKind::speed_limit;
    else throw SchemaError(at + "/kind", "expected road, avoid or speed_limit");
    z.name = zj.contains("name") ? detail::string_at(zj["name"], at + "/name")
                                 : std::string(to_string(z.kind)) + std::to_string(i);
    if (!names.insert(z.name).second) throw SchemaError(at + "/name", "duplicate zone name");
    z.polygon = detail::polygon_at(zj["polygon"], at + "/polygon");
    if (z.kind == ZoneKind::road) {
      if (!zj.contains("direction")) throw SchemaError(at + "/direction", "roads need a direction");
      z.direction = detail::point_at(zj["direction"], at + "/direction");
      if (std::hypot(z.direction->x, z.direction->y) < 1e-12) {
        throw SchemaError(at + "/direction", "direction must be nonzero");
      }
      if (zj.contains("two_way")) {
        if (!zj["two_way"].is_boolean()) throw SchemaError(at + "/two_way", "expected a boolean");
        z.two_way = zj["two_way"].get<bool>();
      }
    } else {
      if (zj.contains("direction")) throw SchemaError(at + "/direction", "only roads have a direction");
      if (zj.contains("two_way")) throw SchemaError(at + "/two_way", "only roads can be two-way");
    }
    doc.zones.push_back(std::move(z));
  }

  const auto& tasks = j["tasks"];
  if (!tasks.is_array()) throw SchemaError("/tasks", "expected an array");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto at = "/tasks/" + std::to_string(i);
    detail::require_keys(tasks[i], at, {"start", "goal"}, {"name"});
    NamedTask t;
    t.name = tasks[i].contains("name") ? detail::string_at(tasks[i]["name"], at + "/name")
                                       : "task" + std::to_string(i);
    t.start = detail::cell_at(tasks[i]["start"], at + "/start");
    t.goal = detail::cell_at(tasks[i]["goal"], at + "/goal");
    if (!doc.env.free(t.start)) throw SchemaError(at + "/start", "must be a free cell");
    if (!doc.env.free(t.goal)) throw SchemaError(at + "/goal", "must be a free cell");
    if (t.start == t.goal) throw SchemaError(at, "start and goal must differ");
    doc.tasks.push_back(std::move(t));
  }

  if (j.contains("areas")) {
    const auto& areas = j["areas"];
    if (!areas.is_array()) throw SchemaError("/areas", "expected an array");
    for (std::size_t i = 0; i < areas.size(); ++i) {
      const auto at = "/areas/" + std::to_string(i);
      detail::require_keys(areas[i], at, {"name", "polygon"}, {});
      doc.areas.push_back({detail::string_at(areas[i]["name"], at + "/name"),
                           detail::polygon_at(areas[i]["polygon"], at + "/polygon")});
    }
  }
  return doc;
}

/// Parses document text; syntax errors report the byte offset.
inline EnvironmentDocument parse_environment(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("/", "syntax error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return parse_environment(j);
}

/// Canonical form: every optional field written out.
inline nlohmann::json serialize_environment(const EnvironmentDocument& doc) {
  using detail::json;
  json j;
  j["name"] = doc.name;
  j["grid"] = doc.env.grid;
  j["cell_size_m"] = doc.env.cell_size_m;
  j["speeds_mps"] = doc.env.speeds_mps;
  json zones = json::array();
  for (const auto& z : doc.zones) {
    json zj;
    zj["name"] = z.name;
    zj["kind"] = to_string(z.kind);
    zj["polygon"] = detail::to_json(z.polygon);
    if (z.kind == ZoneKind::road) {
      zj["direction"] = detail::to_json(*z.direction);
      zj["two_way"] = z.two_way;
    }
    zones.push_back(std::move(zj));
  }
  j["zones"] = std::move(zones);
  json tasks = json::array();
  for (const auto& t : doc.tasks) {
    tasks.push_back({{"name", t.name}, {"start", detail::to_json(t.start)}, {"goal", detail::to_json(t.goal)}});
  }
  j["tasks"] = std::move(tasks);
  json areas = json::array();
  for (const auto& a : doc.areas) areas.push_back({{"name", a.name}, {"polygon", detail::to_json(a.polygon)}});
  j["areas"] = std::move(areas);
  return j;
}

inline EnvironmentDocument load_environment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open environment file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_environment(buffer.str());
}

/// Everything the learner needs, derived from a document.
struct World {
  EnvironmentDocument document;
  GridGraph grid;
  CompiledSpecification compiled;
  std::vector<Task> tasks;
  std::shared_ptr<const RoutingProblem> problem;

  [[nodiscard]] const Multigraph& graph() const noexcept { return grid.graph; }
  [[nodiscard]] const Specification& spec() const noexcept { return compiled.spec; }
};

inline std::shared_ptr<const World> build_world(EnvironmentDocument doc) {
  auto world = std::make_shared<World>();
  world->grid = build_graph(doc.env);
  world->compiled = compile_zones(doc.zones, doc.env, world->grid);
  for (const auto& t : doc.tasks) {
    const auto s = world->grid.vertex(t.start);
    const auto g = world->grid.vertex(t.goal);
    if (!s || !g) throw EnvironmentError("task " + t.name + " endpoint is not a free cell");
    world->tasks.push_back(Task{*s, *g, t.name});
  }
  world->problem = std::make_shared<const RoutingProblem>(
      RoutingProblem{world->grid.graph, world->compiled.spec, world->tasks});
  world->document = std::move(doc);
  return world;
}

}  // namespace specrev

#endif  // SPECREV_DOCUMENT_HPP
