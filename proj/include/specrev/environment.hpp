#ifndef SPECREV_ENVIRONMENT_HPP
#define SPECREV_ENVIRONMENT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "specrev/graph.hpp"

namespace specrev {

/// Reward lower-bound slack: l = -(1 - eps) * t_min / mu.
inline constexpr double kRewardEpsilon = 1e-3;

struct Cell {
  int row{};
  int col{};
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct Point {
  double x{};
  double y{};
  friend bool operator==(const Point&, const Point&) = default;
};

/// Occupancy grid ('#' occupied, '.' free) with speed tiers, fastest first.
struct Environment {
  std::vector<std::string> grid;
  double cell_size_m{1.0};
  std::vector<double> speeds_mps{1.0, 0.5};

  [[nodiscard]] int rows() const noexcept { return static_cast<int>(grid.size()); }
  [[nodiscard]] int cols() const noexcept { return grid.empty() ? 0 : static_cast<int>(grid.front().size()); }
  [[nodiscard]] bool inside(Cell c) const noexcept {
    return c.row >= 0 && c.col >= 0 && c.row < rows() && c.col < cols();
  }
  [[nodiscard]] bool free(Cell c) const noexcept {
    return inside(c) && grid[static_cast<std::size_t>(c.row)][static_cast<std::size_t>(c.col)] == '.';
  }
  /// Map coordinates (meters) of a cell center; x grows with columns, y with rows.
  [[nodiscard]] Point center(Cell c) const noexcept {
    return {(c.col + 0.5) * cell_size_m, (c.row + 0.5) * cell_size_m};
  }
};

enum class ZoneKind { road, avoid, speed_limit };

inline const char* to_string(ZoneKind kind) noexcept {
  switch (kind) {
    case ZoneKind::road: return "road";
    case ZoneKind::avoid: return "avoid";
    case ZoneKind::speed_limit: return "speed_limit";
  }
  return "?";
}

struct Zone {
  std::string name;
  ZoneKind kind{ZoneKind::avoid};
  std::vector<Point> polygon;
  std::optional<Point> direction;  // roads only
  bool two_way{false};             // roads only
};

struct NamedTask {
  std::string name;
  Cell start;
  Cell goal;
};

struct Area {
  std::string name;
  std::vector<Point> polygon;
};

struct EnvironmentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

namespace geometry {

inline double cross(Point o, Point a, Point b) noexcept {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline bool segments_intersect(Point p1, Point p2, Point q1, Point q2) noexcept {
  auto sign = [](double v) { return (v > 1e-12) - (v < -1e-12); };
  const int d1 = sign(cross(q1, q2, p1));
  const int d2 = sign(cross(q1, q2, p2));
  const int d3 = sign(cross(p1, p2, q1));
  const int d4 = sign(cross(p1, p2, q2));
  if (d1 != d2 && d3 != d4 && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0) return true;
  auto on_segment = [](Point a, Point b, Point p) {
    return std::min(a.x, b.x) - 1e-12 <= p.x && p.x <= std::max(a.x, b.x) + 1e-12 &&
           std::min(a.y, b.y) - 1e-12 <= p.y && p.y <= std::max(a.y, b.y) + 1e-12;
  };
  return (d1 == 0 && on_segment(q1, q2, p1)) || (d2 == 0 && on_segment(q1, q2, p2)) ||
         (d3 == 0 && on_segment(p1, p2, q1)) || (d4 == 0 && on_segment(p1, p2, q2));
}

/// At least three vertices and no two non-adjacent sides touching.
inline bool is_simple_polygon(const std::vector<Point>& poly) {
  const auto n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
    }
  }
  double area = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    area += poly[i].x * poly[(i + 1) % n].y - poly[(i + 1) % n].x * poly[i].y;
  }
  return std::abs(area) > 1e-12;
}

/// Even-odd containment.
inline bool contains(const std::vector<Point>& poly, Point p) noexcept {
  bool inside = false;
  const auto n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
      inside = !inside;
    }
  }
  return inside;
}

inline Point centroid(const std::vector<Point>& poly) noexcept {
  Point c;
  for (const auto& p : poly) {
    c.x += p.x;
    c.y += p.y;
  }
  c.x /= static_cast<double>(poly.size());
  c.y /= static_cast<double>(poly.size());
  return c;
}

}  // namespace geometry

inline void validate_environment(const Environment& env) {
  if (env.grid.empty() || env.cols() == 0) throw EnvironmentError("grid is empty");
  for (const auto& row : env.grid) {
    if (static_cast<int>(row.size()) != env.cols()) throw EnvironmentError("grid rows differ in length");
    if (row.find_first_not_of(".#") != std::string::npos) {
      throw EnvironmentError("grid may only contain '.' and '#'");
    }
  }
  if (!(env.cell_size_m > 0.0)) throw EnvironmentError("cell_size_m must be positive");
  if (env.speeds_mps.empty()) throw EnvironmentError("at least one speed tier is required");
  for (std::size_t i = 0; i < env.speeds_mps.size(); ++i) {
    if (!(env.speeds_mps[i] > 0.0)) throw EnvironmentError("speeds must be positive");
    if (i > 0 && !(env.speeds_mps[i] < env.speeds_mps[i - 1])) {
      throw EnvironmentError("speeds must be strictly decreasing");
    }
  }
}

inline void validate_zone(const Zone& zone) {
  if (!geometry::is_simple_polygon(zone.polygon)) {
    throw EnvironmentError("zone " + zone.name + ": polygon must be simple with at least 3 points");
  }
  if (zone.kind == ZoneKind::road) {
    if (!zone.direction) throw EnvironmentError("road " + zone.name + " needs a direction");
    if (std::hypot(zone.direction->x, zone.direction->y) < 1e-12) {
      throw EnvironmentError("road " + zone.name + " has a zero direction");
    }
  } else if (zone.direction || zone.two_way) {
    throw EnvironmentError("zone " + zone.name + ": direction and two_way apply to roads only");
  }
}

/// Multigraph built from a grid, with the cell <-> vertex correspondence.
struct GridGraph {
  Multigraph graph;
  std::vector<Cell> cells;        // by vertex id
  std::vector<int> vertex_index;  // by row-major cell index, -1 when occupied
  int cols{};

  [[nodiscard]] std::optional<VertexId> vertex(Cell c) const {
    if (c.row < 0 || c.col < 0 || c.col >= cols) return std::nullopt;
    const auto idx = static_cast<std::size_t>(c.row) * static_cast<std::size_t>(cols) +
                     static_cast<std::size_t>(c.col);
    if (idx >= vertex_index.size() || vertex_index[idx] < 0) return std::nullopt;
    return static_cast<VertexId>(vertex_index[idx]);
  }
};

/// Neighbor offsets (drow, dcol) in edge-creation order.
inline constexpr int kNeighborOffsets[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                                               {0, 1},   {1, -1},  {1, 0},  {1, 1}};

/// One vertex per free cell (row-major ids); for every ordered pair of
/// 8-connected free cells, one edge per speed tier (fastest first).
inline GridGraph build_graph(const Environment& env) {
  validate_environment(env);
  GridGraph out;
  out.cols = env.cols();
  out.vertex_index.assign(static_cast<std::size_t>(env.rows() * env.cols()), -1);
  for (int r = 0; r < env.rows(); ++r) {
    for (int c = 0; c < env.cols(); ++c) {
      if (!env.free({r, c})) continue;
      out.vertex_index[static_cast<std::size_t>(r * env.cols() + c)] =
          static_cast<int>(out.graph.add_vertex("r" + std::to_string(r) + "c" + std::to_string(c)));
      out.cells.push_back({r, c});
    }
  }
  if (out.cells.empty()) throw EnvironmentError("grid has no free cell");
  for (VertexId v = 0; v < out.cells.size(); ++v) {
    const auto cell = out.cells[v];
    for (const auto& off : kNeighborOffsets) {
      const Cell n{cell.row + off[0], cell.col + off[1]};
      const auto w = out.vertex(n);
      if (!w || !env.free(n)) continue;
      const double dist = std::hypot(off[0], off[1]) * env.cell_size_m;
      for (std::size_t tier = 0; tier < env.speeds_mps.size(); ++tier) {
        out.graph.add_edge(v, *w, dist / env.speeds_mps[tier], static_cast<std::uint32_t>(tier));
      }
    }
  }
  if (out.cells.size() > 1 && !out.graph.is_strongly_connected()) {
    throw EnvironmentError("free space is not connected");
  }
  return out;
}

struct CompiledSpecification {
  Specification spec;
  std::vector<std::size_t> zone_of_constraint;  // originating zone index per coordinate
  std::vector<std::string> warnings;
};

namespace detail {

inline Point edge_midpoint(const Environment& env, const GridGraph& gg, const Edge& e) {
  const auto a = env.center(gg.cells[e.tail]);
  const auto b = env.center(gg.cells[e.head]);
  return {(a.x + b.x) / 2.0, (a.y + b.y) / 2.0};
}

inline Point edge_heading(const GridGraph& gg, const Edge& e) {
  const auto a = gg.cells[e.tail];
  const auto b = gg.cells[e.head];
  return {static_cast<double>(b.col - a.col), static_cast<double>(b.row - a.row)};
}

// cos(45°) with slack so exact diagonal headings count as within 45°.
inline constexpr double kHeadingCosine = 0.70710678118654752440 - 1e-9;

inline bool within_45(Point heading, Point dir) {
  const double dot = heading.x * dir.x + heading.y * dir.y;
  return dot >= kHeadingCosine * std::hypot(heading.x, heading.y) * std::hypot(dir.x, dir.y);
}

struct Draft {
  std::string id;
  ConstraintKind kind;
  std::vector<EdgeId> edges;
  std::size_t zone;
};

}  // namespace detail

/// Zones -> constraints. Avoid: every in-zone edge. Speed limit: in-zone edges
/// on tiers faster than the slowest. One-way road: reward on in-zone edges
/// within 45° of the direction, penalty on edges within 45° of its reverse.
/// Two-way road: the polygon is split along the direction through its centroid
/// into two opposing one-way lanes (right-hand side keeps the given direction).
/// Bounds: penalty [0, sum t(e)], reward [-(1 - eps) t_min / mu, 0].
inline CompiledSpecification compile_zones(const std::vector<Zone>& zones, const Environment& env,
                                           const GridGraph& gg) {
  CompiledSpecification out;
  const auto& g = gg.graph;
  std::vector<detail::Draft> drafts;
  const auto slowest = env.speeds_mps.size() - 1;

  auto emit = [&](std::string id, ConstraintKind kind, std::vector<EdgeId> edges, std::size_t zone) {
    if (edges.empty()) {
      out.warnings.push_back("constraint " + id + " covers no edges and was omitted");
      return;
    }
    drafts.push_back({std::move(id), kind, std::move(edges), zone});
  };

  for (std::size_t z = 0; z < zones.size(); ++z) {
    const auto& zone = zones[z];
    validate_zone(zone);
    const auto base = zone.name.empty() ? std::string(to_string(zone.kind)) + std::to_string(z) : zone.name;
    std::vector<EdgeId> inside;
    for (const auto& e : g.edges()) {
      if (geometry::contains(zone.polygon, detail::edge_midpoint(env, gg, e))) inside.push_back(e.id);
    }
    switch (zone.kind) {
      case ZoneKind::avoid:
        emit(base + "/avoid", ConstraintKind::penalty, inside, z);
        break;
      case ZoneKind::speed_limit: {
        std::vector<EdgeId> fast;
        for (auto id : inside) {
          if (g.edge(id).tier < slowest) fast.push_back(id);
        }
        emit(base + "/speed", ConstraintKind::penalty, fast, z);
        break;
      }
      case ZoneKind::road: {
        const Point dir = *zone.direction;
        const Point rev{-dir.x, -dir.y};
        auto lane = [&](const std::vector<EdgeId>& edges, Point along, const std::string& id) {
          std::vector<EdgeId> with, against;
          for (auto e : edges) {
            const auto h = detail::edge_heading(gg, g.edge(e));
            if (detail::within_45(h, along)) with.push_back(e);
            else if (detail::within_45(h, Point{-along.x, -along.y})) against.push_back(e);
          }
          emit(id + "/reward", ConstraintKind::reward, with, z);
          emit(id + "/penalty", ConstraintKind::penalty, against, z);
        };
        if (!zone.two_way) {
          lane(inside, dir, base);
        } else {
          const auto c = geometry::centroid(zone.polygon);
          std::vector<EdgeId> right, left;
          for (auto e : inside) {
            const auto m = detail::edge_midpoint(env, gg, g.edge(e));
            // With y pointing down the map, cross >= 0 is the right-hand side.
            const double side = dir.x * (m.y - c.y) - dir.y * (m.x - c.x);
            (side >= 0.0 ? right : left).push_back(e);
          }
          lane(right, dir, base + "/fwd");
          lane(left, rev, base + "/back");
        }
        break;
      }
    }
  }

  std::vector<int> reward_count(g.edge_count(), 0);
  for (const auto& d : drafts) {
    if (d.kind == ConstraintKind::reward) {
      for (auto e : d.edges) ++reward_count[e];
    }
  }
  const double total = g.total_time();
  std::vector<Constraint> constraints;
  for (auto& d : drafts) {
    Constraint c{d.id, d.kind, std::move(d.edges), 0.0, 0.0};
    if (c.kind == ConstraintKind::penalty) {
      c.upper = total;
    } else {
      double t_min = std::numeric_limits<double>::infinity();
      int mu = 1;
      for (auto e : c.edges) {
        t_min = std::min(t_min, g.edge(e).time);
        mu = std::max(mu, reward_count[e]);
      }
      c.lower = -(1.0 - kRewardEpsilon) * t_min / mu;
    }
    constraints.push_back(std::move(c));
    out.zone_of_constraint.push_back(d.zone);
  }
  out.spec = Specification(std::move(constraints), g.edge_count());
  return out;
}

}  // namespace specrev

#endif  // SPECREV_ENVIRONMENT_HPP
