#ifndef SPECREV_POLYTOPE_HPP
#define SPECREV_POLYTOPE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "specrev/graph.hpp"

namespace specrev {

/// Feasibility tolerance for vertices and containment tests.
inline constexpr double kFeasibilityTolerance = 1e-7;
/// Cost-equality tolerance for the weight equivalence test.
inline constexpr double kEquivalenceTolerance = 1e-6;

struct HalfSpace {
  std::vector<double> normal;
  double offset{};

  [[nodiscard]] double slack(std::span<const double> w) const {
    double lhs = 0.0;
    for (std::size_t k = 0; k < normal.size(); ++k) lhs += normal[k] * w[k];
    return offset - lhs;
  }
};

/// Box bounds plus accumulated half-spaces a·w <= b.
///
/// Constraint indices used by the LP and by vertex active sets:
///   [0, d)          lower bound of coordinate j   (-e_j · w <= -l_j)
///   [d, 2d)         upper bound of coordinate j   ( e_j · w <=  u_j)
///   [2d, 2d + m)    preference row i
/// Refinement returns a new value; existing rows are never modified.
class FeasibleSpace {
public:
  FeasibleSpace() = default;

  FeasibleSpace(std::vector<double> lower, std::vector<double> upper)
      : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() != upper_.size()) throw DimensionMismatch(lower_.size(), upper_.size());
    for (std::size_t j = 0; j < lower_.size(); ++j) {
      if (!(lower_[j] <= upper_[j])) throw std::invalid_argument("lower bound exceeds upper bound");
    }
  }

  [[nodiscard]] std::size_t dimension() const noexcept { return lower_.size(); }
  [[nodiscard]] const std::vector<double>& lower() const noexcept { return lower_; }
  [[nodiscard]] const std::vector<double>& upper() const noexcept { return upper_; }
  [[nodiscard]] const std::vector<HalfSpace>& rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t constraint_count() const noexcept { return 2 * dimension() + rows_.size(); }

  /// Appends a·w <= b. Zero normals are dropped (returns the space unchanged).
  [[nodiscard]] FeasibleSpace with_row(HalfSpace row) const {
    if (row.normal.size() != dimension()) throw DimensionMismatch(dimension(), row.normal.size());
    FeasibleSpace next = *this;
    if (std::any_of(row.normal.begin(), row.normal.end(), [](double a) { return a != 0.0; })) {
      next.rows_.push_back(std::move(row));
    }
    return next;
  }

  /// The space restricted to its first `count` rows.
  [[nodiscard]] FeasibleSpace prefix(std::size_t count) const {
    FeasibleSpace p = *this;
    p.rows_.resize(std::min(count, rows_.size()));
    return p;
  }

  [[nodiscard]] FeasibleSpace with_bounds(std::vector<double> lower, std::vector<double> upper) const {
    FeasibleSpace p(std::move(lower), std::move(upper));
    p.rows_ = rows_;
    return p;
  }

  /// Constraint `i` as a·w <= b, in the index layout described above.
  [[nodiscard]] double constraint_dot(std::size_t i, std::span<const double> w) const {
    const auto d = dimension();
    if (i < d) return -w[i];
    if (i < 2 * d) return w[i - d];
    const auto& a = rows_[i - 2 * d].normal;
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += a[k] * w[k];
    return s;
  }
  [[nodiscard]] double constraint_offset(std::size_t i) const {
    const auto d = dimension();
    if (i < d) return -lower_[i];
    if (i < 2 * d) return upper_[i - d];
    return rows_[i - 2 * d].offset;
  }
  [[nodiscard]] Eigen::VectorXd constraint_normal(std::size_t i) const {
    const auto d = dimension();
    Eigen::VectorXd a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    if (i < d) {
      a[static_cast<Eigen::Index>(i)] = -1.0;
    } else if (i < 2 * d) {
      a[static_cast<Eigen::Index>(i - d)] = 1.0;
    } else {
      const auto& n = rows_[i - 2 * d].normal;
      for (std::size_t k = 0; k < d; ++k) a[static_cast<Eigen::Index>(k)] = n[k];
    }
    return a;
  }

  /// Violation of constraint i at w (positive when violated).
  [[nodiscard]] double violation(std::size_t i, std::span<const double> w) const {
    return constraint_dot(i, w) - constraint_offset(i);
  }

  [[nodiscard]] bool contains(std::span<const double> w, double tol = kFeasibilityTolerance) const {
    if (w.size() != dimension()) throw DimensionMismatch(dimension(), w.size());
    for (std::size_t i = 0; i < constraint_count(); ++i) {
      if (violation(i, w) > tol) return false;
    }
    return true;
  }

private:
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<HalfSpace> rows_;
};

struct PolytopeVertex {
  WeightVector w;
  std::vector<std::size_t> basis;   // d constraint indices with independent normals, ascending
  std::vector<std::size_t> active;  // every constraint tight at w, ascending
};

inline FeasibleSpace init_feasible_space(const Specification& spec) {
  return FeasibleSpace(spec.lower_bounds(), spec.upper_bounds());
}

/// Appends (phi_chosen - phi_rejected)·w <= t(rejected) - t(chosen).
inline FeasibleSpace add_preference(const FeasibleSpace& space, const Path& chosen,
                                    const Path& rejected) {
  const auto d = space.dimension();
  if (chosen.features.size() != d) throw DimensionMismatch(d, chosen.features.size());
  if (rejected.features.size() != d) throw DimensionMismatch(d, rejected.features.size());
  HalfSpace row;
  row.normal.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    row.normal[k] = static_cast<double>(chosen.features[k] - rejected.features[k]);
  }
  row.offset = rejected.duration - chosen.duration;
  return space.with_row(std::move(row));
}

/// Preference row for (chosen, rejected), or nullopt when the normal vanishes.
inline std::optional<HalfSpace> preference_row(const Path& chosen, const Path& rejected) {
  if (chosen.features.size() != rejected.features.size()) {
    throw DimensionMismatch(chosen.features.size(), rejected.features.size());
  }
  HalfSpace row;
  bool informative = false;
  for (std::size_t k = 0; k < chosen.features.size(); ++k) {
    row.normal.push_back(static_cast<double>(chosen.features[k] - rejected.features[k]));
    informative = informative || row.normal.back() != 0.0;
  }
  row.offset = rejected.duration - chosen.duration;
  if (!informative) return std::nullopt;
  return row;
}

namespace detail {

/// Dense constraint system a_i·x <= b_i over which the active-set simplex runs.
struct ConstraintSystem {
  Eigen::MatrixXd a;  // one row per constraint
  Eigen::VectorXd b;

  [[nodiscard]] Eigen::Index size() const { return a.rows(); }
  [[nodiscard]] Eigen::Index dim() const { return a.cols(); }

  static ConstraintSystem from(const FeasibleSpace& space) {
    const auto d = static_cast<Eigen::Index>(space.dimension());
    const auto n = static_cast<Eigen::Index>(space.constraint_count());
    ConstraintSystem sys{Eigen::MatrixXd::Zero(n, d), Eigen::VectorXd::Zero(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
      sys.a.row(i) = space.constraint_normal(static_cast<std::size_t>(i)).transpose();
      sys.b[i] = space.constraint_offset(static_cast<std::size_t>(i));
    }
    return sys;
  }
};

struct Basis {
  std::vector<Eigen::Index> rows;  // ascending constraint indices
  Eigen::MatrixXd inverse;         // inverse of the stacked basis normals
  Eigen::VectorXd x;
};

inline std::optional<Basis> factor(const ConstraintSystem& sys, std::vector<Eigen::Index> rows) {
  std::sort(rows.begin(), rows.end());
  const auto d = sys.dim();
  Eigen::MatrixXd m(d, d);
  Eigen::VectorXd rhs(d);
  for (Eigen::Index r = 0; r < d; ++r) {
    m.row(r) = sys.a.row(rows[static_cast<std::size_t>(r)]);
    rhs[r] = sys.b[rows[static_cast<std::size_t>(r)]];
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  lu.setThreshold(1e-10);
  if (!lu.isInvertible()) return std::nullopt;
  Basis basis{std::move(rows), lu.inverse(), {}};
  basis.x = basis.inverse * rhs;
  return basis;
}

// Edge direction obtained by releasing basis position `pos`: stays tight on
// the other basis constraints and moves strictly into constraint pos.
inline Eigen::VectorXd release_direction(const Basis& basis, Eigen::Index pos) {
  return -basis.inverse.col(pos);
}

inline double scale_of(const ConstraintSystem& sys, Eigen::Index i) {
  return std::max(1.0, std::abs(sys.b[i]));
}

struct RatioResult {
  Eigen::Index blocking = -1;
  double step = 0.0;
};

// Smallest step along dir before a non-basis constraint becomes tight;
// ties resolved by smallest constraint index.
inline RatioResult ratio_test(const ConstraintSystem& sys, const Basis& basis,
                              const Eigen::VectorXd& dir) {
  RatioResult best;
  double best_step = std::numeric_limits<double>::infinity();
  const Eigen::VectorXd ad = sys.a * dir;
  const Eigen::VectorXd ax = sys.a * basis.x;
  for (Eigen::Index i = 0; i < sys.size(); ++i) {
    if (std::binary_search(basis.rows.begin(), basis.rows.end(), i)) continue;
    if (ad[i] <= 1e-12 * std::max(1.0, dir.lpNorm<Eigen::Infinity>())) continue;
    const double slack = std::max(0.0, sys.b[i] - ax[i]);
    const double step = slack / ad[i];
    if (best.blocking < 0 || step < best_step - 1e-12 * std::max(1.0, best_step)) {
      best_step = step;
      best.blocking = i;
    }
  }
  best.step = best_step;
  return best;
}

enum class SimplexStatus { optimal, iteration_limit };

/// Active-set primal simplex from a feasible basis, Bland's smallest-index rule.
inline SimplexStatus simplex(const ConstraintSystem& sys, const Eigen::VectorXd& c, Basis& basis,
                             std::size_t max_iterations = 20000) {
  const auto d = sys.dim();
  const double c_scale = std::max(1.0, c.lpNorm<Eigen::Infinity>());
  for (std::size_t it = 0; it < max_iterations; ++it) {
    Eigen::Index leave_pos = -1;
    Eigen::VectorXd dir;
    for (Eigen::Index pos = 0; pos < d; ++pos) {
      Eigen::VectorXd candidate = release_direction(basis, pos);
      if (c.dot(candidate) < -1e-11 * c_scale * std::max(1.0, candidate.lpNorm<Eigen::Infinity>())) {
        leave_pos = pos;
        dir = std::move(candidate);
        break;
      }
    }
    if (leave_pos < 0) return SimplexStatus::optimal;
    const auto ratio = ratio_test(sys, basis, dir);
    if (ratio.blocking < 0) throw std::logic_error("unbounded direction in a bounded polytope");
    auto rows = basis.rows;
    rows[static_cast<std::size_t>(leave_pos)] = ratio.blocking;
    auto next = factor(sys, std::move(rows));
    if (!next) throw std::logic_error("simplex pivot produced a singular basis");
    basis = std::move(*next);
  }
  return SimplexStatus::iteration_limit;
}

inline std::vector<std::size_t> tight_set(const FeasibleSpace& space, std::span<const double> w) {
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < space.constraint_count(); ++i) {
    const double scale = std::max(1.0, std::abs(space.constraint_offset(i)));
    if (std::abs(space.violation(i, w)) <= kFeasibilityTolerance * scale) active.push_back(i);
  }
  return active;
}

inline PolytopeVertex to_vertex(const FeasibleSpace& space, const Basis& basis) {
  PolytopeVertex v;
  v.w.assign(basis.x.data(), basis.x.data() + basis.x.size());
  for (auto r : basis.rows) v.basis.push_back(static_cast<std::size_t>(r));
  v.active = tight_set(space, v.w);
  return v;
}

/// Finds any feasible basis via an auxiliary variable z that relaxes every row.
inline std::optional<Basis> feasible_basis(const FeasibleSpace& space, const ConstraintSystem& sys) {
  const auto d = static_cast<Eigen::Index>(space.dimension());
  const auto n = sys.size();
  std::vector<Eigen::Index> lower_rows(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) lower_rows[static_cast<std::size_t>(j)] = j;

  Eigen::VectorXd corner(d);
  for (Eigen::Index j = 0; j < d; ++j) corner[j] = space.lower()[static_cast<std::size_t>(j)];
  double worst = 0.0;
  Eigen::Index worst_row = -1;
  for (Eigen::Index i = 2 * d; i < n; ++i) {
    const double v = sys.a.row(i).dot(corner) - sys.b[i];
    if (v > worst) {
      worst = v;
      worst_row = i;
    }
  }
  if (worst <= 0.0) return factor(sys, lower_rows);

  // Auxiliary system over (w, z): rows become a·w - z <= b; z >= 0; z <= worst + 1.
  ConstraintSystem aux{Eigen::MatrixXd::Zero(n + 2, d + 1), Eigen::VectorXd::Zero(n + 2)};
  aux.a.topLeftCorner(n, d) = sys.a;
  aux.b.head(n) = sys.b;
  for (Eigen::Index i = 2 * d; i < n; ++i) aux.a(i, d) = -1.0;
  aux.a(n, d) = -1.0;  // z >= 0
  aux.b[n] = 0.0;
  aux.a(n + 1, d) = 1.0;  // z <= worst + 1
  aux.b[n + 1] = worst + 1.0;

  auto rows = lower_rows;
  rows.push_back(worst_row);
  auto basis = factor(aux, rows);
  if (!basis) throw std::logic_error("auxiliary start basis is singular");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(d + 1);
  c[d] = 1.0;
  if (simplex(aux, c, *basis) != SimplexStatus::optimal) {
    throw std::runtime_error("feasibility search did not terminate");
  }
  const double z = basis->x[d];
  if (z > kFeasibilityTolerance * std::max(1.0, sys.b.lpNorm<Eigen::Infinity>())) return std::nullopt;

  auto aux_rows = basis->rows;
  const auto z_lower = n;
  if (!std::binary_search(aux_rows.begin(), aux_rows.end(), z_lower)) {
    // z is basic at zero: swap the z >= 0 constraint into the basis.
    bool swapped = false;
    for (std::size_t p = 0; p < aux_rows.size() && !swapped; ++p) {
      auto trial = aux_rows;
      trial[p] = z_lower;
      if (auto b = factor(aux, trial)) {
        aux_rows = b->rows;
        swapped = true;
      }
    }
    if (!swapped) throw std::logic_error("could not pivot auxiliary variable out of the basis");
  }
  std::vector<Eigen::Index> original;
  for (auto r : aux_rows) {
    if (r != z_lower) original.push_back(r);
  }
  return factor(sys, original);
}

}  // namespace detail

/// Optimal basic feasible solution of min c·w over the space, or nullopt when empty.
inline std::optional<PolytopeVertex> solve_lp(const FeasibleSpace& space, std::span<const double> c) {
  const auto d = space.dimension();
  if (c.size() != d) throw DimensionMismatch(d, c.size());
  if (d == 0) {
    for (const auto& row : space.rows()) {
      if (row.offset < -kFeasibilityTolerance) return std::nullopt;
    }
    return PolytopeVertex{};
  }
  const auto sys = detail::ConstraintSystem::from(space);
  auto basis = detail::feasible_basis(space, sys);
  if (!basis) return std::nullopt;
  Eigen::VectorXd objective(static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < d; ++k) objective[static_cast<Eigen::Index>(k)] = c[k];
  if (detail::simplex(sys, objective, *basis) != detail::SimplexStatus::optimal) {
    throw std::runtime_error("simplex iteration limit reached");
  }
  return detail::to_vertex(space, *basis);
}

inline bool same_point(std::span<const double> a, std::span<const double> b,
                       double tol = kFeasibilityTolerance) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (std::abs(a[k] - b[k]) > tol * std::max(1.0, std::abs(a[k]))) return false;
  }
  return true;
}

/// Points compared with same_point, indexed by coordinate sum so a lookup only
/// scans points whose sums could match.
class PointSet {
public:
  [[nodiscard]] bool contains(std::span<const double> w) const {
    const double s = sum(w);
    const double slack = window(w);
    for (auto it = points_.lower_bound(s - slack); it != points_.end() && it->first <= s + slack; ++it) {
      if (same_point(it->second, w)) return true;
    }
    return false;
  }
  /// Inserts w unless an equal point is present; returns whether it was inserted.
  bool insert(std::span<const double> w) {
    if (contains(w)) return false;
    points_.emplace(sum(w), std::vector<double>(w.begin(), w.end()));
    return true;
  }
  [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }

private:
  static double sum(std::span<const double> w) {
    double s = 0.0;
    for (double x : w) s += x;
    return s;
  }
  // Points within same_point tolerance of w have sums within this distance.
  static double window(std::span<const double> w) {
    double m = 1.0;
    for (double x : w) m = std::max(m, std::abs(x));
    return 2.0 * kFeasibilityTolerance * (m + 1.0) * static_cast<double>(w.size() + 1);
  }
  std::multimap<double, std::vector<double>> points_;
};

/// Vertices joined to v by an edge of the polytope. At degenerate vertices the
/// alternative bases of the same point are explored through zero-length pivots
/// (bounded), so some neighbors may be missed.
inline std::vector<PolytopeVertex> adjacent_vertices(const FeasibleSpace& space,
                                                     const PolytopeVertex& v,
                                                     std::size_t max_bases = 256) {
  std::vector<PolytopeVertex> result;
  const auto d = space.dimension();
  if (d == 0) return result;
  const auto sys = detail::ConstraintSystem::from(space);

  std::vector<Eigen::Index> start(v.basis.begin(), v.basis.end());
  auto first = detail::factor(sys, start);
  if (!first) throw std::invalid_argument("vertex basis is singular");

  std::set<std::vector<Eigen::Index>> seen{first->rows};
  std::deque<detail::Basis> pending;
  pending.push_back(std::move(*first));
  std::vector<std::pair<std::vector<std::size_t>, PolytopeVertex>> found;

  while (!pending.empty() && seen.size() <= max_bases) {
    const auto basis = std::move(pending.front());
    pending.pop_front();
    for (Eigen::Index pos = 0; pos < static_cast<Eigen::Index>(d); ++pos) {
      const Eigen::VectorXd dir = detail::release_direction(basis, pos);
      const auto ratio = detail::ratio_test(sys, basis, dir);
      if (ratio.blocking < 0) continue;
      auto rows = basis.rows;
      rows[static_cast<std::size_t>(pos)] = ratio.blocking;
      if (ratio.step * dir.lpNorm<Eigen::Infinity>() <=
          kFeasibilityTolerance * std::max(1.0, basis.x.lpNorm<Eigen::Infinity>())) {
        auto next = detail::factor(sys, rows);
        if (next && seen.insert(next->rows).second) pending.push_back(std::move(*next));
        continue;
      }
      // The swapped basis is nonsingular because the blocking row has a
      // positive component along dir; the new point is one step away.
      std::sort(rows.begin(), rows.end());
      const Eigen::VectorXd x = basis.x + ratio.step * dir;
      PolytopeVertex vertex;
      vertex.w.assign(x.data(), x.data() + x.size());
      for (auto r : rows) vertex.basis.push_back(static_cast<std::size_t>(r));
      vertex.active = detail::tight_set(space, vertex.w);
      if (same_point(vertex.w, v.w)) continue;
      const bool duplicate = std::any_of(found.begin(), found.end(), [&](const auto& f) {
        return same_point(f.second.w, vertex.w);
      });
      if (!duplicate) found.emplace_back(vertex.basis, std::move(vertex));
    }
  }
  std::sort(found.begin(), found.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& f : found) result.push_back(std::move(f.second));
  return result;
}

/// The basis of a vertex given only by its coordinates, or nullopt when w is
/// not a vertex of the space.
inline std::optional<PolytopeVertex> vertex_at(const FeasibleSpace& space, std::span<const double> w) {
  const auto d = space.dimension();
  if (w.size() != d) throw DimensionMismatch(d, w.size());
  if (!space.contains(w)) return std::nullopt;
  const auto active = detail::tight_set(space, w);
  if (active.size() < d) return std::nullopt;
  // Greedy independent subset in ascending index order.
  std::vector<std::size_t> chosen;
  Eigen::MatrixXd m(0, static_cast<Eigen::Index>(d));
  for (auto i : active) {
    Eigen::MatrixXd trial(m.rows() + 1, m.cols());
    trial << m, space.constraint_normal(i).transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(trial);
    lu.setThreshold(1e-10);
    if (lu.rank() == trial.rows()) {
      m = std::move(trial);
      chosen.push_back(i);
      if (chosen.size() == d) break;
    }
  }
  if (chosen.size() < d) return std::nullopt;
  const auto sys = detail::ConstraintSystem::from(space);
  auto basis = detail::factor(sys, std::vector<Eigen::Index>(chosen.begin(), chosen.end()));
  if (!basis) return std::nullopt;
  return detail::to_vertex(space, *basis);
}

/// argmax of the coordinate sum over the space.
inline std::optional<WeightVector> max_sum_vertex(const FeasibleSpace& space) {
  const std::vector<double> c(space.dimension(), -1.0);
  auto v = solve_lp(space, c);
  if (!v) return std::nullopt;
  return v->w;
}

/// True iff both weights share an optimal path for the task: each weight's
/// optimal path must also be optimal (within tolerance) under the other.
inline bool weights_equivalent(std::span<const double> w1, std::span<const double> w2,
                               const Multigraph& graph, const Specification& spec,
                               const Task& task) {
  const auto p1 = shortest_path(graph, spec, w1, task);
  const auto p2 = shortest_path(graph, spec, w2, task);
  auto close = [](double a, double b) {
    return std::abs(a - b) <= kEquivalenceTolerance * std::max(1.0, std::abs(a));
  };
  return close(path_cost(p2, w1), path_cost(p1, w1)) && close(path_cost(p1, w2), path_cost(p2, w2));
}

}  // namespace specrev

#endif  // SPECREV_POLYTOPE_HPP
