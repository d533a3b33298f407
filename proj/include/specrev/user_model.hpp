#ifndef SPECREV_USER_MODEL_HPP
#define SPECREV_USER_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include "specrev/graph.hpp"
#include "specrev/learning.hpp"

namespace specrev {

enum class TieRule { prefer_current, prefer_alternative };

inline TieRule parse_tie_rule(const std::string& s) {
  if (s == "prefer-current") return TieRule::prefer_current;
  if (s == "prefer-alternative") return TieRule::prefer_alternative;
  throw std::invalid_argument("tie rule must be prefer-current or prefer-alternative");
}

/// Answers queries with the linear cost phi . w_star + t of a hidden weight.
struct SimulatedUser {
  WeightVector w_star;
  TieRule ties = TieRule::prefer_current;
  double flip_probability = 0.0;  // noise hook; 0 keeps the user deterministic
  std::uint64_t noise_seed = 0;
};

/// Checks w_star lies in the specification's box.
inline void validate_user(const SimulatedUser& user, const Specification& spec) {
  check_dimension(spec, user.w_star);
  for (std::size_t k = 0; k < spec.dimension(); ++k) {
    const auto& c = spec.constraint(k);
    if (user.w_star[k] < c.lower || user.w_star[k] > c.upper) {
      throw std::invalid_argument("hidden weight for " + c.id + " lies outside its bounds");
    }
  }
}

inline Choice simulate_choice(const SimulatedUser& user, const Query& q) {
  const double cur = path_cost(q.current, user.w_star);
  const double alt = path_cost(q.alternative, user.w_star);
  Choice c;
  if (std::abs(cur - alt) <= kCostTieTolerance * std::max(1.0, std::abs(cur))) {
    c = user.ties == TieRule::prefer_current ? Choice::current : Choice::alternative;
  } else {
    c = alt < cur ? Choice::alternative : Choice::current;
  }
  if (user.flip_probability > 0.0) {
    // Seeded per query so answers do not depend on call history.
    std::mt19937_64 rng(user.noise_seed ^ (q.id * 0x9E3779B97F4A7C15ull));
    if (std::bernoulli_distribution(user.flip_probability)(rng)) {
      c = c == Choice::current ? Choice::alternative : Choice::current;
    }
  }
  return c;
}

/// Hidden weight drawn uniformly per coordinate within [l_k, u_k].
inline SimulatedUser random_user(const Specification& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SimulatedUser user;
  for (const auto& c : spec.constraints()) {
    user.w_star.push_back(std::uniform_real_distribution<double>(c.lower, c.upper)(rng));
  }
  return user;
}

}  // namespace specrev

#endif  // SPECREV_USER_MODEL_HPP
