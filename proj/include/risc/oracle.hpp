#pragma once

#include <cmath>
#include <deque>
#include <optional>
#include <vector>

#include "risc/env.hpp"

namespace risc::oracle {

/// BFS step counts to a goal. `std::nullopt` marks states that cannot reach it.
struct DistanceTable {
  Goal goal;
  std::vector<std::optional<int>> dist;

  std::optional<int> operator[](StateId s) const { return dist.at(s); }
};

/// Optimal state values under the terminate-on-entry sparse reward.
struct ValueTable {
  Goal goal;
  double gamma = 1.0;
  double tolerance = 1e-10;
  std::vector<double> values;
  std::size_t sweeps = 0;

  double operator[](StateId s) const { return values.at(s); }
};

template <TabularMdp Mdp>
DistanceTable shortest_paths(const Mdp& mdp, const Goal& goal) {
  const std::size_t n = mdp.num_states();
  std::vector<std::vector<StateId>> predecessors(n);
  for (StateId s = 0; s < n; ++s)
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      StateId next = mdp.next_state(s, a);
      if (next != s) predecessors[next].push_back(s);
    }
  DistanceTable out{goal, std::vector<std::optional<int>>(n)};
  out.dist[goal.state] = 0;
  std::deque<StateId> frontier{goal.state};
  while (!frontier.empty()) {
    StateId s = frontier.front();
    frontier.pop_front();
    for (StateId p : predecessors[s])
      if (!out.dist[p]) {
        out.dist[p] = *out.dist[s] + 1;
        frontier.push_back(p);
      }
  }
  return out;
}

/// Synchronous value iteration, sweeping states in index order until the sup-norm
/// change drops below `tolerance`. V(goal) is pinned to 0.
template <TabularMdp Mdp>
ValueTable value_iteration(const Mdp& mdp, const Goal& goal, double gamma, double tolerance = 1e-10) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw UsageError("value_iteration: gamma must lie in (0, 1]");
  if (!(tolerance > 0.0)) throw UsageError("value_iteration: tolerance must be positive");
  const std::size_t n = mdp.num_states();
  ValueTable out{goal, gamma, tolerance, std::vector<double>(n, 0.0), 0};
  std::vector<double> next(n, 0.0);
  // Under gamma = 1 the fixed point is reached after at most n sweeps; the cap only
  // guards against pathological inputs.
  const std::size_t max_sweeps = 1'000'000;
  for (; out.sweeps < max_sweeps; ++out.sweeps) {
    double delta = 0.0;
    for (StateId s = 0; s < n; ++s) {
      if (s == goal.state) {
        next[s] = 0.0;
        continue;
      }
      double best = 0.0;
      for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        StateId sp = mdp.next_state(s, a);
        double q = sp == goal.state ? 1.0 : gamma * out.values[sp];
        best = std::max(best, q);
      }
      next[s] = best;
      delta = std::max(delta, std::abs(best - out.values[s]));
    }
    out.values.swap(next);
    if (delta < tolerance) break;
  }
  return out;
}

/// Fixed point of the success-critic recursion under an optimal policy:
/// a one-step success scores 1, each further step multiplies by gamma_sc.
inline double optimal_competency(int dist, double gamma_sc) {
  if (dist <= 0) throw UsageError("optimal_competency: distance must be at least 1");
  return std::pow(gamma_sc, dist - 1);
}

}  // namespace risc::oracle
