#include <gtest/gtest.h>

#include <cmath>

#include "risc/env.hpp"
#include "risc/oracle.hpp"

using namespace risc;

namespace {

GridWorld open_room(int interior) {
  std::string map;
  const int n = interior + 2;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (r == 0 || c == 0 || r == n - 1 || c == n - 1) map += '#';
      else if (r == 1 && c == 1) map += 'S';
      else if (r == n - 2 && c == n - 2) map += 'G';
      else map += '.';
    }
    map += '\n';
  }
  return GridWorld(parse_map(map));
}

}  // namespace

TEST(ShortestPaths, OpenRoomCornerToCornerIsManhattan) {
  auto env = open_room(5);
  auto d = oracle::shortest_paths(env, env.goal(GoalKind::Forward));
  EXPECT_EQ(*d[env.start_state()], 8);
  EXPECT_EQ(*d[env.goal(GoalKind::Forward).state], 0);
  for (StateId s = 0; s < env.num_states(); ++s) {
    Cell c = env.cell_of(s);
    EXPECT_EQ(*d[s], (5 - c.row) + (5 - c.col));
  }
}

TEST(ShortestPaths, NeighbouringDistancesDifferByAtMostOne) {
  GridWorld env(four_rooms());
  auto d = oracle::shortest_paths(env, env.goal(GoalKind::Forward));
  for (StateId s = 0; s < env.num_states(); ++s)
    for (ActionId a = 0; a < env.num_actions(); ++a)
      EXPECT_LE(std::abs(*d[s] - *d[env.next_state(s, a)]), 1);
}

TEST(ValueIteration, ChainOfThree) {
  ChainMdp chain(3);
  auto v = oracle::value_iteration(chain, chain.goal(GoalKind::Forward), 0.9);
  EXPECT_NEAR(v[0], 0.81, 1e-9);
  EXPECT_NEAR(v[1], 0.9, 1e-9);
  EXPECT_NEAR(v[2], 1.0, 1e-9);
  EXPECT_EQ(v[3], 0.0);
}

TEST(ValueIteration, UndiscountedValueIsOneWhereverGoalIsReachable) {
  GridWorld env(four_rooms());
  auto v = oracle::value_iteration(env, env.goal(GoalKind::Forward), 1.0);
  for (StateId s = 0; s < env.num_states(); ++s)
    EXPECT_EQ(v[s], s == env.goal(GoalKind::Forward).state ? 0.0 : 1.0);
}

TEST(ValueIteration, MatchesGammaPowerOfDistanceAndSatisfiesBellman) {
  GridWorld env(four_rooms());
  for (GoalKind k : {GoalKind::Forward, GoalKind::Reset}) {
    const Goal g = env.goal(k);
    const double gamma = 0.95;
    auto v = oracle::value_iteration(env, g, gamma);
    auto d = oracle::shortest_paths(env, g);
    for (StateId s = 0; s < env.num_states(); ++s) {
      if (s == g.state) {
        EXPECT_EQ(v[s], 0.0);
        continue;
      }
      EXPECT_NEAR(v[s], std::pow(gamma, *d[s] - 1), 1e-8);
      double best = 0.0;
      for (ActionId a = 0; a < env.num_actions(); ++a) {
        StateId sp = env.next_state(s, a);
        best = std::max(best, sp == g.state ? 1.0 : gamma * v[sp]);
      }
      EXPECT_LT(std::abs(best - v[s]), 1e-8);
    }
  }
}

TEST(ValueIteration, ValuesDecreaseWithDistance) {
  GridWorld env(four_rooms());
  const Goal g = env.goal(GoalKind::Forward);
  auto v = oracle::value_iteration(env, g, 0.95);
  auto d = oracle::shortest_paths(env, g);
  for (StateId a = 0; a < env.num_states(); ++a)
    for (StateId b = 0; b < env.num_states(); ++b)
      if (a != g.state && b != g.state && *d[a] < *d[b]) {
        EXPECT_GT(v[a], v[b]);
      }
}

TEST(ValueIteration, RejectsBadArguments) {
  ChainMdp chain(2);
  EXPECT_THROW(oracle::value_iteration(chain, chain.goal(GoalKind::Forward), 0.0), UsageError);
  EXPECT_THROW(oracle::value_iteration(chain, chain.goal(GoalKind::Forward), 1.5), UsageError);
  EXPECT_THROW(oracle::value_iteration(chain, chain.goal(GoalKind::Forward), 0.9, 0.0), UsageError);
}

TEST(OptimalCompetency, PowersOfDiscount) {
  EXPECT_DOUBLE_EQ(oracle::optimal_competency(1, 0.95), 1.0);
  EXPECT_NEAR(oracle::optimal_competency(3, 0.95), 0.9025, 1e-12);
  EXPECT_NEAR(oracle::optimal_competency(5, 0.95), 0.81450625, 1e-12);
  EXPECT_THROW(oracle::optimal_competency(0, 0.95), UsageError);
  EXPECT_THROW(oracle::optimal_competency(-2, 0.95), UsageError);
}
