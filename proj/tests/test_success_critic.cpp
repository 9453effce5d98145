#include <gtest/gtest.h>

#include <cmath>

#include "risc/env.hpp"
#include "risc/oracle.hpp"
#include "risc/success_critic.hpp"

using namespace risc;

namespace {

Transition step_tr(StateId s, ActionId a, StateId next, const Goal& g) {
  const bool at_goal = next == g.state;
  return {s, g, a, at_goal ? 1.0 : 0.0, next, at_goal, false};
}

SuccessCriticConfig fast(double lr, std::size_t sync_every = 1) {
  SuccessCriticConfig cfg;
  cfg.lr = lr;
  cfg.target_sync_every = sync_every;
  return cfg;
}

// Every (s, a) transition of `mdp` under goal `g`, except those starting at the goal.
template <typename Mdp>
std::vector<Transition> all_transitions(const Mdp& mdp, const Goal& g) {
  std::vector<Transition> out;
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (s == g.state) continue;
    for (ActionId a = 0; a < mdp.num_actions(); ++a) out.push_back(step_tr(s, a, mdp.next_state(s, a), g));
  }
  return out;
}

}  // namespace

TEST(SuccessCriticTarget, OneOnArrivalDiscountedOtherwise) {
  SuccessCritic critic(3, 1, fast(1.0));
  QTable policy(3, 1);
  const Goal g{GoalKind::Forward, 2};
  EXPECT_DOUBLE_EQ(critic.target(step_tr(1, 0, 2, g), policy), 1.0);
  EXPECT_DOUBLE_EQ(critic.target(step_tr(0, 0, 1, g), policy), 0.0);
  critic.qf().at(1, GoalKind::Forward, 0) = 1.0;
  critic.sync_target();
  EXPECT_DOUBLE_EQ(critic.target(step_tr(0, 0, 1, g), policy), 0.95);
}

TEST(SuccessCriticUpdate, ValuesStayInUnitInterval) {
  SuccessCritic critic(3, 1, fast(0.5, 1000));
  QTable policy(3, 1);
  const Goal g{GoalKind::Forward, 2};
  critic.qf().at(0, GoalKind::Forward, 0) = -0.5;
  critic.qf().at(1, GoalKind::Forward, 0) = 1.5;
  std::vector<Transition> batch{step_tr(0, 0, 1, g), step_tr(1, 0, 2, g)};
  critic.update(batch, policy);
  EXPECT_EQ(critic.qf().at(0, GoalKind::Forward, 0), 0.0);
  EXPECT_EQ(critic.qf().at(1, GoalKind::Forward, 0), 1.0);
}

TEST(Competency, ZeroTableGivesZero) {
  SuccessCritic critic(5, 4, fast(0.1));
  QTable policy(5, 4);
  for (StateId s = 0; s < 5; ++s) EXPECT_EQ(critic.competency(s, GoalKind::Reset, policy), 0.0);
}

TEST(Competency, UniformRowIndependentOfPolicyMode) {
  for (auto mode : {CompetencyPolicy::Greedy, CompetencyPolicy::EpsilonMixture}) {
    SuccessCriticConfig cfg = fast(0.1);
    cfg.policy = mode;
    SuccessCritic critic(2, 4, cfg);
    for (ActionId a = 0; a < 4; ++a) critic.qf().at(1, GoalKind::Forward, a) = 0.7;
    QTable policy(2, 4);
    policy.at(1, GoalKind::Forward, 2) = 3.0;
    EXPECT_NEAR(critic.competency(1, GoalKind::Forward, policy, 0.3), 0.7, 1e-12);
  }
}

TEST(Competency, EpsilonMixtureWeightsGreedyAndUniform) {
  SuccessCriticConfig cfg = fast(0.1);
  cfg.policy = CompetencyPolicy::EpsilonMixture;
  SuccessCritic critic(1, 4, cfg);
  critic.qf().at(0, GoalKind::Forward, 0) = 1.0;
  QTable policy(1, 4);
  // greedy action 0 scores 1, uniform mean is 0.25
  EXPECT_NEAR(critic.competency(0, GoalKind::Forward, policy, 0.4), 0.6 * 1.0 + 0.4 * 0.25, 1e-12);
  EXPECT_NEAR(critic.competency(0, GoalKind::Forward, policy, 0.0), 1.0, 1e-12);
}

TEST(Competency, CorridorConvergesToDiscountPower) {
  ChainMdp chain(3);
  const Goal g = chain.goal(GoalKind::Forward);
  SuccessCritic critic(chain.num_states(), 1, fast(0.5));
  QTable policy(chain.num_states(), 1);
  auto batch = all_transitions(chain, g);
  for (int i = 0; i < 500; ++i) critic.update(batch, policy);
  EXPECT_NEAR(critic.competency(0, GoalKind::Forward, policy), 0.9025, 1e-6);
  EXPECT_NEAR(critic.competency(1, GoalKind::Forward, policy), 0.95, 1e-6);
  EXPECT_NEAR(critic.competency(2, GoalKind::Forward, policy), 1.0, 1e-6);
}

TEST(Competency, FourRoomsUnderFrozenOptimalPolicy) {
  GridWorld env(four_rooms());
  const double gamma = 0.95;
  for (GoalKind k : {GoalKind::Forward, GoalKind::Reset}) {
    const Goal g = env.goal(k);
    auto v = oracle::value_iteration(env, g, gamma);
    auto dist = oracle::shortest_paths(env, g);
    QTable policy(env.num_states(), env.num_actions());
    for (StateId s = 0; s < env.num_states(); ++s)
      for (ActionId a = 0; a < env.num_actions(); ++a) {
        StateId n = env.next_state(s, a);
        policy.at(s, k, a) = n == g.state ? 1.0 : gamma * v[n];
      }
    SuccessCritic critic(env.num_states(), env.num_actions(), fast(0.5, 5));
    auto batch = all_transitions(env, g);
    for (int i = 0; i < 2000; ++i) critic.update(batch, policy);

    for (StateId s = 0; s < env.num_states(); ++s) {
      if (s == g.state) continue;
      const double f = critic.competency(s, k, policy);
      EXPECT_NEAR(f, oracle::optimal_competency(*dist[s], gamma), 0.02) << "state " << s;
      for (StateId t = 0; t < env.num_states(); ++t)
        if (t != g.state && *dist[t] > *dist[s]) {
          EXPECT_GT(f, critic.competency(t, k, policy));
        }
    }
  }
}

TEST(SuccessCriticTarget, CoincidesWithAgentTargetWhenTablesAgree) {
  // With the same table acting as both critic target and policy, the critic's
  // bootstrap is the agent's max-backup, so the two targets are identical.
  GridWorld env(four_rooms());
  Rng rng(23);
  QTable table(env.num_states(), env.num_actions());
  for (StateId s = 0; s < env.num_states(); ++s)
    for (GoalKind k : {GoalKind::Forward, GoalKind::Reset})
      for (ActionId a = 0; a < env.num_actions(); ++a) table.at(s, k, a) = uniform01(rng);
  SuccessCriticConfig cfg = fast(0.1);
  SuccessCritic critic(env.num_states(), env.num_actions(), cfg);
  critic.qf() = table;
  critic.sync_target();
  for (GoalKind k : {GoalKind::Forward, GoalKind::Reset})
    for (const auto& tr : all_transitions(env, env.goal(k)))
      EXPECT_DOUBLE_EQ(critic.target(tr, table), td_target(tr, BootstrapStrategy::TimeoutNonterminal, cfg.gamma_sc, table));
}
