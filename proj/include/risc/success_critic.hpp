#pragma once

#include <algorithm>
#include <numeric>
#include <span>

#include "risc/learner.hpp"

namespace risc {

/// How the critic averages over the acting policy when bootstrapping and at inference.
enum class CompetencyPolicy : std::uint8_t {
  Greedy,         // a' = argmax_a Q(s', g, a)
  EpsilonMixture  // expectation under the epsilon-greedy distribution
};

struct SuccessCriticConfig {
  double gamma_sc = 0.95;
  double lr = 1e-3;
  std::size_t target_sync_every = 500;
  CompetencyPolicy policy = CompetencyPolicy::Greedy;
};

/// Learns Q_F(s, a, g): a Q-function whose reward and termination both come from the
/// success indicator, so that F(s, g) approximates gamma_sc^(steps to goal - 1).
class SuccessCritic {
 public:
  SuccessCritic(std::size_t states, std::size_t actions, SuccessCriticConfig cfg)
      : cfg_(cfg), qf_(states, actions), target_qf_(qf_) {
    if (!(cfg.gamma_sc >= 0.0 && cfg.gamma_sc <= 1.0)) throw UsageError("success critic: gamma_sc must lie in [0, 1]");
    if (cfg.target_sync_every == 0) throw UsageError("success critic: target_sync_every must be positive");
  }

  const SuccessCriticConfig& config() const noexcept { return cfg_; }
  const QTable& qf() const noexcept { return qf_; }
  QTable& qf() noexcept { return qf_; }
  const QTable& target_qf() const noexcept { return target_qf_; }

  /// Expected target-critic value at s' under the policy implied by `policy_q`.
  double bootstrap_value(StateId s_next, GoalKind g, const QTable& policy_q, double epsilon = 0.0) const {
    return expectation(target_qf_, s_next, g, policy_q, epsilon);
  }

  /// f(s', g) + (1 - f(s', g)) * gamma_sc * Q_F_target(s', a', g)
  double target(const Transition& tr, const QTable& policy_q, double epsilon = 0.0) const {
    if (tr.next_state == tr.goal.state) return 1.0;
    return cfg_.gamma_sc * bootstrap_value(tr.next_state, tr.goal.kind, policy_q, epsilon);
  }

  /// Trains on the same batch as the agent critic. `epsilon` only matters in
  /// EpsilonMixture mode.
  void update(std::span<const Transition> batch, const QTable& policy_q, double epsilon = 0.0) {
    if (batch.empty()) return;
    for (const auto& tr : batch) {
      double& v = qf_.at(tr.state, tr.goal.kind, tr.action);
      v = std::clamp(v + cfg_.lr * (target(tr, policy_q, epsilon) - v), 0.0, 1.0);
    }
    if (++updates_since_sync_ >= cfg_.target_sync_every) sync_target();
  }

  void sync_target() {
    target_qf_ = qf_;
    updates_since_sync_ = 0;
  }

  /// F(s, g) = E_{a ~ pi(s, g)} Q_F(s, a, g), always in [0, 1].
  double competency(StateId s, GoalKind g, const QTable& policy_q, double epsilon = 0.0) const {
    return std::clamp(expectation(qf_, s, g, policy_q, epsilon), 0.0, 1.0);
  }

 private:
  double expectation(const QTable& table, StateId s, GoalKind g, const QTable& policy_q, double epsilon) const {
    double greedy = table.at(s, g, policy_q.argmax(s, g));
    if (cfg_.policy == CompetencyPolicy::Greedy || epsilon <= 0.0) return greedy;
    auto r = table.row(s, g);
    double uniform = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    return (1.0 - epsilon) * greedy + epsilon * uniform;
  }

  SuccessCriticConfig cfg_;
  QTable qf_;
  QTable target_qf_;
  std::size_t updates_since_sync_ = 0;
};

}  // namespace risc
