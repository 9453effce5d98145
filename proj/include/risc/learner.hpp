#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "risc/common.hpp"
#include "risc/env.hpp"

namespace risc {

enum class BootstrapStrategy : std::uint8_t { TimeoutNonterminal, TimeoutTerminal };

inline std::string_view to_string(BootstrapStrategy b) {
  return b == BootstrapStrategy::TimeoutNonterminal ? "timeout_nonterminal" : "timeout_terminal";
}

/// One environment step. `terminal` marks goal arrival (never bootstrapped);
/// `truncated` marks a trajectory cut by a controller switch or timeout.
struct Transition {
  StateId state = 0;
  Goal goal{};
  ActionId action = 0;
  double reward = 0.0;
  StateId next_state = 0;
  bool terminal = false;
  bool truncated = false;

  bool valid() const noexcept { return !(terminal && truncated) && ((reward == 1.0) == terminal); }
  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Fixed-capacity FIFO ring with uniform sampling with replacement.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), seed_(seed), rng_(seed) {
    if (capacity == 0) throw UsageError("replay: capacity must be positive");
    storage_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void push(const Transition& tr) {
    if (storage_.size() < capacity_) {
      storage_.push_back(tr);
    } else {
      storage_[head_] = tr;
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const noexcept { return storage_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::uint64_t seed() const noexcept { return seed_; }
  bool empty() const noexcept { return storage_.empty(); }

  /// Element `i` in insertion order (0 = oldest retained).
  const Transition& operator[](std::size_t i) const { return storage_[(head_ + i) % storage_.size()]; }

  void sample(std::size_t batch, std::vector<Transition>& out) {
    out.clear();
    if (storage_.empty()) return;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(storage_[uniform_index(rng_, storage_.size())]);
  }

 private:
  std::size_t capacity_;
  std::uint64_t seed_;
  std::size_t head_ = 0;
  std::vector<Transition> storage_;
  Rng rng_;
};

/// Dense (state, goal, action) -> value table.
class QTable {
 public:
  QTable() = default;
  QTable(std::size_t states, std::size_t actions, double init = 0.0)
      : states_(states), actions_(actions), values_(states * kNumGoals * actions, init) {}

  std::size_t num_states() const noexcept { return states_; }
  std::size_t num_actions() const noexcept { return actions_; }

  double& at(StateId s, GoalKind g, ActionId a) { return values_[index(s, g, a)]; }
  double at(StateId s, GoalKind g, ActionId a) const { return values_[index(s, g, a)]; }

  std::span<const double> row(StateId s, GoalKind g) const {
    return {values_.data() + index(s, g, 0), actions_};
  }

  double max(StateId s, GoalKind g) const {
    auto r = row(s, g);
    return *std::max_element(r.begin(), r.end());
  }

  /// Lowest index among maximal actions.
  ActionId argmax(StateId s, GoalKind g) const {
    auto r = row(s, g);
    return static_cast<ActionId>(std::max_element(r.begin(), r.end()) - r.begin());
  }

  const std::vector<double>& raw() const noexcept { return values_; }
  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  std::size_t index(StateId s, GoalKind g, ActionId a) const {
    return (s * kNumGoals + goal_index(g)) * actions_ + a;
  }

  std::size_t states_ = 0;
  std::size_t actions_ = 0;
  std::vector<double> values_;
};

struct AgentConfig {
  double gamma = 0.95;
  double lr = 1e-3;
  std::size_t batch_size = 128;
  std::size_t target_sync_every = 500;
  std::size_t initial_collect = 512;
  std::size_t replay_capacity = 50'000;
  double eps_init = 1.0;
  double eps_end = 0.1;
  std::size_t eps_decay_steps = 10'000;
  BootstrapStrategy bootstrap = BootstrapStrategy::TimeoutNonterminal;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw UsageError("agent.gamma must lie in (0, 1)");
    if (!(lr >= 0.0 && lr <= 1.0)) throw UsageError("agent.lr must lie in [0, 1]");
    if (batch_size == 0 || target_sync_every == 0 || replay_capacity == 0 || eps_decay_steps == 0)
      throw UsageError("agent: batch_size, target_sync_every, replay_capacity, eps_decay_steps must be positive");
    if (!(eps_init >= eps_end && eps_end >= 0.0 && eps_init <= 1.0))
      throw UsageError("agent: require 1 >= eps_init >= eps_end >= 0");
  }

  /// Linear anneal from eps_init to eps_end over eps_decay_steps, then constant.
  double epsilon(std::uint64_t step) const {
    double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(eps_decay_steps));
    return eps_init + (eps_end - eps_init) * frac;
  }
};

/// TD target for one transition.
///   terminal                 -> r
///   TimeoutNonterminal       -> r + gamma * max_a' target(s', a')
///   TimeoutTerminal          -> r + gamma * (1 - truncated) * max_a' target(s', a')
inline double td_target(const Transition& tr, BootstrapStrategy strategy, double gamma, const QTable& target) {
  if (tr.terminal) return tr.reward;
  double bootstrap = target.max(tr.next_state, tr.goal.kind);
  if (strategy == BootstrapStrategy::TimeoutTerminal && tr.truncated) bootstrap = 0.0;
  return tr.reward + gamma * bootstrap;
}

/// Goal-conditioned tabular Q-learner with replay and a hard-synced target table.
class QLearner {
 public:
  QLearner(std::size_t states, std::size_t actions, AgentConfig cfg, std::uint64_t replay_seed)
      : cfg_(cfg), q_(states, actions), target_q_(q_), replay_(cfg.replay_capacity, replay_seed) {
    cfg_.validate();
  }

  const AgentConfig& config() const noexcept { return cfg_; }
  const QTable& q() const noexcept { return q_; }
  QTable& q() noexcept { return q_; }
  const QTable& target_q() const noexcept { return target_q_; }
  const ReplayBuffer& replay() const noexcept { return replay_; }
  std::uint64_t replay_seed() const noexcept { return replay_.seed(); }
  std::size_t updates() const noexcept { return updates_; }

  double epsilon(std::uint64_t step) const { return cfg_.epsilon(step); }

  /// Epsilon-greedy; greedy ties are broken uniformly with the same stream.
  ActionId act(StateId s, GoalKind g, std::uint64_t step, Rng& rng) const {
    const std::size_t n = q_.num_actions();
    if (uniform01(rng) < epsilon(step)) return uniform_index(rng, n);
    auto r = q_.row(s, g);
    double best = *std::max_element(r.begin(), r.end());
    std::size_t ties = static_cast<std::size_t>(std::count(r.begin(), r.end(), best));
    std::size_t pick = ties == 1 ? 0 : uniform_index(rng, ties);
    for (ActionId a = 0; a < n; ++a)
      if (r[a] == best && pick-- == 0) return a;
    return 0;
  }

  ActionId greedy_action(StateId s, GoalKind g) const { return q_.argmax(s, g); }

  double td_target(const Transition& tr) const { return risc::td_target(tr, cfg_.bootstrap, cfg_.gamma, target_q_); }

  void store(const Transition& tr) { replay_.push(tr); }

  /// Demonstration-style preload; ring semantics evict the oldest on overflow.
  void preload(std::span<const Transition> transitions) {
    for (const auto& tr : transitions) {
      if (!tr.valid()) throw UsageError("preload: transition violates terminal/truncated/reward schema");
      replay_.push(tr);
    }
  }

  bool ready() const noexcept { return replay_.size() >= cfg_.initial_collect; }

  /// Draws a training batch, or leaves `out` empty before initial collect completes.
  void sample(std::vector<Transition>& out) {
    out.clear();
    if (ready()) replay_.sample(cfg_.batch_size, out);
  }

  /// One TD(0) step per transition; a no-op before initial collect. Returns whether it ran.
  bool update(std::span<const Transition> batch) {
    if (!ready() || batch.empty()) return false;
    for (const auto& tr : batch) {
      double& v = q_.at(tr.state, tr.goal.kind, tr.action);
      v += cfg_.lr * (td_target(tr) - v);
    }
    if (++updates_since_sync_ >= cfg_.target_sync_every) sync_target();
    ++updates_;
    return true;
  }

  void sync_target() {
    target_q_ = q_;
    updates_since_sync_ = 0;
  }

  std::size_t updates_since_sync() const noexcept { return updates_since_sync_; }

 private:
  AgentConfig cfg_;
  QTable q_;
  QTable target_q_;
  ReplayBuffer replay_;
  std::size_t updates_ = 0;
  std::size_t updates_since_sync_ = 0;
};

}  // namespace risc
