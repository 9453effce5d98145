#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "risc/env.hpp"
#include "risc/learner.hpp"
#include "risc/success_critic.hpp"

namespace risc {

struct SwitchConfig {
  double zeta = 0.5;                 // fraction of trajectories that run early-switch checks
  std::uint64_t min_length = 0;      // m, in steps
  std::uint64_t max_length = 100;    // M, in steps
  double beta = 0.95;                // conservative factor

  /// m given as a fraction of M, rounded down to whole steps.
  static SwitchConfig from_fraction(double zeta, double min_fraction, std::uint64_t max_length, double beta) {
    if (!(min_fraction >= 0.0 && min_fraction < 1.0)) throw UsageError("switch: min length fraction must lie in [0, 1)");
    SwitchConfig cfg{zeta, static_cast<std::uint64_t>(std::floor(min_fraction * static_cast<double>(max_length))),
                     max_length, beta};
    cfg.validate();
    return cfg;
  }

  void validate() const {
    if (!(zeta >= 0.0 && zeta <= 1.0)) throw UsageError("switch.zeta must lie in [0, 1]");
    if (!(beta >= 0.0 && beta <= 1.0)) throw UsageError("switch.beta must lie in [0, 1]");
    if (!(min_length < max_length)) throw UsageError("switch: require 0 <= m < M");
  }
};

enum class SwitchReason : std::uint8_t {
  None,
  GoalReached,
  Truncated,
  EarlySwitch,
  HardReset,  // only produced by the training loop, never by a switch rule
};

inline std::string_view to_string(SwitchReason r) {
  switch (r) {
    case SwitchReason::None: return "none";
    case SwitchReason::GoalReached: return "goal_reached";
    case SwitchReason::Truncated: return "truncated";
    case SwitchReason::EarlySwitch: return "early_switch";
    case SwitchReason::HardReset: return "hard_reset";
  }
  return "none";
}

struct SwitchDecision {
  bool switched = false;
  SwitchReason reason = SwitchReason::None;
  // Populated only when the competency check ran.
  std::optional<double> competency;
  std::optional<double> lambda;
  std::optional<double> draw;
};

struct TrajectoryContext {
  GoalKind goal = GoalKind::Forward;
  std::uint64_t t = 0;
  bool check_switch = false;
};

enum class ControllerKind : std::uint8_t { RISC, FBRL, ReverseCurriculum, Naive, EpisodicOracle };

inline std::string_view to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::RISC: return "risc";
    case ControllerKind::FBRL: return "fbrl";
    case ControllerKind::ReverseCurriculum: return "reverse_curriculum";
    case ControllerKind::Naive: return "naive";
    case ControllerKind::EpisodicOracle: return "episodic_oracle";
  }
  return "risc";
}

inline std::optional<ControllerKind> parse_controller(std::string_view s) {
  for (auto k : {ControllerKind::RISC, ControllerKind::FBRL, ControllerKind::ReverseCurriculum, ControllerKind::Naive,
                 ControllerKind::EpisodicOracle})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

/// P(switch) = c * (1 - beta^t).
inline double switch_probability(double competency, double beta, std::uint64_t t) {
  return competency * (1.0 - std::pow(beta, static_cast<double>(t)));
}

/// Bernoulli(zeta) draw made once at the start of each trajectory.
inline bool begin_trajectory(double zeta, Rng& rng) {
  if (!(zeta >= 0.0 && zeta <= 1.0)) throw UsageError("begin_trajectory: zeta must lie in [0, 1]");
  return uniform01(rng) < zeta;
}

/// The RISC switching rule. Checks run in a fixed order: goal reached, M-step
/// truncation, minimum length, then the competency-weighted coin flip.
template <typename CompetencyFn>
SwitchDecision should_switch(std::uint64_t t, bool at_goal, bool check_switch, CompetencyFn&& competency,
                             const SwitchConfig& cfg, Rng& rng) {
  if (at_goal) return {true, SwitchReason::GoalReached, {}, {}, {}};
  if (t >= cfg.max_length) return {true, SwitchReason::Truncated, {}, {}, {}};
  if (t < cfg.min_length) return {};
  if (!check_switch) return {};
  const double c = competency();
  const double lambda = switch_probability(c, cfg.beta, t);
  const double u = uniform01(rng);
  SwitchDecision d{u < lambda, u < lambda ? SwitchReason::EarlySwitch : SwitchReason::None, c, lambda, u};
  return d;
}

/// Reverse-curriculum rule: forward trajectories use only the goal and M rules; a
/// backward trajectory hands control to the forward controller as soon as the
/// forward competency at the current state drops below `threshold`.
template <typename CompetencyFn>
SwitchDecision rc_should_switch(std::uint64_t t, bool at_goal, GoalKind goal, CompetencyFn&& forward_competency,
                                double threshold, const SwitchConfig& cfg) {
  if (at_goal) return {true, SwitchReason::GoalReached, {}, {}, {}};
  if (t >= cfg.max_length) return {true, SwitchReason::Truncated, {}, {}, {}};
  if (goal != GoalKind::Reset) return {};
  const double c = forward_competency();
  SwitchDecision d{c < threshold, c < threshold ? SwitchReason::EarlySwitch : SwitchReason::None, c, std::nullopt,
                   std::nullopt};
  return d;
}

/// Toggles forward/reset, restarts the trajectory clock and redraws the check flag.
inline TrajectoryContext switch_goals(const TrajectoryContext& ctx, double zeta, Rng& rng) {
  return {other(ctx.goal), 0, begin_trajectory(zeta, rng)};
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainRow {
  std::uint64_t step = 0;
  GoalKind goal = GoalKind::Forward;
  StateId state = 0;  // where the agent acted from
  SwitchReason boundary = SwitchReason::None;
  std::uint64_t traj_len = 0;  // trajectory length when a boundary occurs, else 0
  double epsilon = 0.0;
  std::size_t replay_size = 0;
  friend bool operator==(const TrainRow&, const TrainRow&) = default;
};

struct SwitchTraceRow {
  std::uint64_t step = 0;
  std::uint64_t t = 0;
  GoalKind goal = GoalKind::Forward;
  SwitchReason reason = SwitchReason::None;
  std::optional<double> competency;
  std::optional<double> lambda;
  std::optional<double> draw;
};

struct TrainingLog {
  std::vector<TrainRow> rows;
  std::vector<SwitchTraceRow> trace;
};

struct TrainingConfig {
  ControllerKind controller = ControllerKind::RISC;
  SwitchConfig switching{};
  double rc_threshold = 0.2;
  std::uint64_t root_seed = 0;
  bool record_trace = true;
};

/// Seeds every stochastic component from one root seed, one stream per concern.
struct SeededStreams {
  Rng action;
  Rng switching;
  std::uint64_t replay_seed;

  explicit SeededStreams(std::uint64_t root)
      : action(make_stream(root, Stream::Action)),
        switching(make_stream(root, Stream::Switch)),
        replay_seed(make_stream(root, Stream::Replay)()) {}
};

inline std::uint64_t replay_seed_for(std::uint64_t root_seed) { return SeededStreams(root_seed).replay_seed; }

using StepHook = std::function<void(std::uint64_t step, const QLearner&, const SuccessCritic&)>;

/// Runs the reset-free deployment loop for `total_train_steps` environment steps.
/// Each step: act, step the environment, consult the controller's switch rule,
/// store the transition (terminal on goal arrival, truncated on any other boundary),
/// update both critics on one shared batch, then apply the switch.
template <typename Env>
TrainingLog run_training(Env& env, QLearner& learner, SuccessCritic& critic, const TrainingConfig& cfg,
                         const StepHook& after_step = {}) {
  cfg.switching.validate();
  if (learner.replay_seed() != replay_seed_for(cfg.root_seed))
    throw ConfigError("run_training: learner was not seeded from the run's root seed");
  if (learner.q().num_states() != env.num_states() || learner.q().num_actions() != env.num_actions())
    throw ConfigError("run_training: learner table does not match the environment");

  SeededStreams streams(cfg.root_seed);
  const auto total = env.deployment().total_train_steps;
  const auto episode_limit = env.deployment().eval_episode_limit;
  const bool uses_reset_goal = cfg.controller == ControllerKind::RISC || cfg.controller == ControllerKind::FBRL ||
                               cfg.controller == ControllerKind::ReverseCurriculum;
  const double zeta = cfg.controller == ControllerKind::RISC ? cfg.switching.zeta : 0.0;
  auto new_trajectory = [&](GoalKind g) {
    return TrajectoryContext{g, 0, cfg.controller == ControllerKind::RISC && begin_trajectory(zeta, streams.switching)};
  };

  TrainingLog log;
  log.rows.reserve(total);
  env.hard_reset();
  TrajectoryContext ctx = new_trajectory(GoalKind::Forward);
  std::vector<Transition> batch;

  for (std::uint64_t step = 1; step <= total; ++step) {
    const StateId s = env.state().agent;
    const Goal goal = env.goal(ctx.goal);
    const double eps = learner.epsilon(step - 1);
    const ActionId a = learner.act(s, ctx.goal, step - 1, streams.action);
    const StepOutcome out = env.step(a);
    const StateId s_next = out.moved_to;
    const bool at_goal = env.success(s_next, goal);
    ++ctx.t;

    auto competency = [&] { return critic.competency(s_next, ctx.goal, learner.q(), eps); };
    SwitchDecision decision;
    switch (cfg.controller) {
      case ControllerKind::RISC:
      case ControllerKind::FBRL:
        decision = should_switch(ctx.t, at_goal, ctx.check_switch, competency, cfg.switching, streams.switching);
        break;
      case ControllerKind::ReverseCurriculum:
        decision = rc_should_switch(
            ctx.t, at_goal, ctx.goal,
            [&] { return critic.competency(s_next, GoalKind::Forward, learner.q(), eps); }, cfg.rc_threshold,
            cfg.switching);
        break;
      case ControllerKind::Naive:
        if (at_goal) decision = {true, SwitchReason::GoalReached, {}, {}, {}};
        break;
      case ControllerKind::EpisodicOracle:
        if (at_goal) decision = {true, SwitchReason::GoalReached, {}, {}, {}};
        else if (ctx.t >= episode_limit) decision = {true, SwitchReason::Truncated, {}, {}, {}};
        break;
    }
    SwitchReason boundary = decision.reason;
    if (out.hard_reset && boundary == SwitchReason::None) boundary = SwitchReason::HardReset;

    Transition tr{s, goal, a, env.reward(s_next, goal), s_next, at_goal,
                  !at_goal && boundary != SwitchReason::None};
    learner.store(tr);
    learner.sample(batch);
    critic.update(batch, learner.q(), eps);
    learner.update(batch);

    if (cfg.record_trace && (decision.competency || boundary != SwitchReason::None))
      log.trace.push_back({step, ctx.t, ctx.goal, boundary, decision.competency, decision.lambda, decision.draw});
    log.rows.push_back({step, ctx.goal, s, boundary, boundary == SwitchReason::None ? 0 : ctx.t, eps,
                        learner.replay().size()});

    if (out.hard_reset) {
      ctx = new_trajectory(GoalKind::Forward);
    } else if (boundary != SwitchReason::None) {
      if (uses_reset_goal) {
        ctx = cfg.controller == ControllerKind::RISC ? switch_goals(ctx, zeta, streams.switching)
                                                     : TrajectoryContext{other(ctx.goal), 0, false};
      } else {
        if (cfg.controller == ControllerKind::EpisodicOracle) env.place(env.start_state());
        ctx = new_trajectory(GoalKind::Forward);
      }
    }
    if (after_step) after_step(step, learner, critic);
  }
  return log;
}

}  // namespace risc
