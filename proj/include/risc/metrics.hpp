#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "risc/env.hpp"
#include "risc/learner.hpp"
#include "risc/oracle.hpp"
#include "risc/switching.hpp"

namespace risc::metrics {

struct EvalRecord {
  std::uint64_t train_step = 0;
  std::size_t episode = 0;
  double episode_return = 0.0;
  bool success = false;
  std::uint64_t length = 0;
  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

/// Rolls out `policy(state, GoalKind::Forward)` on a private copy of `prototype`.
/// Each episode starts at the start state and ends on success or after `limit` steps.
template <typename Env, typename Policy>
std::vector<EvalRecord> evaluate(const Env& prototype, Policy&& policy, std::uint64_t train_step,
                                 std::size_t episodes = 10, std::uint64_t limit = 100) {
  Env env = prototype;
  const Goal goal = env.goal(GoalKind::Forward);
  std::vector<EvalRecord> out;
  out.reserve(episodes);
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    env.hard_reset();
    EvalRecord rec{train_step, ep, 0.0, false, 0};
    while (rec.length < limit) {
      const ActionId a = policy(env.state().agent, GoalKind::Forward);
      const StepOutcome o = env.step(a);
      ++rec.length;
      rec.episode_return += env.reward(o.moved_to, goal);
      if (env.success(o.moved_to, goal)) {
        rec.success = true;
        break;
      }
    }
    out.push_back(rec);
  }
  return out;
}

inline double success_rate(std::span<const EvalRecord> records) {
  if (records.empty()) return 0.0;
  auto n = std::count_if(records.begin(), records.end(), [](const EvalRecord& r) { return r.success; });
  return static_cast<double>(n) / static_cast<double>(records.size());
}

/// |max_a Q(s, a) - V*(s)| / V*(s). Undefined where V* = 0 (the goal cell).
inline double ovpd(double max_q, double v_star) {
  if (!(v_star > 0.0)) throw DomainError("ovpd: V*(s) must be positive (goal cell excluded)");
  return std::abs(max_q - v_star) / v_star;
}

inline double ovpd(const QTable& q, const oracle::ValueTable& v_star, StateId s, GoalKind g) {
  if (s == v_star.goal.state) throw DomainError("ovpd: undefined at the goal cell");
  return ovpd(q.max(s, g), v_star[s]);
}

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw UsageError("mean: empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Interquartile mean: drops floor(n/4) samples from each end and averages the rest.
inline double iqm(std::span<const double> xs) {
  if (xs.empty()) throw UsageError("iqm: empty sample");
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  const std::size_t cut = v.size() / 4;
  return mean(std::span<const double>(v).subspan(cut, v.size() - 2 * cut));
}

enum class Statistic : std::uint8_t { IQM, Mean };

inline std::string_view to_string(Statistic s) { return s == Statistic::IQM ? "iqm" : "mean"; }

inline double compute(Statistic s, std::span<const double> xs) { return s == Statistic::IQM ? iqm(xs) : mean(xs); }

struct AggregateStat {
  double point = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  Statistic method = Statistic::IQM;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
};

/// Linear-interpolated quantile of sorted data (numpy's default).
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw UsageError("quantile: empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Stratified percentile bootstrap. Each replication resamples runs with replacement
/// inside every task, pools the result and recomputes `stat`. Replication i draws from
/// its own substream of `seed`, so results do not depend on evaluation order.
/// The interval is widened to include the point estimate if the percentiles miss it.
inline AggregateStat bootstrap_ci(const std::vector<std::vector<double>>& samples_per_task, Statistic stat,
                                  std::size_t reps = 2000, double level = 0.95, std::uint64_t seed = 0) {
  if (reps == 0) throw UsageError("bootstrap_ci: reps must be positive");
  if (!(level > 0.0 && level < 1.0)) throw UsageError("bootstrap_ci: level must lie in (0, 1)");
  std::vector<double> pooled;
  for (const auto& task : samples_per_task) {
    if (task.empty()) throw UsageError("bootstrap_ci: every task needs at least one run");
    pooled.insert(pooled.end(), task.begin(), task.end());
  }
  if (pooled.empty()) throw UsageError("bootstrap_ci: no samples");

  AggregateStat out{compute(stat, pooled), 0.0, 0.0, stat, reps, seed};
  std::vector<double> replicates(reps);
  std::vector<double> resample(pooled.size());
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rng = make_stream(seed, r);
    std::size_t k = 0;
    for (const auto& task : samples_per_task)
      for (std::size_t i = 0; i < task.size(); ++i) resample[k++] = task[uniform_index(rng, task.size())];
    replicates[r] = compute(stat, resample);
  }
  std::sort(replicates.begin(), replicates.end());
  const double alpha = 1.0 - level;
  out.ci_low = std::min(out.point, quantile_sorted(replicates, alpha / 2.0));
  out.ci_high = std::max(out.point, quantile_sorted(replicates, 1.0 - alpha / 2.0));
  return out;
}

/// Normalized area under a learning curve: the mean of the per-evaluation scores.
inline double auc(std::span<const double> curve) {
  if (curve.empty()) throw UsageError("auc: empty curve");
  return mean(curve);
}

/// Min-max normalization against a reference score (e.g. the episodic oracle's final performance).
inline double normalize(double score, double low, double high) {
  if (!(high > low)) throw UsageError("normalize: high must exceed low");
  return (score - low) / (high - low);
}

struct HeatmapWindow {
  std::uint64_t start_step = 0;
  std::uint64_t window_len = 2000;
  std::uint64_t end_step = 0;  // last step counted
  std::vector<std::uint64_t> visits;                     // per state
  std::vector<std::array<double, kNumGoals>> max_q;      // per state, per goal
};

/// Forward-mode visitation over the first `window_len` forward-mode steps after
/// `start_step`, plus max_a Q per state from the snapshot taken at `start_step`.
inline HeatmapWindow heatmap(std::span<const TrainRow> rows, std::uint64_t start_step, const QTable& snapshot,
                             std::uint64_t window_len = 2000) {
  HeatmapWindow w{start_step, window_len, start_step, std::vector<std::uint64_t>(snapshot.num_states(), 0), {}};
  std::uint64_t counted = 0;
  for (const auto& row : rows) {
    if (counted == window_len) break;
    if (row.step <= start_step || row.goal != GoalKind::Forward) continue;
    ++w.visits.at(row.state);
    ++counted;
    w.end_step = row.step;
  }
  if (counted < window_len)
    throw std::out_of_range("heatmap: run log has fewer than " + std::to_string(window_len) +
                            " forward-mode steps after step " + std::to_string(start_step));
  w.max_q.resize(snapshot.num_states());
  for (StateId s = 0; s < snapshot.num_states(); ++s)
    for (GoalKind g : {GoalKind::Forward, GoalKind::Reset}) w.max_q[s][goal_index(g)] = snapshot.max(s, g);
  return w;
}

/// Mean trajectory length over all boundaries in a training log.
inline double mean_trajectory_length(std::span<const TrainRow> rows) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows)
    if (r.boundary != SwitchReason::None) {
      sum += static_cast<double>(r.traj_len);
      ++n;
    }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace risc::metrics
