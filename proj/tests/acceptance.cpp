// End-to-end acceptance checks. Prints one PASS/FAIL line per check and exits
// nonzero if any check fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "risc/harness.hpp"

using namespace risc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, const std::string& title, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " [" << id << "] " << title << " :: " << detail << std::endl;
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------

void bootstrap_fixed_point() {
  const auto t0 = Clock::now();
  constexpr std::size_t kLength = 5;
  constexpr std::uint64_t kTruncateEvery = 3;
  const double gamma = 0.95;
  ChainMdp chain(kLength);
  const Goal goal = chain.goal(GoalKind::Forward);

  // One period of the process: walk right, restart at 0 after the goal, and mark
  // every third global step as truncated unless that step reaches the goal.
  std::vector<Transition> cycle;
  const std::uint64_t period = kTruncateEvery * (kLength);
  for (std::uint64_t step = 1; step <= period; ++step) {
    const StateId s = chain.state().agent;
    const StateId next = chain.step(0).moved_to;
    const bool at_goal = next == goal.state;
    cycle.push_back({s, goal, 0, at_goal ? 1.0 : 0.0, next, at_goal, !at_goal && step % kTruncateEvery == 0});
    if (at_goal) chain.place(chain.start_state());
  }

  // Analytic truncation probability per state: each non-final state is visited 3
  // times per period at distinct phases mod 3, so exactly one visit is cut.
  std::vector<double> p_trunc(kLength, 1.0 / 3.0);
  p_trunc[kLength - 1] = 0.0;
  std::vector<double> v_nonterminal(kLength), v_terminal(kLength);
  for (std::size_t s = kLength; s-- > 0;) {
    const bool last = s + 1 == kLength;
    v_nonterminal[s] = last ? 1.0 : gamma * v_nonterminal[s + 1];
    v_terminal[s] = last ? 1.0 : gamma * (1.0 - p_trunc[s]) * v_terminal[s + 1];
  }

  auto fit = [&](BootstrapStrategy strategy) {
    AgentConfig cfg;
    cfg.gamma = gamma;
    cfg.lr = 2e-4;
    cfg.initial_collect = 0;
    cfg.target_sync_every = 1;
    cfg.bootstrap = strategy;
    QLearner learner(chain.num_states(), 1, cfg, 0);
    for (int sweep = 0; sweep < 40'000; ++sweep) learner.update(cycle);
    return learner;
  };
  const auto nonterminal = fit(BootstrapStrategy::TimeoutNonterminal);
  const auto terminal = fit(BootstrapStrategy::TimeoutTerminal);

  double err_n = 0.0, err_t = 0.0, min_gap = 1.0;
  for (StateId s = 0; s < kLength; ++s) {
    const double qn = nonterminal.q().at(s, GoalKind::Forward, 0), qt = terminal.q().at(s, GoalKind::Forward, 0);
    err_n = std::max(err_n, std::abs(qn - v_nonterminal[s]));
    err_t = std::max(err_t, std::abs(qt - v_terminal[s]));
    if (p_trunc[s] > 0) min_gap = std::min(min_gap, std::abs(qn - qt));
  }
  const double elapsed = seconds_since(t0);
  report(1, "timeout-aware bootstrapping fixed points on a truncated chain",
         err_n < 1e-3 && err_t < 1e-3 && min_gap > 1e-3 && elapsed < 10.0,
         "sup|Q-V_nonterminal|=" + fmt(err_n, 6) + " sup|Q-V_terminal|=" + fmt(err_t, 6) +
             " min gap where truncation possible=" + fmt(min_gap, 4) + " time=" + fmt(elapsed, 2) + "s");
}

// ---------------------------------------------------------------------------

void success_critic_calibration() {
  const auto t0 = Clock::now();
  GridWorld env(four_rooms());
  const double gamma = 0.95;
  double worst = 0.0;
  for (GoalKind k : {GoalKind::Forward, GoalKind::Reset}) {
    const Goal g = env.goal(k);
    const auto v = oracle::value_iteration(env, g, gamma);
    const auto dist = oracle::shortest_paths(env, g);
    QTable policy(env.num_states(), env.num_actions());
    std::vector<Transition> batch;
    for (StateId s = 0; s < env.num_states(); ++s)
      for (ActionId a = 0; a < env.num_actions(); ++a) {
        const StateId n = env.next_state(s, a);
        policy.at(s, k, a) = n == g.state ? 1.0 : gamma * v[n];
        if (s != g.state) batch.push_back({s, g, a, n == g.state ? 1.0 : 0.0, n, n == g.state, false});
      }
    SuccessCritic critic(env.num_states(), env.num_actions(), SuccessCriticConfig{gamma, 0.1, 500, CompetencyPolicy::Greedy});
    // Full-batch sweeps; the target table syncs every 500 sweeps as in training.
    for (int sweep = 0; sweep < 15'000; ++sweep) critic.update(batch, policy);
    for (StateId s = 0; s < env.num_states(); ++s)
      if (s != g.state)
        worst = std::max(worst, std::abs(critic.competency(s, k, policy) - oracle::optimal_competency(*dist[s], gamma)));
  }
  const double elapsed = seconds_since(t0);
  report(2, "success critic calibration under a frozen optimal policy", worst <= 0.02 && elapsed < 30.0,
         "max |F - gamma^(d-1)|=" + fmt(worst, 6) + " over all states and both goals, time=" + fmt(elapsed, 2) + "s");
}

// ---------------------------------------------------------------------------

void switch_probability_formula() {
  bool exact = std::abs(switch_probability(0.8, 0.9, 10) - 0.5210572479) < 1e-10;
  for (double c : {0.0, 0.3, 0.8, 1.0})
    for (double beta : {0.0, 0.5, 0.9, 0.95, 1.0})
      for (std::uint64_t t : {0u, 1u, 2u, 10u, 50u}) {
        const double expect = c * (1.0 - std::pow(beta, static_cast<double>(t)));
        exact = exact && switch_probability(c, beta, t) == expect;
        if (t == 0) exact = exact && switch_probability(c, beta, t) == 0.0;
        if (beta == 0.0 && t >= 1) exact = exact && switch_probability(c, beta, t) == c;
      }
  double worst = 0.0;
  Rng rng = make_stream(2024, Stream::Switch);
  for (auto [c, beta, t] : {std::tuple{0.8, 0.9, 10ull}, {0.5, 0.95, 20ull}, {0.3, 0.0, 1ull}, {1.0, 0.99, 5ull}}) {
    SwitchConfig cfg{1.0, 0, 1000, beta};
    int hits = 0;
    for (int i = 0; i < 100'000; ++i) hits += should_switch(t, false, true, [c = c] { return c; }, cfg, rng).switched;
    worst = std::max(worst, std::abs(hits / 100'000.0 - switch_probability(c, beta, t)));
  }
  report(3, "switch probability formula and empirical frequency", exact && worst <= 0.01,
         std::string("closed form ") + (exact ? "exact" : "MISMATCH") + ", max empirical deviation=" + fmt(worst, 5) +
             " over 100000 draws");
}

// ---------------------------------------------------------------------------

ExperimentConfig study_config(const std::string& name, ControllerKind controller) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.controller = controller;
  return cfg;
}

void forward_backward_reduction() {
  auto risc = study_config("risc_zeta0", ControllerKind::RISC);
  risc.zeta = 0.0;
  auto fbrl = study_config("fbrl", ControllerKind::FBRL);
  const GridWorld env(four_rooms());
  bool same = true;
  std::size_t rows = 0;
  for (std::uint64_t seed : {0u, 1u}) {
    const auto a = io::train_csv(env, harness::execute(risc, seed).training.rows);
    const auto b = io::train_csv(env, harness::execute(fbrl, seed).training.rows);
    same = same && a == b;
    rows += static_cast<std::size_t>(std::count(a.begin(), a.end(), '\n')) - 1;
  }
  report(4, "switching controller with zeta=0 reproduces forward-backward training", same,
         std::string(same ? "byte-identical" : "DIFFERENT") + " train.csv for seeds 0,1 (" + std::to_string(rows) +
             " rows)");
}

// ---------------------------------------------------------------------------

struct MethodSummary {
  std::vector<double> auc, final_success, traj_len;
};

MethodSummary summarize(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  MethodSummary out;
  for (auto seed : seeds) {
    const auto r = harness::execute(cfg, seed);
    std::vector<double> ys;
    for (const auto& [step, rate] : io::learning_curve(r.evals)) ys.push_back(rate);
    out.auc.push_back(metrics::auc(ys));
    out.final_success.push_back(ys.back());
    out.traj_len.push_back(metrics::mean_trajectory_length(r.training.rows));
  }
  return out;
}

std::string ci_text(const std::vector<double>& xs, std::uint64_t seed) {
  const auto st = metrics::bootstrap_ci({xs}, metrics::Statistic::Mean, 2000, 0.95, seed);
  return fmt(st.point, 3) + " [" + fmt(st.ci_low, 3) + ", " + fmt(st.ci_high, 3) + "]";
}

void four_rooms_study() {
  const auto t0 = Clock::now();
  const std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  auto fbrl_terminal = study_config("fbrl_terminal", ControllerKind::FBRL);
  fbrl_terminal.agent.bootstrap = BootstrapStrategy::TimeoutTerminal;
  auto modulations_off = study_config("risc_no_modulation", ControllerKind::RISC);
  modulations_off.zeta = 1.0;
  modulations_off.min_length_fraction = 0.0;
  modulations_off.beta = 0.0;

  const std::vector<std::pair<std::string, ExperimentConfig>> methods{
      {"risc", study_config("risc", ControllerKind::RISC)},
      {"fbrl_nonterminal", study_config("fbrl_nonterminal", ControllerKind::FBRL)},
      {"fbrl_terminal", fbrl_terminal},
      {"reverse_curriculum", study_config("reverse_curriculum", ControllerKind::ReverseCurriculum)},
      {"naive", study_config("naive", ControllerKind::Naive)},
      {"episodic_oracle", study_config("episodic_oracle", ControllerKind::EpisodicOracle)},
      {"risc_no_modulation", modulations_off}};

  std::map<std::string, MethodSummary> results;
  std::uint64_t ci_seed = 0;
  for (const auto& [name, cfg] : methods) {
    results[name] = summarize(cfg, seeds);
    const auto& r = results[name];
    std::cout << "     " << name << ": AUC " << ci_text(r.auc, ci_seed) << ", final success "
              << ci_text(r.final_success, ci_seed) << ", mean trajectory length " << ci_text(r.traj_len, ci_seed)
              << std::endl;
    ++ci_seed;
  }
  const double elapsed = seconds_since(t0);
  auto mean_of = [](const std::vector<double>& xs) { return metrics::mean(xs); };

  const auto& oracle_finals = results["episodic_oracle"].final_success;
  const bool oracle_solves = std::all_of(oracle_finals.begin(), oracle_finals.end(), [](double v) { return v == 1.0; });
  report(5, "(a) episodic oracle reaches eval success 1.0", oracle_solves && elapsed < 1800.0,
         "final success per seed mean=" + fmt(mean_of(oracle_finals), 3) + ", study time=" + fmt(elapsed, 1) + "s");

  const double risc = mean_of(results["risc"].auc), rc = mean_of(results["reverse_curriculum"].auc),
               fbt = mean_of(results["fbrl_terminal"].auc), fbn = mean_of(results["fbrl_nonterminal"].auc);
  report(5, "(b) switching AUC >= reverse curriculum and >= forward-backward (terminal)", risc >= rc && risc >= fbt,
         "mean AUC risc=" + fmt(risc) + " reverse_curriculum=" + fmt(rc) + " fbrl_terminal=" + fmt(fbt));
  report(5, "(c) timeout-nonterminal AUC >= timeout-terminal AUC", fbn >= fbt,
         "mean AUC nonterminal=" + fmt(fbn) + " terminal=" + fmt(fbt));

  const double with_mod = mean_of(results["risc"].traj_len), without = mean_of(results["risc_no_modulation"].traj_len);
  report(6, "modulations lengthen trajectories", without < with_mod,
         "mean trajectory length defaults=" + fmt(with_mod, 2) + " modulations off=" + fmt(without, 2));
}

// ---------------------------------------------------------------------------

void metrics_correctness() {
  bool ok = true;
  std::vector<std::string> notes;
  const std::vector<double> four{1, 2, 3, 4};
  if (metrics::iqm(four) != 2.5) ok = false, notes.push_back("iqm([1,2,3,4]) != 2.5");

  Rng rng(99);
  double sym_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> xs;
    const double centre = uniform01(rng);
    const std::size_t half = 1 + uniform_index(rng, 20);
    for (std::size_t i = 0; i < half; ++i) {
      const double d = uniform01(rng);
      xs.push_back(centre + d);
      xs.push_back(centre - d);
    }
    if (uniform01(rng) < 0.5) xs.push_back(centre);
    sym_err = std::max(sym_err, std::abs(metrics::iqm(xs) - metrics::mean(xs)));
  }
  if (sym_err > 1e-12) ok = false, notes.push_back("symmetric iqm deviates by " + std::to_string(sym_err));

  const std::vector<std::vector<double>> tasks{{0.1, 0.7, 0.4, 0.9, 0.5}, {0.3, 0.35, 0.8, 0.6, 0.2}};
  const auto a = metrics::bootstrap_ci(tasks, metrics::Statistic::IQM, 2000, 0.95, 11);
  const auto b = metrics::bootstrap_ci(tasks, metrics::Statistic::IQM, 2000, 0.95, 11);
  if (a.ci_low != b.ci_low || a.ci_high != b.ci_high) ok = false, notes.push_back("bootstrap not deterministic");
  if (!(a.ci_low <= a.point && a.point <= a.ci_high)) ok = false, notes.push_back("CI misses point estimate");

  GridWorld env(four_rooms());
  std::size_t checked = 0;
  for (GoalKind k : {GoalKind::Forward, GoalKind::Reset}) {
    const Goal g = env.goal(k);
    const auto v = oracle::value_iteration(env, g, 0.95);
    QTable exact(env.num_states(), env.num_actions()), zero(env.num_states(), env.num_actions());
    for (StateId s = 0; s < env.num_states(); ++s)
      for (ActionId act = 0; act < env.num_actions(); ++act) {
        const StateId n = env.next_state(s, act);
        exact.at(s, k, act) = n == g.state ? 1.0 : 0.95 * v[n];
      }
    for (StateId s = 0; s < env.num_states(); ++s) {
      if (s == g.state) continue;
      ++checked;
      if (std::abs(metrics::ovpd(exact, v, s, k)) > 1e-12) ok = false;
      if (std::abs(metrics::ovpd(zero, v, s, k) - 1.0) > 1e-12) ok = false;
    }
  }
  if (!ok && notes.empty()) notes.push_back("ovpd mismatch");
  std::string detail = "iqm, symmetric iqm (max err " + fmt(sym_err, 15) + "), bootstrap CI [" + fmt(a.ci_low) + ", " +
                       fmt(a.ci_high) + "] around " + fmt(a.point) + ", ovpd on " + std::to_string(checked) + " states";
  for (const auto& n : notes) detail += "; " + n;
  report(7, "metrics correctness", ok, detail);
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = io::read_file(e.path());
  return out;
}

void cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / ("risc_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  const std::string cmd = std::string(RISC_CLI_PATH) + " run --seed 3 --set heatmap_steps=[0,25000] --out " +
                          (dir / "run").string() + " > /dev/null 2>&1";
  std::map<std::string, std::string> first, second;
  bool ok = true;
  for (auto* target : {&first, &second}) {
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      ok = false;
      break;
    }
    *target = snapshot(dir / "run");
    fs::remove_all(dir / "run");
  }
  ok = ok && !first.empty() && first == second;
  std::size_t bytes = 0;
  for (const auto& [_, body] : first) bytes += body.size();
  report(8, "two CLI runs with identical config and seed are byte-identical", ok,
         std::to_string(first.size()) + " files, " + std::to_string(bytes) + " bytes compared");
  fs::remove_all(dir);
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> checks{bootstrap_fixed_point,     success_critic_calibration,
                                                  switch_probability_formula, forward_backward_reduction,
                                                  four_rooms_study,          metrics_correctness,
                                                  cli_determinism};
  for (const auto& check : checks) {
    try {
      check();
    } catch (const std::exception& e) {
      std::cout << "FAIL check threw: " << e.what() << std::endl;
      ++failures;
    }
  }
  std::cout << (failures == 0 ? "acceptance: all checks passed" : "acceptance: " + std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
