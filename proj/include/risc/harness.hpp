#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "risc/config.hpp"
#include "risc/io.hpp"
#include "risc/metrics.hpp"
#include "risc/svg.hpp"
#include "risc/switching.hpp"

namespace risc::harness {

namespace fs = std::filesystem;

/// Everything one (config, seed) run produces, before it is written to disk.
struct RunResult {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  TrainingLog training;
  std::vector<metrics::EvalRecord> evals;
  QTable q;
  QTable competency;
  std::map<std::uint64_t, QTable> q_snapshots;
};

inline RunResult execute(const ExperimentConfig& cfg, std::uint64_t seed) {
  GridWorld env(cfg.env.load(), cfg.deployment);
  const GridWorld eval_env = env;
  QLearner learner(env.num_states(), env.num_actions(), cfg.agent, replay_seed_for(seed));
  SuccessCritic critic(env.num_states(), env.num_actions(), cfg.success_critic());
  TrainingConfig tc{cfg.controller, cfg.switching(), cfg.rc_threshold, seed, cfg.record_trace};

  RunResult result{cfg, seed, {}, {}, {}, {}, {}};
  for (auto s : cfg.heatmap_steps)
    if (s == 0) result.q_snapshots[0] = learner.q();
  auto hook = [&](std::uint64_t step, const QLearner& l, const SuccessCritic&) {
    if (step % cfg.eval.every == 0) {
      auto recs = metrics::evaluate(
          eval_env, [&](StateId s, GoalKind g) { return l.greedy_action(s, g); }, step, cfg.eval.episodes,
          cfg.deployment.eval_episode_limit);
      result.evals.insert(result.evals.end(), recs.begin(), recs.end());
    }
    if (std::find(cfg.heatmap_steps.begin(), cfg.heatmap_steps.end(), step) != cfg.heatmap_steps.end())
      result.q_snapshots[step] = l.q();
  };
  result.training = run_training(env, learner, critic, tc, hook);
  result.q = learner.q();
  result.competency = critic.qf();
  return result;
}

inline fs::path seed_dir(const ExperimentConfig& cfg, std::uint64_t seed) {
  return fs::path(cfg.output_dir) / ("seed_" + std::to_string(seed));
}

inline Json manifest(const ExperimentConfig& cfg, std::uint64_t seed, std::string_view status,
                     const std::vector<std::string>& files, const std::string& error = {}) {
  Json m{{"config_hash", config_hash(cfg)},
         {"seed", seed},
         {"code_version", std::string(kCodeVersion)},
         {"controller", std::string(to_string(cfg.controller))},
         {"status", std::string(status)},
         {"files", files}};
  if (!error.empty()) m["error"] = error;
  return m;
}

/// Writes the RunLog. The manifest is written first as "partial" and rewritten as
/// "complete" only after every other file landed.
inline void write(const RunResult& r, const fs::path& dir) {
  fs::create_directories(dir);
  const GridWorld env(r.config.env.load(), r.config.deployment);
  std::vector<std::pair<std::string, std::string>> files;
  Json cfg_json = to_json(r.config);
  files.emplace_back("config.json", cfg_json.dump(2) + "\n");
  files.emplace_back("train.csv", io::train_csv(env, r.training.rows));
  files.emplace_back("eval.csv", io::eval_csv(r.evals));
  files.emplace_back("switch_trace.csv", io::trace_csv(r.training.trace));
  files.emplace_back("q_table.csv", io::qtable_csv(env, r.q));
  files.emplace_back("competency.csv", io::qtable_csv(env, r.competency));
  for (const auto& [step, q] : r.q_snapshots)
    files.emplace_back("q_snapshot_" + std::to_string(step) + ".csv", io::qtable_csv(env, q));

  std::vector<std::string> names;
  for (const auto& f : files) names.push_back(f.first);
  io::write_file(dir / "manifest.json", manifest(r.config, r.seed, "partial", names).dump(2) + "\n");
  std::vector<std::string> written;
  try {
    for (const auto& [name, body] : files) {
      io::write_file(dir / name, body);
      written.push_back(name);
    }
  } catch (const std::exception& e) {
    try {
      io::write_file(dir / "manifest.json", manifest(r.config, r.seed, "partial", written, e.what()).dump(2) + "\n");
    } catch (...) {
    }
    throw;
  }
  io::write_file(dir / "manifest.json", manifest(r.config, r.seed, "complete", names).dump(2) + "\n");
}

/// Runs one seed and writes its RunLog under `<output_dir>/seed_<seed>`.
inline fs::path run(const ExperimentConfig& cfg, std::uint64_t seed) {
  const fs::path dir = seed_dir(cfg, seed);
  write(execute(cfg, seed), dir);
  return dir;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepSpec {
  Json base = to_json(ExperimentConfig{});
  std::map<std::string, std::vector<Json>> grid;  // ordered by parameter path
  std::string output_dir = "runs/sweep";

  static std::map<std::string, std::vector<Json>> default_grid() {
    return {{"switch.beta", {0.0, 0.9, 0.95}},
            {"switch.min_length_fraction", {0.0, 0.25, 0.5, 0.75}},
            {"switch.zeta", {0.25, 0.5, 0.75, 1.0}}};
  }
};

inline SweepSpec sweep_from_json(const Json& j) {
  SweepSpec spec;
  if (!j.is_object()) throw ConfigError("sweep: expected an object");
  for (const auto& [k, _] : j.items())
    if (k != "base" && k != "base_config" && k != "grid" && k != "output_dir")
      throw ConfigError("sweep." + k + ": unknown key");
  if (j.contains("base")) spec.base = j["base"];
  else if (j.contains("base_config")) spec.base = load_json_file(j["base_config"].get<std::string>());
  if (j.contains("grid")) {
    if (!j["grid"].is_object()) throw ConfigError("sweep.grid: expected an object");
    for (const auto& [path, values] : j["grid"].items()) {
      if (!values.is_array() || values.empty()) throw ConfigError("sweep.grid." + path + ": expected a non-empty array");
      spec.grid[path] = std::vector<Json>(values.begin(), values.end());
    }
  } else {
    spec.grid = SweepSpec::default_grid();
  }
  if (j.contains("output_dir")) spec.output_dir = j["output_dir"].get<std::string>();
  return spec;
}

struct SweepCell {
  std::size_t index = 0;
  std::vector<std::pair<std::string, Json>> assignment;
  ExperimentConfig config;
  std::string error;  // non-empty when the cell's config failed validation
};

/// Cartesian product in lexicographic order of (parameter path, value index): the
/// alphabetically first path varies slowest.
inline std::vector<SweepCell> enumerate(const SweepSpec& spec) {
  if (spec.grid.empty()) throw ConfigError("sweep: grid is empty");
  std::vector<std::pair<std::string, std::vector<Json>>> axes(spec.grid.begin(), spec.grid.end());
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.second.size();
  std::vector<SweepCell> cells;
  cells.reserve(total);
  std::vector<std::size_t> idx(axes.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    SweepCell cell;
    cell.index = n;
    Json j = spec.base;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const Json& v = axes[a].second[idx[a]];
      cell.assignment.emplace_back(axes[a].first, v);
      apply_override(j, axes[a].first + "=" + v.dump());
    }
    char name[32];
    std::snprintf(name, sizeof(name), "cell_%03zu", n);
    j["output_dir"] = (fs::path(spec.output_dir) / name).string();
    try {
      cell.config = config_from_json(j);
    } catch (const ConfigError& e) {
      cell.error = e.what();
      cell.config.output_dir = j["output_dir"].get<std::string>();
      if (auto it = j.find("seeds"); it != j.end() && it->is_array()) {
        cell.config.seeds.clear();
        for (const auto& sd : *it)
          if (sd.is_number_integer() && sd.get<std::int64_t>() >= 0) cell.config.seeds.push_back(sd.get<std::uint64_t>());
      }
    }
    cells.push_back(std::move(cell));
    for (std::size_t a = axes.size(); a-- > 0;) {
      if (++idx[a] < axes[a].second.size()) break;
      idx[a] = 0;
    }
  }
  return cells;
}

struct SweepOutcome {
  std::size_t cell = 0;
  std::uint64_t seed = 0;
  fs::path dir;
  bool ok = false;
  std::string error;
};

/// Executes every (cell, seed) pair on up to `parallelism` threads. Outcomes are
/// returned and indexed in enumeration order regardless of completion order.
inline std::vector<SweepOutcome> sweep(const SweepSpec& spec, std::size_t parallelism) {
  const auto cells = enumerate(spec);
  std::vector<std::pair<std::size_t, std::uint64_t>> tasks;
  for (const auto& c : cells)
    for (auto s : c.config.seeds) tasks.emplace_back(c.index, s);
  std::vector<SweepOutcome> outcomes(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) {
      const auto& [ci, seed] = tasks[i];
      SweepOutcome& o = outcomes[i];
      o.cell = ci;
      o.seed = seed;
      o.dir = seed_dir(cells[ci].config, seed);
      try {
        if (!cells[ci].error.empty()) throw ConfigError(cells[ci].error);
        run(cells[ci].config, seed);
        o.ok = true;
      } catch (const std::exception& e) {
        o.error = e.what();
      }
    }
  };
  parallelism = std::max<std::size_t>(1, std::min(parallelism, tasks.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < parallelism; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  fs::create_directories(spec.output_dir);
  std::string index = "cell,seed";
  for (const auto& [path, _] : spec.grid) index += "," + path;
  index += ",status,dir\n";
  for (const auto& o : outcomes) {
    index += std::to_string(o.cell) + "," + std::to_string(o.seed);
    for (const auto& [_, v] : cells[o.cell].assignment) index += "," + v.dump();
    index += std::string(",") + (o.ok ? "ok" : "failed") + "," + o.dir.generic_string() + "\n";
  }
  io::write_file(fs::path(spec.output_dir) / "sweep_index.csv", index);
  return outcomes;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct SeedRun {
  std::uint64_t seed = 0;
  fs::path dir;
  std::vector<std::pair<std::uint64_t, double>> curve;
  double final_success = 0.0;
  double auc = 0.0;
  double mean_traj_len = 0.0;
};

struct MethodRuns {
  std::string name;
  ExperimentConfig config;
  std::string hash;
  std::vector<SeedRun> seeds;
};

inline std::vector<fs::path> seed_dirs_of(const fs::path& run_dir) {
  if (fs::exists(run_dir / "manifest.json")) return {run_dir};
  std::vector<fs::path> out;
  if (!fs::is_directory(run_dir)) throw ConfigError("report: '" + run_dir.string() + "' is not a directory");
  for (const auto& e : fs::directory_iterator(run_dir))
    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw ConfigError("report: no completed runs under '" + run_dir.string() + "'");
  return out;
}

inline MethodRuns load_method(const fs::path& run_dir) {
  MethodRuns m;
  for (const auto& dir : seed_dirs_of(run_dir)) {
    const Json man = Json::parse(io::read_file(dir / "manifest.json"));
    if (man.value("status", "") != "complete") throw ConfigError("report: run '" + dir.string() + "' is incomplete");
    ExperimentConfig cfg = config_from_json(Json::parse(io::read_file(dir / "config.json")));
    const std::string hash = man.at("config_hash").get<std::string>();
    if (hash != config_hash(cfg)) throw ConfigError("report: manifest hash mismatch in '" + dir.string() + "'");
    if (m.seeds.empty()) {
      m.config = cfg;
      m.hash = hash;
      m.name = cfg.name;
    } else if (hash != m.hash) {
      throw ConfigError("report: '" + run_dir.string() + "' mixes incompatible configs (" + m.hash + " vs " + hash + ")");
    }
    const GridWorld env(cfg.env.load(), cfg.deployment);
    SeedRun s;
    s.seed = man.at("seed").get<std::uint64_t>();
    s.dir = dir;
    const auto evals = io::read_eval_csv(dir / "eval.csv");
    s.curve = io::learning_curve(evals);
    if (s.curve.empty()) throw ConfigError("report: '" + dir.string() + "' has no evaluations");
    std::vector<double> ys;
    for (const auto& p : s.curve) ys.push_back(p.second);
    s.final_success = ys.back();
    s.auc = metrics::auc(ys);
    s.mean_traj_len = metrics::mean_trajectory_length(io::read_train_csv(env, dir / "train.csv"));
    m.seeds.push_back(std::move(s));
  }
  return m;
}

inline Json stat_json(const metrics::AggregateStat& s) {
  return {{"method", std::string(metrics::to_string(s.method))},
          {"point", s.point},
          {"ci_low", s.ci_low},
          {"ci_high", s.ci_high},
          {"reps", s.reps},
          {"seed", s.seed}};
}

inline std::string render_heatmap(const GridWorld& env, const metrics::HeatmapWindow& w, const std::string& title) {
  const double cell = 36, pad = 40, gap = 40;
  const auto H = env.spec().height, W = env.spec().width;
  const double panel_w = cell * W, panel_h = cell * H;
  svg::Document doc(2 * panel_w + gap + 2 * pad, panel_h + 2 * pad + 20);
  doc.text(pad + panel_w + gap / 2, 20, title, 14, "middle");
  double qmax = 0.0;
  std::uint64_t vmax = 0;
  for (StateId s = 0; s < env.num_states(); ++s) {
    qmax = std::max(qmax, w.max_q[s][goal_index(GoalKind::Forward)]);
    vmax = std::max(vmax, w.visits[s]);
  }
  for (int panel = 0; panel < 2; ++panel) {
    const double x0 = pad + panel * (panel_w + gap), y0 = pad + 10;
    doc.text(x0 + panel_w / 2, y0 - 8, panel == 0 ? "max_a Q (forward goal)" : "forward-mode visits", 12, "middle");
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < W; ++c) {
        const double x = x0 + c * cell, y = y0 + r * cell;
        if (env.spec().is_wall({r, c})) {
          doc.rect(x, y, cell, cell, "#404040");
          continue;
        }
        const StateId s = env.state_of({r, c});
        const double v = panel == 0 ? w.max_q[s][goal_index(GoalKind::Forward)] : static_cast<double>(w.visits[s]);
        const double norm = panel == 0 ? (qmax > 0 ? v / qmax : 0.0) : (vmax > 0 ? v / static_cast<double>(vmax) : 0.0);
        doc.rect(x, y, cell, cell, svg::colormap(norm), "stroke=\"#ffffff\" stroke-width=\"0.5\"");
        doc.text(x + cell / 2, y + cell / 2 + 4, panel == 0 ? svg::fixed(v, 2) : svg::fixed(v, 0), 9, "middle",
                 norm > 0.6 ? "#000" : "#fff");
      }
  }
  return doc.str();
}

/// Heatmap for one seed directory at `start_step`; requires q_snapshot_<step>.csv.
inline std::string heatmap_for_run(const fs::path& dir, std::uint64_t start_step, std::uint64_t window = 2000) {
  const ExperimentConfig cfg = config_from_json(Json::parse(io::read_file(dir / "config.json")));
  const GridWorld env(cfg.env.load(), cfg.deployment);
  const fs::path snap = dir / ("q_snapshot_" + std::to_string(start_step) + ".csv");
  if (!fs::exists(snap))
    throw ConfigError("heatmap: no Q snapshot for step " + std::to_string(start_step) + " in '" + dir.string() +
                      "' (add it to heatmap_steps)");
  const auto rows = io::read_train_csv(env, dir / "train.csv");
  const auto w = metrics::heatmap(rows, start_step, io::read_qtable_csv(env, snap), window);
  return render_heatmap(env, w, cfg.name + " " + dir.filename().string() + ", steps " +
                                    std::to_string(start_step) + "+" + std::to_string(window));
}

struct ReportOptions {
  std::vector<fs::path> run_dirs;
  fs::path out;
  std::vector<std::uint64_t> heatmap_steps;
  std::uint64_t seed = 0;
  std::size_t reps = 2000;
};

/// Aggregates completed runs. Output is a pure function of the run CSVs and the report seed.
inline Json report(const ReportOptions& opt) {
  if (opt.run_dirs.empty()) throw ConfigError("report: at least one run directory required");
  std::vector<MethodRuns> methods;
  for (const auto& d : opt.run_dirs) methods.push_back(load_method(d));
  const auto compat = [](const ExperimentConfig& c) {
    Json j = to_json(c);
    return Json{j["env"], j["deployment"], j["eval"]}.dump();
  };
  for (const auto& m : methods)
    if (compat(m.config) != compat(methods.front().config))
      throw ConfigError("report: '" + m.name + "' uses a different environment, deployment or eval cadence than '" +
                        methods.front().name + "'; refusing to aggregate");

  // Per-task min-max normalization against the episodic oracle, when present.
  double high = 1.0;
  Json normalization{{"low", 0.0}, {"high", 1.0}, {"reference", nullptr}};
  for (const auto& m : methods)
    if (m.config.controller == ControllerKind::EpisodicOracle) {
      double sum = 0;
      for (const auto& s : m.seeds) sum += s.final_success;
      if (sum > 0) {
        high = sum / static_cast<double>(m.seeds.size());
        normalization = {{"low", 0.0}, {"high", high}, {"reference", m.name}};
      }
      break;
    }

  fs::create_directories(opt.out);
  Json agg{{"normalization", normalization}, {"report_seed", opt.seed}, {"reps", opt.reps}, {"methods", Json::array()}};
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const auto& m = methods[mi];
    std::vector<double> finals, aucs, lens;
    Json per_seed = Json::array();
    for (const auto& s : m.seeds) {
      finals.push_back(metrics::normalize(s.final_success, 0.0, high));
      aucs.push_back(metrics::normalize(s.auc, 0.0, high));
      lens.push_back(s.mean_traj_len);
      per_seed.push_back({{"seed", s.seed}, {"final_success", s.final_success}, {"auc", s.auc},
                          {"mean_trajectory_length", s.mean_traj_len}});
    }
    const std::uint64_t seed = opt.seed + mi;
    agg["methods"].push_back(
        {{"name", m.name},
         {"controller", std::string(to_string(m.config.controller))},
         {"bootstrap", std::string(to_string(m.config.agent.bootstrap))},
         {"config_hash", m.hash},
         {"num_seeds", m.seeds.size()},
         {"final_success",
          {{"iqm", stat_json(metrics::bootstrap_ci({finals}, metrics::Statistic::IQM, opt.reps, 0.95, seed))},
           {"mean", stat_json(metrics::bootstrap_ci({finals}, metrics::Statistic::Mean, opt.reps, 0.95, seed))}}},
         {"auc",
          {{"iqm", stat_json(metrics::bootstrap_ci({aucs}, metrics::Statistic::IQM, opt.reps, 0.95, seed))},
           {"mean", stat_json(metrics::bootstrap_ci({aucs}, metrics::Statistic::Mean, opt.reps, 0.95, seed))}}},
         {"mean_trajectory_length",
          stat_json(metrics::bootstrap_ci({lens}, metrics::Statistic::Mean, opt.reps, 0.95, seed))},
         {"per_seed", per_seed}});
  }
  io::write_file(opt.out / "aggregate.json", agg.dump(2) + "\n");

  // Learning curves with bootstrap bands over seeds.
  {
    const double W = 760, H = 460, x0 = 80, y0 = 50, pw = 520, ph = 340;
    svg::Document doc(W, H);
    const double xmax = static_cast<double>(methods.front().config.deployment.total_train_steps);
    svg::Axes ax(doc, x0, y0, pw, ph, {0.0, xmax}, {0.0, 1.0});
    ax.frame("Evaluation success rate (mean, 95% CI)", "training step", "success");
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const auto& m = methods[mi];
      const std::string color = svg::kPalette[mi % svg::kPalette.size()];
      std::vector<std::pair<double, double>> mid, band_hi, band_lo;
      for (std::size_t k = 0; k < m.seeds.front().curve.size(); ++k) {
        std::vector<double> ys;
        for (const auto& s : m.seeds)
          if (k < s.curve.size()) ys.push_back(metrics::normalize(s.curve[k].second, 0.0, high));
        const auto st = metrics::bootstrap_ci({ys}, metrics::Statistic::Mean, opt.reps, 0.95, opt.seed + 7919 * (mi + 1) + k);
        const double x = ax.px(static_cast<double>(m.seeds.front().curve[k].first));
        mid.emplace_back(x, ax.py(st.point));
        band_hi.emplace_back(x, ax.py(std::min(1.0, st.ci_high)));
        band_lo.emplace_back(x, ax.py(std::max(0.0, st.ci_low)));
      }
      std::vector<std::pair<double, double>> band = band_hi;
      band.insert(band.end(), band_lo.rbegin(), band_lo.rend());
      doc.polygon(band, color, 0.2);
      doc.polyline(mid, color, 2.0);
      doc.rect(x0 + pw + 20, y0 + 10 + 20 * mi, 12, 12, color);
      doc.text(x0 + pw + 38, y0 + 21 + 20 * mi, m.name, 12);
    }
    io::write_file(opt.out / "learning_curves.svg", doc.str());
  }

  // Mean trajectory length per method, with per-seed dots.
  {
    const double W = 760, H = 460, x0 = 80, y0 = 50, pw = 600, ph = 320;
    svg::Document doc(W, H);
    double ymax = 1.0;
    for (const auto& m : methods)
      for (const auto& s : m.seeds) ymax = std::max(ymax, s.mean_traj_len);
    svg::Axes ax(doc, x0, y0, pw, ph, {0.0, static_cast<double>(methods.size())}, {0.0, ymax * 1.1});
    ax.frame("Mean trajectory length", "", "steps", 5, false);
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const auto& m = methods[mi];
      const std::string color = svg::kPalette[mi % svg::kPalette.size()];
      std::vector<double> lens;
      for (const auto& s : m.seeds) lens.push_back(s.mean_traj_len);
      const auto st = metrics::bootstrap_ci({lens}, metrics::Statistic::Mean, opt.reps, 0.95, opt.seed + mi);
      const double cx = ax.px(mi + 0.5);
      doc.rect(cx - 20, ax.py(st.point), 40, ax.py(0) - ax.py(st.point), color, "fill-opacity=\"0.6\"");
      doc.line(cx, ax.py(st.ci_low), cx, ax.py(st.ci_high), "#000", 1.5);
      for (double l : lens) doc.rect(cx - 2, ax.py(l) - 2, 4, 4, "#000");
      doc.text(cx, ax.py(0) + 18, m.name, 11, "middle");
    }
    io::write_file(opt.out / "trajectory_lengths.svg", doc.str());
  }

  for (auto step : opt.heatmap_steps)
    for (const auto& m : methods) {
      const auto& dir = m.seeds.front().dir;
      io::write_file(opt.out / ("heatmap_" + m.name + "_" + std::to_string(step) + ".svg"), heatmap_for_run(dir, step));
    }
  return agg;
}

}  // namespace risc::harness
