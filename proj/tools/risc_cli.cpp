// Command-line front end: run, sweep, report, dump-map, dump-oracle, heatmap.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "risc/harness.hpp"

namespace {

namespace fs = std::filesystem;
using namespace risc;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Relative output paths are rooted at $RISC_OUTPUT_ROOT when it is set.
std::string rooted(const std::string& path) {
  const char* root = std::getenv("RISC_OUTPUT_ROOT");
  if (root == nullptr || *root == '\0' || fs::path(path).is_absolute()) return path;
  return (fs::path(root) / path).string();
}

Json load_config_json(const std::string& config_path, const std::vector<std::string>& overrides) {
  Json j = config_path.empty() ? to_json(ExperimentConfig{}) : load_json_file(config_path);
  for (const auto& o : overrides) apply_override(j, o);
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reset-free RL laboratory: competency-based goal switching on gridworlds"};
  app.require_subcommand(1);

  std::string config_path, out_dir, map_path, spec_path, run_dir, svg_out;
  std::vector<std::string> overrides;
  std::vector<std::uint64_t> seeds, heatmap_steps;
  std::vector<std::string> report_dirs;
  std::size_t parallel = 1, reps = 2000;
  std::uint64_t report_seed = 0, step = 0, window = 2000;
  double gamma = 0.95;

  auto* run = app.add_subcommand("run", "Train one configuration for one or more seeds");
  run->add_option("--config", config_path, "Experiment config (JSON)");
  run->add_option("--seed", seeds, "Seed(s) to run; defaults to the config's seed list");
  run->add_option("--set", overrides, "Override a config value, e.g. --set switch.zeta=0.25");
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");

  auto* sweep = app.add_subcommand("sweep", "Run a hyperparameter grid");
  sweep->add_option("--spec", spec_path, "Sweep spec (JSON); default grid over beta, m/M and zeta");
  sweep->add_option("--parallel", parallel, "Concurrent runs")->check(CLI::PositiveNumber);
  sweep->add_option("--set", overrides, "Override a value in the base config");
  sweep->add_option("--out", out_dir, "Sweep output directory");

  auto* report = app.add_subcommand("report", "Aggregate completed runs into JSON and SVG");
  report->add_option("runs", report_dirs, "Run directories (one per configuration)")->required();
  report->add_option("--out", out_dir, "Report directory")->required();
  report->add_option("--heatmap-step", heatmap_steps, "Render heatmaps starting at these steps");
  report->add_option("--seed", report_seed, "Bootstrap seed");
  report->add_option("--reps", reps, "Bootstrap replications")->check(CLI::PositiveNumber);

  auto* dump_map = app.add_subcommand("dump-map", "Print a layout in the text map format");
  dump_map->add_option("--map", map_path, "Map file to normalize; defaults to the built-in four rooms");
  dump_map->add_option("--config", config_path, "Take the layout from a config");

  auto* dump_oracle = app.add_subcommand("dump-oracle", "Print BFS distances, V* and optimal competency as CSV");
  dump_oracle->add_option("--config", config_path, "Take the layout and discount from a config");
  dump_oracle->add_option("--map", map_path, "Map file");
  auto* gamma_opt = dump_oracle->add_option("--gamma", gamma, "Discount factor");

  auto* heatmap = app.add_subcommand("heatmap", "Render a Q-value / visitation heatmap for one seed directory");
  heatmap->add_option("--run", run_dir, "Seed directory containing train.csv")->required();
  heatmap->add_option("--step", step, "Window start step (needs a matching Q snapshot)")->required();
  heatmap->add_option("--window", window, "Forward-mode steps to count");
  heatmap->add_option("--out", svg_out, "Output SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      Json j = load_config_json(config_path, overrides);
      if (!out_dir.empty()) j["output_dir"] = out_dir;
      ExperimentConfig cfg = config_from_json(j);
      cfg.output_dir = rooted(cfg.output_dir);
      for (auto s : seeds.empty() ? cfg.seeds : seeds) {
        const auto dir = harness::run(cfg, s);
        std::cout << dir.string() << "\n";
      }
    } else if (*sweep) {
      harness::SweepSpec spec = spec_path.empty() ? harness::SweepSpec{} : harness::sweep_from_json(load_json_file(spec_path));
      if (spec_path.empty()) spec.grid = harness::SweepSpec::default_grid();
      for (const auto& o : overrides) apply_override(spec.base, o);
      if (!out_dir.empty()) spec.output_dir = out_dir;
      spec.output_dir = rooted(spec.output_dir);
      const auto outcomes = harness::sweep(spec, parallel);
      std::size_t failed = 0;
      for (const auto& o : outcomes)
        if (!o.ok) {
          ++failed;
          std::cerr << "cell " << o.cell << " seed " << o.seed << " failed: " << o.error << "\n";
        }
      std::cout << outcomes.size() - failed << "/" << outcomes.size() << " runs completed; index at "
                << (fs::path(spec.output_dir) / "sweep_index.csv").string() << "\n";
      if (failed) return kExitRuntime;
    } else if (*report) {
      harness::ReportOptions opt;
      for (const auto& d : report_dirs) opt.run_dirs.emplace_back(d);
      opt.out = rooted(out_dir);
      opt.heatmap_steps = heatmap_steps;
      opt.seed = report_seed;
      opt.reps = reps;
      harness::report(opt);
      std::cout << (opt.out / "aggregate.json").string() << "\n";
    } else if (*dump_map) {
      GridSpec spec = four_rooms();
      if (!config_path.empty()) spec = config_from_json(load_json_file(config_path)).env.load();
      if (!map_path.empty()) spec = EnvSource{"", map_path}.load();
      std::cout << to_map_text(spec);
    } else if (*dump_oracle) {
      GridSpec spec = four_rooms();
      if (!config_path.empty()) {
        const auto cfg = config_from_json(load_json_file(config_path));
        spec = cfg.env.load();
        if (gamma_opt->count() == 0) gamma = cfg.agent.gamma;
      }
      if (!map_path.empty()) spec = EnvSource{"", map_path}.load();
      std::cout << io::oracle_csv(GridWorld(spec), gamma);
    } else if (*heatmap) {
      io::write_file(svg_out, harness::heatmap_for_run(run_dir, step, window));
      std::cout << svg_out << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UsageError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
