#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "risc/env.hpp"
#include "risc/learner.hpp"
#include "risc/success_critic.hpp"
#include "risc/switching.hpp"

namespace risc {

using Json = nlohmann::json;

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr std::string_view kCodeVersion = "risc-lab 1.0.0";

struct EnvSource {
  std::string builtin = "four_rooms";  // used when map_path is empty
  std::string map_path;

  GridSpec load() const {
    if (!map_path.empty()) {
      std::ifstream in(map_path);
      if (!in) throw ConfigError("env.map_path: cannot open '" + map_path + "'");
      std::stringstream ss;
      ss << in.rdbuf();
      return parse_map(ss.str());
    }
    if (builtin == "four_rooms") return four_rooms();
    throw ConfigError("env.builtin: unknown layout '" + builtin + "'");
  }
};

struct EvalConfig {
  std::uint64_t every = 1000;
  std::size_t episodes = 10;
};

struct ExperimentConfig {
  std::string name = "experiment";
  EnvSource env;
  ControllerKind controller = ControllerKind::RISC;
  AgentConfig agent;
  double success_critic_lr = 1e-3;
  CompetencyPolicy competency_policy = CompetencyPolicy::Greedy;
  double zeta = 0.5;
  double min_length_fraction = 0.0;
  std::uint64_t max_length = 100;
  double beta = 0.95;
  DeploymentConfig deployment;
  double rc_threshold = 0.2;
  EvalConfig eval;
  std::vector<std::uint64_t> heatmap_steps;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string output_dir = "runs/experiment";
  bool record_trace = true;

  SwitchConfig switching() const { return SwitchConfig::from_fraction(zeta, min_length_fraction, max_length, beta); }

  SuccessCriticConfig success_critic() const {
    return {agent.gamma, success_critic_lr, agent.target_sync_every, competency_policy};
  }
};

namespace detail {

inline std::string_view policy_name(CompetencyPolicy p) {
  return p == CompetencyPolicy::Greedy ? "greedy" : "epsilon_mixture";
}

/// Strict reader: records every problem with its dotted path instead of stopping at the first.
class Reader {
 public:
  std::vector<std::string> errors;

  void check_keys(const Json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) {
      errors.push_back(path_or_root(path) + ": expected an object");
      return;
    }
    for (const auto& [key, _] : obj.items()) {
      bool ok = false;
      for (auto a : allowed) ok = ok || key == a;
      if (!ok) errors.push_back(join(path, key) + ": unknown key");
    }
  }

  template <typename T>
  void read(const Json& obj, const std::string& path, const char* key, T& out) {
    if (!obj.is_object() || !obj.contains(key)) return;
    const Json& v = obj.at(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
        out = v.get<double>();
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0))
          throw std::invalid_argument("expected a non-negative integer");
        out = v.get<T>();
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
        out = v.get<bool>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("expected a string");
        out = v.get<std::string>();
      } else {
        if (!v.is_array()) throw std::invalid_argument("expected an array");
        out.clear();
        for (const auto& e : v) {
          if (!e.is_number_integer() || e.get<std::int64_t>() < 0)
            throw std::invalid_argument("expected an array of non-negative integers");
          out.push_back(e.get<typename T::value_type>());
        }
      }
    } catch (const std::exception& e) {
      errors.push_back(join(path, key) + ": " + e.what());
    }
  }

  static std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
  }
  static std::string path_or_root(const std::string& p) { return p.empty() ? "<root>" : p; }
};

}  // namespace detail

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["name"] = c.name;
  j["env"] = {{"builtin", c.env.builtin}, {"map_path", c.env.map_path}};
  j["controller"] = std::string(to_string(c.controller));
  j["bootstrap"] = std::string(to_string(c.agent.bootstrap));
  j["agent"] = {{"gamma", c.agent.gamma},
                {"lr", c.agent.lr},
                {"batch_size", c.agent.batch_size},
                {"target_sync_every", c.agent.target_sync_every},
                {"initial_collect", c.agent.initial_collect},
                {"replay_capacity", c.agent.replay_capacity},
                {"eps_init", c.agent.eps_init},
                {"eps_end", c.agent.eps_end},
                {"eps_decay_steps", c.agent.eps_decay_steps}};
  j["success_critic"] = {{"lr", c.success_critic_lr}, {"policy", std::string(detail::policy_name(c.competency_policy))}};
  j["switch"] = {{"zeta", c.zeta},
                 {"min_length_fraction", c.min_length_fraction},
                 {"max_length", c.max_length},
                 {"beta", c.beta}};
  j["deployment"] = {{"hard_reset_frequency", c.deployment.hard_reset_frequency},
                     {"total_train_steps", c.deployment.total_train_steps},
                     {"eval_episode_limit", c.deployment.eval_episode_limit}};
  j["rc_threshold"] = c.rc_threshold;
  j["eval"] = {{"every", c.eval.every}, {"episodes", c.eval.episodes}};
  j["heatmap_steps"] = c.heatmap_steps;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  j["record_trace"] = c.record_trace;
  return j;
}

/// Parses and validates a config. Missing keys keep their defaults; unknown keys,
/// wrong types and out-of-range values are all reported together in one ConfigError.
inline ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  detail::Reader r;
  r.check_keys(j, "",
               {"schema_version", "name", "env", "controller", "bootstrap", "agent", "success_critic", "switch",
                "deployment", "rc_threshold", "eval", "heatmap_steps", "seeds", "output_dir", "record_trace"});
  if (!r.errors.empty() && !j.is_object()) throw ConfigError(r.errors.front());

  int version = kConfigSchemaVersion;
  r.read(j, "", "schema_version", version);
  if (version != kConfigSchemaVersion)
    r.errors.push_back("schema_version: unsupported version " + std::to_string(version));
  r.read(j, "", "name", c.name);

  if (j.contains("env")) {
    r.check_keys(j["env"], "env", {"builtin", "map_path"});
    r.read(j["env"], "env", "builtin", c.env.builtin);
    r.read(j["env"], "env", "map_path", c.env.map_path);
  }
  std::string controller(to_string(c.controller));
  r.read(j, "", "controller", controller);
  if (auto k = parse_controller(controller)) c.controller = *k;
  else r.errors.push_back("controller: unknown controller '" + controller + "'");

  std::string bootstrap(to_string(c.agent.bootstrap));
  r.read(j, "", "bootstrap", bootstrap);
  if (bootstrap == "timeout_nonterminal") c.agent.bootstrap = BootstrapStrategy::TimeoutNonterminal;
  else if (bootstrap == "timeout_terminal") c.agent.bootstrap = BootstrapStrategy::TimeoutTerminal;
  else r.errors.push_back("bootstrap: unknown strategy '" + bootstrap + "'");

  if (j.contains("agent")) {
    const auto& a = j["agent"];
    r.check_keys(a, "agent",
                 {"gamma", "lr", "batch_size", "target_sync_every", "initial_collect", "replay_capacity", "eps_init",
                  "eps_end", "eps_decay_steps"});
    r.read(a, "agent", "gamma", c.agent.gamma);
    r.read(a, "agent", "lr", c.agent.lr);
    r.read(a, "agent", "batch_size", c.agent.batch_size);
    r.read(a, "agent", "target_sync_every", c.agent.target_sync_every);
    r.read(a, "agent", "initial_collect", c.agent.initial_collect);
    r.read(a, "agent", "replay_capacity", c.agent.replay_capacity);
    r.read(a, "agent", "eps_init", c.agent.eps_init);
    r.read(a, "agent", "eps_end", c.agent.eps_end);
    r.read(a, "agent", "eps_decay_steps", c.agent.eps_decay_steps);
  }
  if (j.contains("success_critic")) {
    const auto& s = j["success_critic"];
    r.check_keys(s, "success_critic", {"lr", "policy"});
    r.read(s, "success_critic", "lr", c.success_critic_lr);
    std::string policy(detail::policy_name(c.competency_policy));
    r.read(s, "success_critic", "policy", policy);
    if (policy == "greedy") c.competency_policy = CompetencyPolicy::Greedy;
    else if (policy == "epsilon_mixture") c.competency_policy = CompetencyPolicy::EpsilonMixture;
    else r.errors.push_back("success_critic.policy: unknown policy '" + policy + "'");
  }
  if (j.contains("switch")) {
    const auto& s = j["switch"];
    r.check_keys(s, "switch", {"zeta", "min_length_fraction", "max_length", "beta"});
    r.read(s, "switch", "zeta", c.zeta);
    r.read(s, "switch", "min_length_fraction", c.min_length_fraction);
    r.read(s, "switch", "max_length", c.max_length);
    r.read(s, "switch", "beta", c.beta);
  }
  if (j.contains("deployment")) {
    const auto& d = j["deployment"];
    r.check_keys(d, "deployment", {"hard_reset_frequency", "total_train_steps", "eval_episode_limit"});
    r.read(d, "deployment", "hard_reset_frequency", c.deployment.hard_reset_frequency);
    r.read(d, "deployment", "total_train_steps", c.deployment.total_train_steps);
    r.read(d, "deployment", "eval_episode_limit", c.deployment.eval_episode_limit);
  }
  r.read(j, "", "rc_threshold", c.rc_threshold);
  if (j.contains("eval")) {
    r.check_keys(j["eval"], "eval", {"every", "episodes"});
    r.read(j["eval"], "eval", "every", c.eval.every);
    r.read(j["eval"], "eval", "episodes", c.eval.episodes);
  }
  r.read(j, "", "heatmap_steps", c.heatmap_steps);
  r.read(j, "", "seeds", c.seeds);
  r.read(j, "", "output_dir", c.output_dir);
  r.read(j, "", "record_trace", c.record_trace);

  // Semantic checks run only on well-typed input.
  if (r.errors.empty()) {
    auto guard = [&](auto&& fn) {
      try {
        fn();
      } catch (const UsageError& e) {
        r.errors.push_back(e.what());
      }
    };
    guard([&] { c.agent.validate(); });
    guard([&] { c.switching(); });
    guard([&] { c.deployment.validate(); });
    if (!(c.success_critic_lr >= 0.0 && c.success_critic_lr <= 1.0))
      r.errors.push_back("success_critic.lr: must lie in [0, 1]");
    if (!(c.rc_threshold >= 0.0 && c.rc_threshold <= 1.0)) r.errors.push_back("rc_threshold: must lie in [0, 1]");
    if (c.eval.every == 0 || c.eval.episodes == 0) r.errors.push_back("eval: every and episodes must be positive");
    if (c.seeds.empty()) r.errors.push_back("seeds: at least one seed required");
    if (c.env.map_path.empty() && c.env.builtin != "four_rooms")
      r.errors.push_back("env.builtin: unknown layout '" + c.env.builtin + "'");
    for (auto s : c.heatmap_steps)
      if (s > c.deployment.total_train_steps) r.errors.push_back("heatmap_steps: step beyond total_train_steps");
  }
  if (!r.errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : r.errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return c;
}

/// Applies `a.b.c=value` to a JSON document. The value is parsed as JSON when possible
/// and otherwise taken as a string.
inline void apply_override(Json& j, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + std::string(assignment) + "'");
  const std::string path(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  Json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("--set: malformed key path '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key)) (*node)[key] = Json::object();
    node = &(*node)[key];
    if (!node->is_object()) throw ConfigError("--set: '" + path + "' descends into a non-object");
    start = dot + 1;
  }
}

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("'" + path + "' is not valid JSON");
  return j;
}

/// Identity of the experiment, independent of where it is written and which seeds run.
inline std::string config_hash(const ExperimentConfig& c) {
  Json j = to_json(c);
  j.erase("output_dir");
  j.erase("seeds");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace risc
