#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "risc/env.hpp"
#include "risc/learner.hpp"
#include "risc/metrics.hpp"
#include "risc/oracle.hpp"
#include "risc/switching.hpp"

namespace risc::io {

namespace fs = std::filesystem;

inline std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

inline void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << contents;
  if (!out.flush()) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Column layouts -------------------------------------------------------------

inline std::string train_csv(const GridWorld& env, std::span<const TrainRow> rows) {
  std::string out = "step,goal_kind,traj_len_at_boundary,switch_reason,epsilon,replay_size,agent_x,agent_y\n";
  out.reserve(rows.size() * 48);
  for (const auto& r : rows) {
    const Cell c = env.cell_of(r.state);
    out += std::to_string(r.step) + ',' + std::string(to_string(r.goal)) + ',' + std::to_string(r.traj_len) + ',' +
           std::string(to_string(r.boundary)) + ',' + format_number(r.epsilon) + ',' + std::to_string(r.replay_size) +
           ',' + std::to_string(c.col) + ',' + std::to_string(c.row) + '\n';
  }
  return out;
}

inline std::string eval_csv(std::span<const metrics::EvalRecord> records) {
  std::string out = "train_step,episode,return,success,length\n";
  for (const auto& r : records)
    out += std::to_string(r.train_step) + ',' + std::to_string(r.episode) + ',' + format_number(r.episode_return) +
           ',' + (r.success ? "1" : "0") + ',' + std::to_string(r.length) + '\n';
  return out;
}

inline std::string trace_csv(std::span<const SwitchTraceRow> rows) {
  std::string out = "step,t,goal_kind,reason,c,lambda,drew\n";
  for (const auto& r : rows)
    out += std::to_string(r.step) + ',' + std::to_string(r.t) + ',' + std::string(to_string(r.goal)) + ',' +
           std::string(to_string(r.reason)) + ',' + opt_number(r.competency) + ',' + opt_number(r.lambda) + ',' +
           opt_number(r.draw) + '\n';
  return out;
}

/// Shared by Q-tables and success-critic tables.
inline std::string qtable_csv(const GridWorld& env, const QTable& q) {
  std::string out = "cell_x,cell_y,goal_kind,action,q\n";
  for (StateId s = 0; s < q.num_states(); ++s) {
    const Cell c = env.cell_of(s);
    for (GoalKind g : {GoalKind::Forward, GoalKind::Reset})
      for (ActionId a = 0; a < q.num_actions(); ++a)
        out += std::to_string(c.col) + ',' + std::to_string(c.row) + ',' + std::string(to_string(g)) + ',' +
               std::to_string(a) + ',' + format_number(q.at(s, g, a)) + '\n';
  }
  return out;
}

inline std::string oracle_csv(const GridWorld& env, double gamma) {
  std::string out = "cell_x,cell_y,goal_kind,dist,v_star,f_star\n";
  std::array<oracle::DistanceTable, kNumGoals> dist{oracle::shortest_paths(env, env.goal(GoalKind::Forward)),
                                                    oracle::shortest_paths(env, env.goal(GoalKind::Reset))};
  std::array<oracle::ValueTable, kNumGoals> values{oracle::value_iteration(env, env.goal(GoalKind::Forward), gamma),
                                                   oracle::value_iteration(env, env.goal(GoalKind::Reset), gamma)};
  for (const auto& [cell, g] : env.enumerate_states()) {
    const StateId s = env.state_of(cell);
    const auto d = dist[goal_index(g)][s];
    std::string f_star;
    if (d && *d > 0) f_star = format_number(oracle::optimal_competency(*d, gamma));
    else if (d) f_star = "1";
    out += std::to_string(cell.col) + ',' + std::to_string(cell.row) + ',' + std::string(to_string(g)) + ',' +
           (d ? std::to_string(*d) : std::string("unreachable")) + ',' + format_number(values[goal_index(g)][s]) + ',' +
           f_star + '\n';
  }
  return out;
}

// Readers ----------------------------------------------------------------------

/// Minimal CSV table: header names plus string cells. No quoting is used by our writers.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::runtime_error("csv: missing column '" + std::string(name) + "'");
  }
};

inline std::vector<std::string> split(std::string_view line, char delim = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(delim, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      t.header = split(line);
      first = false;
    } else {
      t.rows.push_back(split(line));
      if (t.rows.back().size() != t.header.size()) throw std::runtime_error("csv: ragged row");
    }
  }
  return t;
}

template <typename T>
T parse_number(const std::string& s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::runtime_error("csv: bad number '" + s + "'");
  return v;
}

inline GoalKind parse_goal(const std::string& s) {
  if (s == "forward") return GoalKind::Forward;
  if (s == "reset") return GoalKind::Reset;
  throw std::runtime_error("csv: bad goal kind '" + s + "'");
}

inline SwitchReason parse_reason(const std::string& s) {
  for (auto r : {SwitchReason::None, SwitchReason::GoalReached, SwitchReason::Truncated, SwitchReason::EarlySwitch,
                 SwitchReason::HardReset})
    if (to_string(r) == s) return r;
  throw std::runtime_error("csv: bad switch reason '" + s + "'");
}

inline std::vector<TrainRow> read_train_csv(const GridWorld& env, const fs::path& path) {
  const CsvTable t = parse_csv(read_file(path));
  const auto c_step = t.column("step"), c_goal = t.column("goal_kind"), c_len = t.column("traj_len_at_boundary"),
             c_reason = t.column("switch_reason"), c_eps = t.column("epsilon"), c_replay = t.column("replay_size"),
             c_x = t.column("agent_x"), c_y = t.column("agent_y");
  std::vector<TrainRow> rows;
  rows.reserve(t.rows.size());
  for (const auto& r : t.rows)
    rows.push_back({parse_number<std::uint64_t>(r[c_step]), parse_goal(r[c_goal]),
                    env.state_of({parse_number<int>(r[c_y]), parse_number<int>(r[c_x])}), parse_reason(r[c_reason]),
                    parse_number<std::uint64_t>(r[c_len]), parse_number<double>(r[c_eps]),
                    parse_number<std::size_t>(r[c_replay])});
  return rows;
}

inline std::vector<metrics::EvalRecord> read_eval_csv(const fs::path& path) {
  const CsvTable t = parse_csv(read_file(path));
  const auto c_step = t.column("train_step"), c_ep = t.column("episode"), c_ret = t.column("return"),
             c_succ = t.column("success"), c_len = t.column("length");
  std::vector<metrics::EvalRecord> out;
  for (const auto& r : t.rows)
    out.push_back({parse_number<std::uint64_t>(r[c_step]), parse_number<std::size_t>(r[c_ep]),
                   parse_number<double>(r[c_ret]), r[c_succ] == "1", parse_number<std::uint64_t>(r[c_len])});
  return out;
}

inline QTable read_qtable_csv(const GridWorld& env, const fs::path& path) {
  const CsvTable t = parse_csv(read_file(path));
  const auto c_x = t.column("cell_x"), c_y = t.column("cell_y"), c_goal = t.column("goal_kind"),
             c_a = t.column("action"), c_q = t.column("q");
  QTable q(env.num_states(), env.num_actions());
  for (const auto& r : t.rows)
    q.at(env.state_of({parse_number<int>(r[c_y]), parse_number<int>(r[c_x])}), parse_goal(r[c_goal]),
         parse_number<ActionId>(r[c_a])) = parse_number<double>(r[c_q]);
  return q;
}

/// Per-evaluation success rates in train-step order.
inline std::vector<std::pair<std::uint64_t, double>> learning_curve(std::span<const metrics::EvalRecord> records) {
  std::map<std::uint64_t, std::pair<std::size_t, std::size_t>> acc;
  for (const auto& r : records) {
    auto& [succ, n] = acc[r.train_step];
    succ += r.success ? 1 : 0;
    ++n;
  }
  std::vector<std::pair<std::uint64_t, double>> out;
  for (const auto& [step, sn] : acc) out.emplace_back(step, static_cast<double>(sn.first) / static_cast<double>(sn.second));
  return out;
}

}  // namespace risc::io
