#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <concepts>
#include <cstdint>
#include <deque>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "risc/common.hpp"

namespace risc {

using StateId = std::size_t;
using ActionId = std::size_t;

inline constexpr std::size_t kGridActions = 4;
inline constexpr std::size_t kMaxEnumerableCells = 10'000;

enum class GridAction : ActionId { Up = 0, Down = 1, Left = 2, Right = 3 };

struct Cell {
  int row = 0;
  int col = 0;
  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

enum class GoalKind : std::uint8_t { Forward = 0, Reset = 1 };

inline constexpr std::size_t kNumGoals = 2;

constexpr std::size_t goal_index(GoalKind k) noexcept { return static_cast<std::size_t>(k); }
constexpr GoalKind other(GoalKind k) noexcept {
  return k == GoalKind::Forward ? GoalKind::Reset : GoalKind::Forward;
}
inline std::string_view to_string(GoalKind k) { return k == GoalKind::Forward ? "forward" : "reset"; }

struct Goal {
  GoalKind kind = GoalKind::Forward;
  StateId state = 0;
  friend constexpr bool operator==(const Goal&, const Goal&) = default;
};

struct DeploymentConfig {
  std::uint64_t hard_reset_frequency = 50'000;
  std::uint64_t total_train_steps = 50'000;
  std::uint64_t eval_episode_limit = 100;

  void validate() const {
    if (hard_reset_frequency == 0 || total_train_steps == 0 || eval_episode_limit == 0)
      throw UsageError("deployment: all step counts must be positive");
  }
};

struct EnvState {
  StateId agent = 0;
  std::uint64_t global_step = 0;
  friend constexpr bool operator==(const EnvState&, const EnvState&) = default;
};

/// Result of one environment step. `moved_to` is where the action led, before any
/// hard reset; `hard_reset` reports whether the environment then snapped back to the start.
struct StepOutcome {
  StateId moved_to = 0;
  bool hard_reset = false;
};

/// Pure transition structure shared by every tabular environment.
template <typename M>
concept TabularMdp = requires(const M& m, StateId s, ActionId a, GoalKind k) {
  { m.num_states() } -> std::convertible_to<std::size_t>;
  { m.num_actions() } -> std::convertible_to<std::size_t>;
  { m.next_state(s, a) } -> std::convertible_to<StateId>;
  { m.start_state() } -> std::convertible_to<StateId>;
  { m.goal(k) } -> std::convertible_to<Goal>;
};

/// Reset-free deployment wrapper: holds the mutable agent position and performs the
/// rare hard reset. Derived classes supply the pure dynamics.
template <typename Derived>
class DeploymentEnv {
 public:
  explicit DeploymentEnv(DeploymentConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const DeploymentConfig& deployment() const noexcept { return cfg_; }
  const EnvState& state() const noexcept { return state_; }

  EnvState hard_reset() {
    state_ = EnvState{self().start_state(), 0};
    return state_;
  }

  // Moves the agent without touching the hard-reset clock. Used by the episodic
  // baseline's forced resets and by evaluation on isolated copies.
  void place(StateId s) { state_.agent = s; }

  StepOutcome step(ActionId a) {
    if (a >= self().num_actions()) throw UsageError("step: invalid action index " + std::to_string(a));
    StepOutcome out{self().next_state(state_.agent, a), false};
    state_.agent = out.moved_to;
    if (++state_.global_step >= cfg_.hard_reset_frequency) {
      hard_reset();
      out.hard_reset = true;
    }
    return out;
  }

  bool success(StateId s, const Goal& g) const noexcept { return s == g.state; }
  bool success(const EnvState& s, const Goal& g) const noexcept { return success(s.agent, g); }

  double reward(StateId next, const Goal& g) const noexcept { return success(next, g) ? 1.0 : 0.0; }

 protected:
  void init_state() { hard_reset(); }

 private:
  const Derived& self() const { return static_cast<const Derived&>(*this); }
  Derived& self() { return static_cast<Derived&>(*this); }

  DeploymentConfig cfg_;
  EnvState state_{};
};

// ---------------------------------------------------------------------------
// Grid layouts
// ---------------------------------------------------------------------------

struct GridSpec {
  int width = 0;
  int height = 0;
  std::vector<Cell> walls;  // sorted, unique
  Cell start_cell{};
  Cell forward_goal_cell{};
  std::optional<Cell> reset_goal_cell;  // defaults to start_cell

  Cell reset_goal() const { return reset_goal_cell.value_or(start_cell); }

  bool in_bounds(Cell c) const noexcept { return c.row >= 0 && c.col >= 0 && c.row < height && c.col < width; }

  bool is_wall(Cell c) const {
    return !in_bounds(c) || std::binary_search(walls.begin(), walls.end(), c);
  }

  void normalize() {
    std::sort(walls.begin(), walls.end());
    walls.erase(std::unique(walls.begin(), walls.end()), walls.end());
  }

  /// Checks layout invariants; throws UsageError on the first violation.
  void validate() const {
    if (width < 3 || height < 3) throw UsageError("grid: width and height must be at least 3");
    for (Cell c : {start_cell, forward_goal_cell, reset_goal()}) {
      if (!in_bounds(c)) throw UsageError("grid: start/goal cell out of bounds");
      if (is_wall(c)) throw UsageError("grid: start/goal cell is a wall");
    }
    if (start_cell == forward_goal_cell) throw UsageError("grid: start and forward goal coincide");
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c)
        if ((r == 0 || c == 0 || r == height - 1 || c == width - 1) && !is_wall({r, c}))
          throw UsageError("grid: boundary is not enclosed at row " + std::to_string(r) + " col " +
                           std::to_string(c));
    if (!connected(start_cell, forward_goal_cell) || !connected(forward_goal_cell, reset_goal()))
      throw UsageError("grid: forward goal and start are not mutually reachable");
  }

  bool connected(Cell from, Cell to) const {
    std::vector<char> seen(static_cast<std::size_t>(width * height), 0);
    std::deque<Cell> frontier{from};
    seen[static_cast<std::size_t>(from.row * width + from.col)] = 1;
    while (!frontier.empty()) {
      Cell c = frontier.front();
      frontier.pop_front();
      if (c == to) return true;
      for (auto [dr, dc] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
        Cell n{c.row + dr, c.col + dc};
        if (is_wall(n)) continue;
        auto& flag = seen[static_cast<std::size_t>(n.row * width + n.col)];
        if (!flag) {
          flag = 1;
          frontier.push_back(n);
        }
      }
    }
    return false;
  }
};

/// Parses the plain-text map format: `#` wall, `.` free, `S` start, `G` forward goal,
/// optional `R` for a reset goal distinct from the start.
inline GridSpec parse_map(std::string_view text) {
  std::vector<std::string> rows;
  std::string line;
  std::istringstream in{std::string(text)};
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(line);
  }
  if (rows.empty()) throw UsageError("map: empty");
  GridSpec spec;
  spec.height = static_cast<int>(rows.size());
  spec.width = static_cast<int>(rows.front().size());
  bool have_start = false, have_goal = false;
  for (int r = 0; r < spec.height; ++r) {
    if (static_cast<int>(rows[r].size()) != spec.width)
      throw UsageError("map: row " + std::to_string(r) + " has inconsistent width");
    for (int c = 0; c < spec.width; ++c) {
      switch (rows[r][c]) {
        case '#': spec.walls.push_back({r, c}); break;
        case '.': break;
        case 'S':
          if (have_start) throw UsageError("map: multiple start cells");
          spec.start_cell = {r, c};
          have_start = true;
          break;
        case 'G':
          if (have_goal) throw UsageError("map: multiple goal cells");
          spec.forward_goal_cell = {r, c};
          have_goal = true;
          break;
        case 'R': spec.reset_goal_cell = Cell{r, c}; break;
        default:
          throw UsageError(std::string("map: unknown character '") + rows[r][c] + "'");
      }
    }
  }
  if (!have_start || !have_goal) throw UsageError("map: requires exactly one S and one G");
  spec.normalize();
  spec.validate();
  return spec;
}

inline std::string to_map_text(const GridSpec& spec) {
  std::string out;
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      Cell cell{r, c};
      char ch = '.';
      if (spec.is_wall(cell)) ch = '#';
      else if (cell == spec.start_cell) ch = 'S';
      else if (cell == spec.forward_goal_cell) ch = 'G';
      else if (spec.reset_goal_cell && cell == *spec.reset_goal_cell) ch = 'R';
      out += ch;
    }
    out += '\n';
  }
  return out;
}

// 11x11 with boundary walls, cross-shaped interior walls on row 5 / column 5,
// doorways at (5,2), (5,8), (2,5), (8,5). Start and goal sit in opposite corners.
inline constexpr std::string_view kFourRoomsMap =
    "###########\n"
    "#S...#....#\n"
    "#.........#\n"
    "#....#....#\n"
    "#....#....#\n"
    "##.#####.##\n"
    "#....#....#\n"
    "#....#....#\n"
    "#.........#\n"
    "#....#...G#\n"
    "###########\n";

inline GridSpec four_rooms() { return parse_map(kFourRoomsMap); }

/// 3 binary planes (agent, walls, goal), each height x width, row-major.
struct Observation {
  int height = 0;
  int width = 0;
  std::array<std::vector<std::uint8_t>, 3> planes;

  static constexpr std::size_t kAgent = 0, kWalls = 1, kGoal = 2;

  std::uint8_t at(std::size_t plane, Cell c) const {
    return planes[plane][static_cast<std::size_t>(c.row * width + c.col)];
  }
};

/// Goal-conditioned deterministic gridworld in the reset-free deployment regime.
class GridWorld : public DeploymentEnv<GridWorld> {
 public:
  explicit GridWorld(GridSpec spec, DeploymentConfig deployment = {})
      : DeploymentEnv(deployment), spec_(std::move(spec)) {
    spec_.normalize();
    spec_.validate();
    if (static_cast<std::size_t>(spec_.width) * static_cast<std::size_t>(spec_.height) > kMaxEnumerableCells)
      throw CapacityError("grid: more than 10000 cells cannot be tabulated");
    index_.assign(static_cast<std::size_t>(spec_.width * spec_.height), kNoState);
    for (int r = 0; r < spec_.height; ++r)
      for (int c = 0; c < spec_.width; ++c)
        if (!spec_.is_wall({r, c})) {
          index_[flat({r, c})] = cells_.size();
          cells_.push_back({r, c});
        }
    transitions_.resize(cells_.size() * kGridActions);
    for (StateId s = 0; s < cells_.size(); ++s)
      for (ActionId a = 0; a < kGridActions; ++a) transitions_[s * kGridActions + a] = move(s, a);
    init_state();
  }

  const GridSpec& spec() const noexcept { return spec_; }
  std::size_t num_states() const noexcept { return cells_.size(); }
  std::size_t num_actions() const noexcept { return kGridActions; }
  StateId start_state() const { return state_of(spec_.start_cell); }

  StateId next_state(StateId s, ActionId a) const { return transitions_[s * kGridActions + a]; }

  Goal goal(GoalKind k) const {
    return {k, state_of(k == GoalKind::Forward ? spec_.forward_goal_cell : spec_.reset_goal())};
  }

  Cell cell_of(StateId s) const { return cells_.at(s); }

  StateId state_of(Cell c) const {
    if (!spec_.in_bounds(c) || index_[flat(c)] == kNoState) throw UsageError("grid: cell is not free");
    return index_[flat(c)];
  }

  Observation encode(const EnvState& s, const Goal& g) const { return encode(s.agent, g); }

  Observation encode(StateId agent, const Goal& g) const {
    Observation obs{spec_.height, spec_.width, {}};
    for (auto& p : obs.planes) p.assign(static_cast<std::size_t>(spec_.width * spec_.height), 0);
    for (const Cell& w : spec_.walls) obs.planes[Observation::kWalls][flat(w)] = 1;
    obs.planes[Observation::kAgent][flat(cell_of(agent))] = 1;
    obs.planes[Observation::kGoal][flat(cell_of(g.state))] = 1;
    return obs;
  }

  /// Recovers the agent cell from an observation's agent plane.
  static Cell decode_agent(const Observation& obs) {
    const auto& p = obs.planes[Observation::kAgent];
    auto it = std::find(p.begin(), p.end(), 1);
    if (it == p.end()) throw UsageError("observation: empty agent plane");
    auto i = static_cast<int>(it - p.begin());
    return {i / obs.width, i % obs.width};
  }

  /// Every free cell crossed with both goals, in row-major cell order then goal order.
  std::vector<std::pair<Cell, GoalKind>> enumerate_states() const {
    std::vector<std::pair<Cell, GoalKind>> out;
    out.reserve(cells_.size() * kNumGoals);
    for (const Cell& c : cells_)
      for (GoalKind k : {GoalKind::Forward, GoalKind::Reset}) out.emplace_back(c, k);
    return out;
  }

 private:
  static constexpr StateId kNoState = static_cast<StateId>(-1);

  std::size_t flat(Cell c) const { return static_cast<std::size_t>(c.row * spec_.width + c.col); }

  StateId move(StateId s, ActionId a) const {
    static constexpr std::array<std::pair<int, int>, kGridActions> kDelta{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
    Cell c = cells_[s];
    Cell n{c.row + kDelta[a].first, c.col + kDelta[a].second};
    return spec_.is_wall(n) ? s : index_[flat(n)];
  }

  GridSpec spec_;
  std::vector<Cell> cells_;
  std::vector<StateId> index_;
  std::vector<StateId> transitions_;
};

/// Diagnostic chain: `length` non-goal states 0..length-1 followed by the goal state.
/// A single action moves one step right; the goal is absorbing.
class ChainMdp : public DeploymentEnv<ChainMdp> {
 public:
  explicit ChainMdp(std::size_t length, DeploymentConfig deployment = {})
      : DeploymentEnv(deployment), length_(length) {
    if (length == 0) throw UsageError("chain: length must be positive");
    init_state();
  }

  std::size_t num_states() const noexcept { return length_ + 1; }
  std::size_t num_actions() const noexcept { return 1; }
  StateId start_state() const noexcept { return 0; }
  StateId next_state(StateId s, ActionId) const noexcept { return std::min(s + 1, length_); }
  Goal goal(GoalKind k) const noexcept { return {k, k == GoalKind::Forward ? length_ : 0}; }

 private:
  std::size_t length_;
};

static_assert(TabularMdp<GridWorld>);
static_assert(TabularMdp<ChainMdp>);

}  // namespace risc
