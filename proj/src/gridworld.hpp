#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "random.hpp"

namespace backplay {

struct Cell {
  int row = 0;
  int col = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

enum class Action : std::uint8_t { kPass = 0, kUp = 1, kDown = 2, kLeft = 3, kRight = 4 };

inline constexpr int kNumActions = 5;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::kPass, Action::kUp, Action::kDown, Action::kLeft, Action::kRight};

Action action_from_int(int value);
inline int to_int(Action a) { return static_cast<int>(a); }
const char* action_name(Action a);

// Target cell of a move, ignoring walls and bounds.
Cell displaced(Cell c, Action a);

// Static world description. Construct through Maze::create (validates every
// invariant) or the generators / parsers below.
class Maze {
 public:
  static Maze create(int width, int height, std::vector<Cell> walls, Cell start,
                     Cell goal);

  int width() const { return width_; }
  int height() const { return height_; }
  int num_cells() const { return width_ * height_; }
  Cell start() const { return start_; }
  Cell goal() const { return goal_; }
  std::uint64_t id() const { return id_; }
  // Sorted row-major.
  const std::vector<Cell>& walls() const { return walls_; }

  bool in_bounds(Cell c) const {
    return c.row >= 0 && c.row < height_ && c.col >= 0 && c.col < width_;
  }
  bool is_wall(Cell c) const { return wall_mask_[index(c)] != 0; }
  bool is_open(Cell c) const { return in_bounds(c) && !is_wall(c); }
  int index(Cell c) const { return c.row * width_ + c.col; }
  Cell cell_at(int index) const { return {index / width_, index % width_}; }

  // BFS distance to the goal for every cell (row-major); -1 for walls and
  // cells that cannot reach the goal.
  const std::vector<int>& distance_to_goal() const { return dist_to_goal_; }
  int distance_to_goal(Cell c) const { return dist_to_goal_[index(c)]; }
  int shortest_path_length() const { return distance_to_goal(start_); }

  // Every open cell, row-major.
  std::vector<Cell> open_cells() const;

  friend bool operator==(const Maze& a, const Maze& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.walls_ == b.walls_ &&
           a.start_ == b.start_ && a.goal_ == b.goal_;
  }

 private:
  Maze() = default;

  int width_ = 0;
  int height_ = 0;
  std::vector<Cell> walls_;
  std::vector<std::uint8_t> wall_mask_;
  Cell start_;
  Cell goal_;
  std::uint64_t id_ = 0;
  std::vector<int> dist_to_goal_;
};

// BFS distances from `source` over 4-connected open cells; -1 if unreachable.
std::vector<int> bfs_distances(const Maze& maze, Cell source);

struct MazeGenConfig {
  int width = 12;
  int height = 12;
  int wall_count = 30;
  int min_path_len = 10;
};

inline constexpr int kMaxMazeRejections = 10000;

Maze generate_maze(Rng& rng, const MazeGenConfig& cfg);

struct EnvState {
  Cell agent;
  int steps_taken = 0;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepResult {
  EnvState state;
  double reward = 0.0;
  bool done = false;
  bool reached_goal = false;
};

inline constexpr double kStepPenalty = -0.03;
inline constexpr double kGoalReward = 1.0;

StepResult step(const Maze& maze, const EnvState& state, Action action, int max_steps);
EnvState reset_to(const Maze& maze, Cell cell);

// Four binary planes (agent, goal, passages, walls), each height*width,
// row-major within a plane, planes concatenated in that order.
using Observation = std::vector<double>;
inline int observation_size(int width, int height) { return 4 * width * height; }
Observation observe(const Maze& maze, const EnvState& state);
// Writes into a caller-owned buffer of observation_size() doubles.
void observe_into(const Maze& maze, Cell agent, double* out);

// Stochastic or deterministic action choice used by evaluation helpers that do
// not depend on a particular network (RCG filtering, chain estimation).
using ActionPolicy = std::function<Action(const Maze&, const EnvState&, Rng&)>;

// Follows a shortest path (ties: Up, Down, Left, Right); Pass at the goal.
ActionPolicy bfs_policy();
ActionPolicy uniform_random_policy();

// Maze text format: "MAZE v1 <w> <h>\n" followed by one line per row over
// {#, ., S, G}. The parser accepts exactly the canonical form.
std::string format_maze(const Maze& maze);
Maze parse_maze(std::string_view text);
Maze load_maze_file(const std::string& path);
void save_maze_file(const Maze& maze, const std::string& path);

std::string hex_id(std::uint64_t id);

}  // namespace backplay
