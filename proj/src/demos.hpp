#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridworld.hpp"

namespace backplay {

// A start-to-goal trajectory. states.size() == actions.size() + 1.
struct Demonstration {
  std::uint64_t maze_id = 0;
  std::vector<Cell> states;
  std::vector<Action> actions;
  int optimal_len = 0;
  int gap_n = 0;

  int length() const { return static_cast<int>(actions.size()); }

  friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

// A* from `from` to the goal with a Manhattan heuristic. Neighbours are pushed
// in the order Up, Down, Left, Right; equal f-scores pop in insertion order.
std::vector<Action> astar_plan(const Maze& maze, Cell from);

Demonstration shortest_path(const Maze& maze);

// Exploration probability used when the caller does not supply one.
double default_follow_probability(int optimal_len, int target_gap);

// Follow the A* plan with probability p, otherwise take a uniformly random
// action (and replan on deviation). Episodes are rejected until the realised
// length is exactly optimal_len + target_gap.
Demonstration noisy_astar_demo(const Maze& maze, int target_gap, double p, Rng& rng,
                               int max_attempts);

// Throws kInvariantViolation naming the failed check.
void validate_demo(const Demonstration& demo, const Maze* maze = nullptr);

std::string format_demo(const Demonstration& demo);
Demonstration parse_demo(std::string_view text, const Maze* maze = nullptr);
Demonstration load_demo_file(const std::string& path, const Maze* maze = nullptr);
void save_demo_file(const Demonstration& demo, const std::string& path);

}  // namespace backplay
