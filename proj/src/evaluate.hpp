#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gridworld.hpp"
#include "net.hpp"

namespace backplay {

struct EvalRow {
  std::uint64_t maze_id = 0;
  int optimal_len = 0;
  bool reached = false;
  int length = 0;  // steps taken (max_steps on failure)

  int suboptimality() const { return length - optimal_len; }
};

// Percentages are in [0, 100]; success_rate is a fraction. Suboptimality
// statistics cover successful episodes only and are NaN when there are none.
struct EvalReport {
  double pct_optimal = 0.0;
  double pct_within_5 = 0.0;
  double avg_suboptimality = 0.0;
  double std_suboptimality = 0.0;
  double success_rate = 0.0;
  std::vector<EvalRow> rows;

  bool has_suboptimality() const;
};

EvalReport summarize_rows(std::vector<EvalRow> rows);

// Greedy (argmax) rollouts from each maze's true start.
EvalReport evaluate_policy(const PolicyValueNet& net, std::span<const Maze> mazes,
                           int episodes_per_maze, int max_steps);

// Same protocol for an arbitrary deterministic action rule; `policy` is given
// a fixed rng it should not depend on.
EvalReport evaluate_action_policy(const ActionPolicy& policy, std::span<const Maze> mazes,
                                  int episodes_per_maze, int max_steps);

// Greedy action of the network at one state.
Action greedy_action(const PolicyValueNet& net, const Maze& maze, Cell agent);

// Samples from the softmax policy.
ActionPolicy sampling_policy(const PolicyValueNet& net);
ActionPolicy greedy_policy(const PolicyValueNet& net);

// Action probabilities at one state.
std::vector<double> action_probabilities(const PolicyValueNet& net, const Maze& maze, Cell agent);

std::string format_na(double value, int precision = 2);

}  // namespace backplay
