#pragma once

#include <deque>
#include <string>
#include <variant>
#include <vector>

#include "demos.hpp"
#include "gridworld.hpp"

namespace backplay {

// Half-open offset interval [j, k) counted in steps back from the end of a
// demonstration, or the terminal marker (initial state only).
struct Window {
  int j = 0;
  int k = 0;
  bool terminal = false;

  static Window offsets(int j, int k) { return {j, k, false}; }
  static Window initial_state_only() { return {0, 0, true}; }

  friend bool operator==(const Window&, const Window&) = default;
};

struct ScheduleEntry {
  int epoch_start = 0;
  Window window;

  friend bool operator==(const ScheduleEntry&, const ScheduleEntry&) = default;
};

class WindowSchedule {
 public:
  // Validates ordering, the leading epoch-0 entry, window bounds, and that a
  // terminal entry exists (it must be the last one).
  explicit WindowSchedule(std::vector<ScheduleEntry> entries);

  // The maze table used for 24x24 mazes and 2000+ epochs.
  static WindowSchedule paper_maze();
  // Same windows with every epoch boundary divided by `divisor`.
  WindowSchedule scaled(int divisor) const;

  const std::vector<ScheduleEntry>& entries() const { return entries_; }
  int terminal_epoch() const { return entries_.back().epoch_start; }

 private:
  std::vector<ScheduleEntry> entries_;
};

Window active_window(const WindowSchedule& schedule, int epoch);

struct RcgParams {
  int brownian_steps = 50;
  int n_new = 200;
  int n_old = 100;
  double r_min = 0.1;
  double r_max = 0.9;
  int pool_cap = 10000;
  // Walk states collected before subsampling n_new candidates.
  int nearby_states = 10000;
  int eval_episodes = 8;
};

void validate_rcg_params(const RcgParams& params);

struct RcgPool {
  RcgParams params;
  std::vector<Cell> new_starts;
  std::deque<Cell> old_starts;
  // Candidates examined / kept by the most recent update, for logging.
  int last_candidates = 0;
  int last_kept = 0;

  bool empty() const { return new_starts.empty() && old_starts.empty(); }
};

// Brownian expansion from the current starts (the goal for a fresh pool),
// filtered by the policy's measured success rate.
RcgPool rcg_update_pool(const RcgPool& pool, const Maze& maze, const ActionPolicy& policy,
                        int max_steps, Rng& rng);

struct BackplaySampler {
  WindowSchedule schedule;
  Demonstration demo;
};
struct UniformSampler {
  Demonstration demo;
};
struct StandardSampler {};
struct ReverseCurriculumSampler {
  RcgPool pool;
  // From this epoch on, episodes start at the true initial state (< 0: never).
  int switch_epoch = -1;
};

using StartStateSampler =
    std::variant<BackplaySampler, UniformSampler, StandardSampler, ReverseCurriculumSampler>;

Cell sample_start(const StartStateSampler& sampler, const Maze& maze, int epoch, Rng& rng);

// Demonstration state `offset` steps back from the end, clamped to states[0].
Cell demo_state_from_end(const Demonstration& demo, int offset);

std::string sampler_name(const StartStateSampler& sampler);

}  // namespace backplay
