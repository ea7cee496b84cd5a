#include "curriculum.hpp"

#include <algorithm>
#include <iostream>
#include <map>

#include "error.hpp"

namespace backplay {

WindowSchedule::WindowSchedule(std::vector<ScheduleEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) fail(ErrorCode::kConfig, "schedule has no entries");
  if (entries_.front().epoch_start != 0) fail(ErrorCode::kConfig, "first schedule entry must start at epoch 0");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (i > 0 && e.epoch_start <= entries_[i - 1].epoch_start)
      fail(ErrorCode::kConfig, "schedule epochs must be strictly increasing");
    if (e.window.terminal) {
      if (i + 1 != entries_.size()) fail(ErrorCode::kConfig, "terminal entry must be the last schedule entry");
    } else if (e.window.j < 0 || e.window.j >= e.window.k) {
      fail(ErrorCode::kConfig, "schedule window must satisfy 0 <= j < k (entry " + std::to_string(i) + ")");
    }
  }
  if (!entries_.back().window.terminal) fail(ErrorCode::kConfig, "schedule lacks a terminal entry");
}

WindowSchedule WindowSchedule::paper_maze() {
  return WindowSchedule({{0, Window::offsets(0, 4)},
                         {350, Window::offsets(4, 8)},
                         {700, Window::offsets(8, 16)},
                         {1050, Window::offsets(16, 32)},
                         {1400, Window::offsets(32, 64)},
                         {1750, Window::initial_state_only()}});
}

WindowSchedule WindowSchedule::scaled(int divisor) const {
  if (divisor <= 0) fail(ErrorCode::kInvalidArgument, "schedule divisor must be positive");
  std::vector<ScheduleEntry> out = entries_;
  for (auto& e : out) e.epoch_start /= divisor;
  return WindowSchedule(std::move(out));
}

Window active_window(const WindowSchedule& schedule, int epoch) {
  if (epoch < 0) fail(ErrorCode::kInvalidArgument, "epoch must be >= 0");
  const auto& entries = schedule.entries();
  auto it = std::upper_bound(entries.begin(), entries.end(), epoch,
                             [](int e, const ScheduleEntry& s) { return e < s.epoch_start; });
  return std::prev(it)->window;
}

Cell demo_state_from_end(const Demonstration& demo, int offset) {
  const int t = demo.length();
  return demo.states[static_cast<std::size_t>(std::max(t - offset, 0))];
}

namespace {

void check_demo(const Demonstration& demo, const Maze& maze) {
  if (demo.maze_id != maze.id())
    fail(ErrorCode::kInvalidArgument, "demonstration belongs to maze " + hex_id(demo.maze_id) +
                                          ", not " + hex_id(maze.id()));
}

}  // namespace

Cell sample_start(const StartStateSampler& sampler, const Maze& maze, int epoch, Rng& rng) {
  struct Visitor {
    const Maze& maze;
    int epoch;
    Rng& rng;

    Cell operator()(const BackplaySampler& s) const {
      check_demo(s.demo, maze);
      const Window w = active_window(s.schedule, epoch);
      if (w.terminal) return maze.start();
      const int offset = std::uniform_int_distribution<int>(w.j, w.k - 1)(rng);
      return demo_state_from_end(s.demo, offset);
    }
    Cell operator()(const UniformSampler& s) const {
      check_demo(s.demo, maze);
      const int offset = std::uniform_int_distribution<int>(0, s.demo.length())(rng);
      return demo_state_from_end(s.demo, offset);
    }
    Cell operator()(const StandardSampler&) const { return maze.start(); }
    Cell operator()(const ReverseCurriculumSampler& s) const {
      if (s.switch_epoch >= 0 && epoch >= s.switch_epoch) return maze.start();
      const RcgPool& pool = s.pool;
      if (pool.empty()) fail(ErrorCode::kEmptyPool, "reverse-curriculum pool has not been expanded");
      const double total = pool.params.n_new + pool.params.n_old;
      bool from_new = !pool.new_starts.empty();
      if (from_new && !pool.old_starts.empty())
        from_new = uniform01(rng) * total < pool.params.n_new;
      if (from_new) return pool.new_starts[uniform_index(rng, pool.new_starts.size())];
      return pool.old_starts[uniform_index(rng, pool.old_starts.size())];
    }
  };
  return std::visit(Visitor{maze, epoch, rng}, sampler);
}

std::string sampler_name(const StartStateSampler& sampler) {
  switch (sampler.index()) {
    case 0: return "backplay";
    case 1: return "uniform";
    case 2: return "standard";
    default: return "rcg";
  }
}

void validate_rcg_params(const RcgParams& p) {
  if (p.brownian_steps < 1 || p.n_new < 1 || p.n_old < 0 || p.pool_cap < 1 || p.nearby_states < 1 ||
      p.eval_episodes < 1)
    fail(ErrorCode::kConfig, "rcg counts must be positive");
  if (!(0.0 <= p.r_min && p.r_min <= p.r_max && p.r_max <= 1.0))
    fail(ErrorCode::kConfig, "rcg return band must satisfy 0 <= r_min <= r_max <= 1");
}

RcgPool rcg_update_pool(const RcgPool& pool, const Maze& maze, const ActionPolicy& policy,
                        int max_steps, Rng& rng) {
  const RcgParams& p = pool.params;
  validate_rcg_params(p);

  std::vector<Cell> seeds = pool.new_starts;
  if (seeds.empty()) seeds.assign(pool.old_starts.begin(), pool.old_starts.end());
  if (seeds.empty()) seeds.push_back(maze.goal());

  // Brownian motion: uniformly random actions, blocked moves stay put, the
  // goal is not absorbing.
  std::vector<Cell> nearby;
  nearby.reserve(static_cast<std::size_t>(p.nearby_states));
  while (static_cast<int>(nearby.size()) < p.nearby_states) {
    Cell c = seeds[uniform_index(rng, seeds.size())];
    for (int s = 0; s < p.brownian_steps && static_cast<int>(nearby.size()) < p.nearby_states; ++s) {
      const Cell n = displaced(c, kAllActions[uniform_index(rng, kNumActions)]);
      if (maze.is_open(n)) c = n;
      nearby.push_back(c);
    }
  }

  std::map<Cell, bool> verdict;
  std::vector<Cell> kept;
  for (int i = 0; i < p.n_new; ++i) {
    const Cell cand = nearby[uniform_index(rng, nearby.size())];
    if (verdict.contains(cand)) continue;
    int successes = 0;
    for (int e = 0; e < p.eval_episodes; ++e) {
      EnvState s = reset_to(maze, cand);
      while (true) {
        const StepResult r = step(maze, s, policy(maze, s, rng), max_steps);
        s = r.state;
        if (r.done) {
          successes += r.reached_goal ? 1 : 0;
          break;
        }
      }
    }
    const double rate = static_cast<double>(successes) / p.eval_episodes;
    const bool keep = rate >= p.r_min && rate <= p.r_max;
    verdict[cand] = keep;
    if (keep) kept.push_back(cand);
  }

  RcgPool out = pool;
  out.last_candidates = static_cast<int>(verdict.size());
  out.last_kept = static_cast<int>(kept.size());
  if (kept.empty()) {
    std::clog << "rcg: no candidate inside [" << p.r_min << ", " << p.r_max << "] for maze "
              << hex_id(maze.id()) << "; pool unchanged\n";
    return out;
  }
  for (Cell c : pool.new_starts) out.old_starts.push_back(c);
  while (static_cast<int>(out.old_starts.size()) > p.pool_cap) out.old_starts.pop_front();
  out.new_starts = std::move(kept);
  return out;
}

}  // namespace backplay
