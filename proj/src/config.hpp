#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "curriculum.hpp"
#include "gridworld.hpp"
#include "ppo.hpp"

namespace backplay {

enum class Regime { kBackplay, kUniform, kStandard, kRcg, kBc };

std::string regime_name(Regime r);
Regime parse_regime(const std::string& text);
// Whether the regime consumes demonstrations (and so is run once per gap).
bool uses_demos(Regime r);

struct MazeSetConfig {
  MazeGenConfig gen;
  int max_steps = 100;
  int count = 20;
  std::uint64_t seed = 2024;
  int heldout_count = 0;
};

struct DemoConfig {
  std::vector<int> gaps = {0};
  int max_attempts = 10000;
  // Empty: derive p from the gap and optimal length.
  std::optional<double> follow_probability;
};

struct RcgConfig {
  RcgParams params;
  int update_every = 25;
};

struct BcConfig {
  double learning_rate = 1e-3;
};

struct ExperimentConfig {
  std::string name = "desk";
  MazeSetConfig mazes;
  DemoConfig demos;
  std::vector<Regime> regimes = {Regime::kBackplay, Regime::kUniform, Regime::kStandard};
  WindowSchedule schedule = WindowSchedule::paper_maze().scaled(10);
  PPOConfig ppo;
  RcgConfig rcg;
  BcConfig bc;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int epochs = 300;
  int eval_every = 1;
  int checkpoint_every = 25;
  int parallel_runs = 0;
  std::string output_dir = "runs";
  // Optional pre-generated inputs; generated from mazes.seed when empty.
  std::string mazes_dir;
  std::string demos_dir;
};

// Desk-scale defaults: 12x12 mazes with 30 walls, 20 training mazes,
// 300 epochs of 1024 transitions.
ExperimentConfig desk_profile();
// 24x24 mazes with 120 walls, 100 mazes, the maze window table, 2000 epochs,
// 102400-transition batches from 60 workers. Long-running.
ExperimentConfig paper_profile();

// Throws kConfig on schema or invariant problems. Warnings (e.g. a Backplay
// run shorter than its schedule) are appended to `warnings`.
ExperimentConfig parse_config(const std::string& json_text, std::vector<std::string>* warnings = nullptr);
ExperimentConfig load_config(const std::string& path, std::vector<std::string>* warnings = nullptr);
std::string dump_config(const ExperimentConfig& cfg);

// Hash of every field that affects results (not output_dir/parallel_runs).
std::uint64_t config_hash(const ExperimentConfig& cfg);

// BACKPLAY_SEED, when set, replaces the seed list with that single seed.
void apply_env_overrides(ExperimentConfig& cfg);

void validate(const ExperimentConfig& cfg, std::vector<std::string>* warnings = nullptr);

WindowSchedule parse_schedule_json(const std::string& json_text);

}  // namespace backplay
