#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "demos.hpp"
#include "evaluate.hpp"
#include "gridworld.hpp"

namespace backplay {

std::string version_string();

struct MetricRow {
  int epoch = 0;
  std::string regime;
  std::uint64_t seed = 0;
  double success_rate = 0.0;
  double pct_optimal = 0.0;
  double pct_within_5 = 0.0;
  double avg_subopt = 0.0;  // NaN when nothing was solved
  double std_subopt = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double mean_start_distance = 0.0;
};

std::string metrics_header();
std::string format_metrics_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> parse_metrics_csv(const std::string& text);

// Training and held-out mazes plus demonstrations keyed by gap.
struct Dataset {
  std::vector<Maze> train;
  std::vector<Maze> heldout;
  std::map<int, std::vector<Demonstration>> demos;
};

// Mazes come from cfg.mazes_dir when set (every *.maze file, sorted by name),
// otherwise they are generated from cfg.mazes.seed. Demonstrations come from
// cfg.demos_dir when set (matched to mazes by id and gap), otherwise they are
// generated.
Dataset prepare_dataset(const ExperimentConfig& cfg);

std::vector<Maze> generate_maze_set(const MazeGenConfig& gen, int count, std::uint64_t seed);
std::vector<Demonstration> generate_demos(const std::vector<Maze>& mazes, int gap, const DemoConfig& cfg,
                                          std::uint64_t seed);
std::vector<Maze> load_maze_dir(const std::string& dir);
std::vector<Demonstration> load_demo_dir(const std::string& dir, const std::vector<Maze>& mazes);

struct RunSpec {
  Regime regime = Regime::kStandard;
  int gap = -1;  // -1 for regimes without demonstrations
  std::uint64_t seed = 1;
};

std::string run_label(const RunSpec& spec);

struct RunRecord {
  RunSpec spec;
  std::uint64_t config_hash = 0;
  std::string version;
  std::vector<MetricRow> rows;
  EvalReport final_eval;
  std::optional<EvalReport> heldout_eval;
  double wall_seconds = 0.0;
  bool failed = false;
  std::string error;
  std::string dir;

  // First evaluated epoch with success_rate >= threshold, or -1.
  int first_epoch_reaching(double threshold) const;
};

struct TrainOptions {
  bool resume = true;
  bool write_files = true;
  // Called after every evaluated epoch; may be empty.
  std::function<void(const RunSpec&, const MetricRow&)> on_row;
};

// One regime/gap/seed training run. Writes metrics.csv, actions.csv,
// checkpoints and final.json under run_dir when write_files is set.
RunRecord train_run(const ExperimentConfig& cfg, const Dataset& data, const RunSpec& spec,
                    const std::string& run_dir, const TrainOptions& opts = {});

std::vector<RunSpec> expand_runs(const ExperimentConfig& cfg);

// Runs every regime x gap x seed combination on a bounded pool; failures are
// isolated into failed records. Writes summary.csv / summary.md.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const TrainOptions& opts = {});

struct SummaryRow {
  std::string regime;
  int gap = -1;
  std::string convention;  // "best" or "mean"
  int seeds = 0;
  std::uint64_t best_seed = 0;
  double pct_optimal = 0.0;
  double pct_within_5 = 0.0;
  double avg_subopt = 0.0;
  double std_subopt = 0.0;
  double success_rate = 0.0;
};

// Per (regime, gap): the best seed by final evaluation and the pooled
// evaluation over all seeds. Failed records are skipped.
std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records);
std::string format_summary_csv(const std::vector<SummaryRow>& rows);
std::string format_summary_markdown(const std::vector<SummaryRow>& rows);

// Reads the records written by run_experiment back from disk.
std::vector<RunRecord> load_run_records(const std::string& output_dir);

}  // namespace backplay
