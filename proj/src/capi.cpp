#include "backplay/backplay.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <limits>
#include <new>
#include <sstream>
#include <string>

#include "analysis.hpp"
#include "config.hpp"
#include "demos.hpp"
#include "error.hpp"
#include "evaluate.hpp"
#include "gridworld.hpp"
#include "harness.hpp"
#include "io.hpp"
#include "json.hpp"
#include "net.hpp"
#include "plot.hpp"

using namespace backplay;

struct bp_maze {
  Maze maze;
};
struct bp_demo {
  Demonstration demo;
};
struct bp_config {
  ExperimentConfig cfg;
};
struct bp_net {
  PolicyValueNet net;
};
struct bp_records {
  std::vector<RunRecord> records;
};

namespace {

thread_local std::string g_last_error;

bp_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return BP_ERR_INVALID_ARGUMENT;
    case ErrorCode::kInvalidState: return BP_ERR_INVALID_STATE;
    case ErrorCode::kInvalidCell: return BP_ERR_INVALID_CELL;
    case ErrorCode::kConfigInfeasible: return BP_ERR_CONFIG_INFEASIBLE;
    case ErrorCode::kParse: return BP_ERR_PARSE;
    case ErrorCode::kInvariantViolation: return BP_ERR_INVARIANT;
    case ErrorCode::kUnreachable: return BP_ERR_UNREACHABLE;
    case ErrorCode::kExhaustedAttempts: return BP_ERR_EXHAUSTED_ATTEMPTS;
    case ErrorCode::kEmptyPool: return BP_ERR_EMPTY_POOL;
    case ErrorCode::kDomain: return BP_ERR_DOMAIN;
    case ErrorCode::kNumeric: return BP_ERR_NUMERIC;
    case ErrorCode::kNonFiniteLoss: return BP_ERR_NON_FINITE_LOSS;
    case ErrorCode::kConfig: return BP_ERR_CONFIG;
    case ErrorCode::kIo: return BP_ERR_IO;
  }
  return BP_ERR_INTERNAL;
}

template <typename Fn>
bp_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return BP_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("parse: ") + e.what();
    return BP_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return BP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return BP_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return BP_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) fail(ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

long long parse_int(const std::string& key, const std::string& value) {
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (value.empty() || *end != '\0' || errno != 0)
    fail(ErrorCode::kConfig, key + ": expected an integer, got '" + value + "'");
  return v;
}

int parse_small_int(const std::string& key, const std::string& value) {
  const long long v = parse_int(key, value);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    fail(ErrorCode::kConfig, key + ": out of range");
  return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  if (value.empty() || value[0] == '-') fail(ErrorCode::kConfig, key + ": expected a non-negative integer");
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (*end != '\0' || errno != 0) fail(ErrorCode::kConfig, key + ": expected a non-negative integer");
  return v;
}

void fill_eval(const EvalReport& r, bp_eval_result* out) {
  out->pct_optimal = r.pct_optimal;
  out->pct_within_5 = r.pct_within_5;
  out->avg_subopt = r.avg_suboptimality;
  out->std_subopt = r.std_suboptimality;
  out->success_rate = r.success_rate;
  out->episodes = static_cast<int>(r.rows.size());
}

TrainOptions make_options(int resume, bp_progress_fn progress, void* user) {
  TrainOptions o;
  o.resume = resume != 0;
  if (progress)
    o.on_row = [progress, user](const RunSpec& spec, const MetricRow& row) {
      progress(run_label(spec).c_str(), row.epoch, row.success_rate, user);
    };
  return o;
}

}  // namespace

extern "C" {

const char* bp_version(void) {
  static const std::string v = version_string();
  return v.c_str();
}

const char* bp_last_error(void) { return g_last_error.c_str(); }

const char* bp_status_name(bp_status status) {
  switch (status) {
    case BP_OK: return "ok";
    case BP_ERR_RUN_FAILED: return "run-failed";
    case BP_ERR_INTERNAL: return "internal";
    default:
      if (status >= BP_ERR_INVALID_ARGUMENT && status <= BP_ERR_IO)
        return error_code_name(static_cast<ErrorCode>(status));
      return "unknown";
  }
}

void bp_string_free(char* s) { std::free(s); }

bp_status bp_maze_generate(uint64_t seed, int width, int height, int wall_count, int min_path_len, bp_maze** out) {
  return guarded([&] {
    require(out, "out");
    Rng rng = make_rng(seed);
    *out = new bp_maze{generate_maze(rng, MazeGenConfig{width, height, wall_count, min_path_len})};
  });
}

bp_status bp_maze_parse(const char* text, bp_maze** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new bp_maze{parse_maze(text)};
  });
}

bp_status bp_maze_load(const char* path, bp_maze** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new bp_maze{load_maze_file(path)};
  });
}

bp_status bp_maze_save(const bp_maze* maze, const char* path) {
  return guarded([&] {
    require(maze, "maze");
    require(path, "path");
    save_maze_file(maze->maze, path);
  });
}

bp_status bp_maze_format(const bp_maze* maze, char** out_text) {
  return guarded([&] {
    require(maze, "maze");
    require(out_text, "out_text");
    *out_text = dup_string(format_maze(maze->maze));
  });
}

bp_status bp_maze_get_info(const bp_maze* maze, bp_maze_info* out) {
  return guarded([&] {
    require(maze, "maze");
    require(out, "out");
    const Maze& m = maze->maze;
    *out = bp_maze_info{m.width(),
                        m.height(),
                        m.start().row,
                        m.start().col,
                        m.goal().row,
                        m.goal().col,
                        static_cast<int>(m.walls().size()),
                        m.shortest_path_length(),
                        m.id()};
  });
}

void bp_maze_free(bp_maze* maze) { delete maze; }

bp_status bp_demo_shortest(const bp_maze* maze, bp_demo** out) {
  return guarded([&] {
    require(maze, "maze");
    require(out, "out");
    *out = new bp_demo{shortest_path(maze->maze)};
  });
}

bp_status bp_demo_noisy(const bp_maze* maze, int gap, double follow_probability, uint64_t seed, int max_attempts,
                        bp_demo** out) {
  return guarded([&] {
    require(maze, "maze");
    require(out, "out");
    const double p = follow_probability > 0.0
                         ? follow_probability
                         : default_follow_probability(maze->maze.shortest_path_length(), gap);
    Rng rng = make_rng(seed);
    *out = new bp_demo{noisy_astar_demo(maze->maze, gap, p, rng, max_attempts)};
  });
}

bp_status bp_demo_parse(const char* text, const bp_maze* maze, bp_demo** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new bp_demo{parse_demo(text, maze ? &maze->maze : nullptr)};
  });
}

bp_status bp_demo_load(const char* path, const bp_maze* maze, bp_demo** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new bp_demo{load_demo_file(path, maze ? &maze->maze : nullptr)};
  });
}

bp_status bp_demo_save(const bp_demo* demo, const char* path) {
  return guarded([&] {
    require(demo, "demo");
    require(path, "path");
    save_demo_file(demo->demo, path);
  });
}

bp_status bp_demo_format(const bp_demo* demo, char** out_text) {
  return guarded([&] {
    require(demo, "demo");
    require(out_text, "out_text");
    *out_text = dup_string(format_demo(demo->demo));
  });
}

bp_status bp_demo_get_info(const bp_demo* demo, bp_demo_info* out) {
  return guarded([&] {
    require(demo, "demo");
    require(out, "out");
    const Demonstration& d = demo->demo;
    *out = bp_demo_info{d.maze_id, d.length(), d.optimal_len, d.gap_n};
  });
}

void bp_demo_free(bp_demo* demo) { delete demo; }

bp_status bp_config_profile(const char* name, bp_config** out) {
  return guarded([&] {
    require(name, "name");
    require(out, "out");
    const std::string n = name;
    if (n == "desk") *out = new bp_config{desk_profile()};
    else if (n == "paper") *out = new bp_config{paper_profile()};
    else fail(ErrorCode::kConfig, "unknown profile '" + n + "' (desk, paper)");
  });
}

bp_status bp_config_parse(const char* json_text, bp_config** out) {
  return guarded([&] {
    require(json_text, "json_text");
    require(out, "out");
    *out = new bp_config{parse_config(json_text)};
  });
}

bp_status bp_config_load(const char* path, bp_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new bp_config{load_config(path)};
  });
}

bp_status bp_config_set(bp_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    ExperimentConfig c = cfg->cfg;
    const std::string k = key, v = value;
    if (k == "seeds") {
      c.seeds.clear();
      for (const auto& s : split_list(v)) c.seeds.push_back(parse_u64(k, s));
    } else if (k == "regimes") {
      c.regimes.clear();
      for (const auto& s : split_list(v)) c.regimes.push_back(parse_regime(s));
    } else if (k == "gaps") {
      c.demos.gaps.clear();
      for (const auto& s : split_list(v)) c.demos.gaps.push_back(parse_small_int(k, s));
    } else if (k == "epochs") {
      c.epochs = parse_small_int(k, v);
    } else if (k == "eval_every") {
      c.eval_every = parse_small_int(k, v);
    } else if (k == "checkpoint_every") {
      c.checkpoint_every = parse_small_int(k, v);
    } else if (k == "parallel_runs") {
      c.parallel_runs = parse_small_int(k, v);
    } else if (k == "output_dir") {
      c.output_dir = v;
    } else if (k == "mazes_dir") {
      c.mazes_dir = v;
    } else if (k == "demos_dir") {
      c.demos_dir = v;
    } else if (k == "maze_count") {
      c.mazes.count = parse_small_int(k, v);
    } else if (k == "maze_seed") {
      c.mazes.seed = parse_u64(k, v);
    } else if (k == "heldout_count") {
      c.mazes.heldout_count = parse_small_int(k, v);
    } else if (k == "workers") {
      c.ppo.workers = parse_small_int(k, v);
    } else if (k == "batch_size") {
      c.ppo.batch_size = parse_small_int(k, v);
    } else if (k == "minibatch_size") {
      c.ppo.minibatch_size = parse_small_int(k, v);
    } else {
      fail(ErrorCode::kConfig, "unknown setting '" + k + "'");
    }
    validate(c);
    cfg->cfg = std::move(c);
  });
}

bp_status bp_config_apply_env(bp_config* cfg) {
  return guarded([&] {
    require(cfg, "cfg");
    apply_env_overrides(cfg->cfg);
  });
}

bp_status bp_config_validate(const bp_config* cfg, char** out_warnings) {
  return guarded([&] {
    require(cfg, "cfg");
    std::vector<std::string> warnings;
    validate(cfg->cfg, &warnings);
    if (out_warnings) {
      std::string joined;
      for (const auto& w : warnings) joined += w + "\n";
      *out_warnings = dup_string(joined);
    }
  });
}

bp_status bp_config_dump(const bp_config* cfg, char** out_json) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_json, "out_json");
    *out_json = dup_string(dump_config(cfg->cfg));
  });
}

void bp_config_free(bp_config* cfg) { delete cfg; }

bp_status bp_generate_maze_set(const bp_config* cfg, const char* dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(dir, "dir");
    const auto& c = cfg->cfg;
    const auto mazes = generate_maze_set(c.mazes.gen, c.mazes.count, c.mazes.seed);
    for (std::size_t i = 0; i < mazes.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "maze_%03zu.maze", i);
      save_maze_file(mazes[i], (std::filesystem::path(dir) / name).string());
    }
  });
}

bp_status bp_generate_demo_set(const bp_config* cfg, const char* mazes_dir, const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(mazes_dir, "mazes_dir");
    require(out_dir, "out_dir");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(mazes_dir))
      if (e.is_regular_file() && e.path().extension() == ".maze") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) fail(ErrorCode::kIo, std::string("no .maze files in ") + mazes_dir);
    std::vector<Maze> mazes;
    for (const auto& f : files) mazes.push_back(load_maze_file(f.string()));
    for (int gap : cfg->cfg.demos.gaps) {
      const auto demos = generate_demos(mazes, gap, cfg->cfg.demos, cfg->cfg.mazes.seed);
      for (std::size_t i = 0; i < demos.size(); ++i) {
        const std::string name = files[i].stem().string() + "_gap" + std::to_string(gap) + ".demo";
        save_demo_file(demos[i], (std::filesystem::path(out_dir) / name).string());
      }
    }
  });
}

bp_status bp_run_experiment(const bp_config* cfg, int resume, bp_progress_fn progress, void* user,
                            bp_records** out) {
  bp_status st = guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = nullptr;
    auto records = run_experiment(cfg->cfg, make_options(resume, progress, user));
    *out = new bp_records{std::move(records)};
  });
  if (st == BP_OK) {
    for (const RunRecord& r : (*out)->records)
      if (r.failed) {
        g_last_error = run_label(r.spec) + ": " + r.error;
        return BP_ERR_RUN_FAILED;
      }
  }
  return st;
}

bp_status bp_train(const bp_config* cfg, const char* regime, int gap, uint64_t seed, const char* out_dir, int resume,
                   bp_progress_fn progress, void* user, bp_records** out) {
  bp_status st = guarded([&] {
    require(cfg, "cfg");
    require(regime, "regime");
    require(out_dir, "out_dir");
    require(out, "out");
    *out = nullptr;
    ExperimentConfig c = cfg->cfg;
    RunSpec spec{parse_regime(regime), gap, seed};
    if (!uses_demos(spec.regime)) spec.gap = -1;
    c.regimes = {spec.regime};
    if (spec.gap >= 0) c.demos.gaps = {spec.gap};
    c.seeds = {seed};
    validate(c);
    const Dataset data = prepare_dataset(c);
    RunRecord rec = train_run(c, data, spec, out_dir, make_options(resume, progress, user));
    *out = new bp_records{{std::move(rec)}};
  });
  if (st == BP_OK && (*out)->records.front().failed) {
    g_last_error = (*out)->records.front().error;
    return BP_ERR_RUN_FAILED;
  }
  return st;
}

bp_status bp_records_load(const char* output_dir, bp_records** out) {
  return guarded([&] {
    require(output_dir, "output_dir");
    require(out, "out");
    *out = new bp_records{load_run_records(output_dir)};
  });
}

size_t bp_records_count(const bp_records* records) { return records ? records->records.size() : 0; }

bp_status bp_records_get(const bp_records* records, size_t index, bp_run_info* out) {
  return guarded([&] {
    require(records, "records");
    require(out, "out");
    if (index >= records->records.size()) fail(ErrorCode::kInvalidArgument, "record index out of range");
    const RunRecord& r = records->records[index];
    bp_run_info info{};
    std::snprintf(info.regime, sizeof info.regime, "%s", regime_name(r.spec.regime).c_str());
    info.gap = r.spec.gap;
    info.seed = r.spec.seed;
    info.failed = r.failed ? 1 : 0;
    info.pct_optimal = r.final_eval.pct_optimal;
    info.pct_within_5 = r.final_eval.pct_within_5;
    info.avg_subopt = r.final_eval.avg_suboptimality;
    info.std_subopt = r.final_eval.std_suboptimality;
    info.success_rate = r.final_eval.success_rate;
    info.first_epoch_50 = r.first_epoch_reaching(0.5);
    info.epochs_recorded = static_cast<int>(r.rows.size());
    info.wall_seconds = r.wall_seconds;
    *out = info;
  });
}

const char* bp_records_error(const bp_records* records, size_t index) {
  if (!records || index >= records->records.size()) return "";
  return records->records[index].error.c_str();
}

bp_status bp_records_metrics_csv(const bp_records* records, size_t index, char** out_csv) {
  return guarded([&] {
    require(records, "records");
    require(out_csv, "out_csv");
    if (index >= records->records.size()) fail(ErrorCode::kInvalidArgument, "record index out of range");
    *out_csv = dup_string(format_metrics_csv(records->records[index].rows));
  });
}

bp_status bp_records_summary(const bp_records* records, int markdown, char** out_text) {
  return guarded([&] {
    require(records, "records");
    require(out_text, "out_text");
    const auto rows = summarize(records->records);
    *out_text = dup_string(markdown ? format_summary_markdown(rows) : format_summary_csv(rows));
  });
}

bp_status bp_records_plot(const bp_records* records, int marker_epoch, const char* svg_path) {
  return guarded([&] {
    require(records, "records");
    require(svg_path, "svg_path");
    write_file(svg_path, learning_curve_svg(records->records, marker_epoch));
  });
}

void bp_records_free(bp_records* records) { delete records; }

bp_status bp_net_load(const char* checkpoint_path, bp_net** out) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint_path");
    require(out, "out");
    *out = new bp_net{load_checkpoint(checkpoint_path)};
  });
}

void bp_net_free(bp_net* net) { delete net; }

bp_status bp_evaluate(const bp_net* net, const char* mazes_dir, int max_steps, bp_eval_result* out,
                      char** rows_csv) {
  return guarded([&] {
    require(net, "net");
    require(mazes_dir, "mazes_dir");
    require(out, "out");
    if (max_steps < 1) fail(ErrorCode::kInvalidArgument, "max_steps must be >= 1");
    const auto mazes = load_maze_dir(mazes_dir);
    for (const Maze& m : mazes)
      if (observation_size(m.width(), m.height()) != net->net.architecture().input_dim)
        fail(ErrorCode::kInvalidArgument, "maze size does not match the network input");
    const EvalReport r = evaluate_policy(net->net, mazes, 1, max_steps);
    fill_eval(r, out);
    if (rows_csv) {
      std::string csv = "maze_id,optimal_len,reached,length\n";
      for (const EvalRow& row : r.rows)
        csv += hex_id(row.maze_id) + "," + std::to_string(row.optimal_len) + "," + (row.reached ? "1" : "0") + "," +
               std::to_string(row.length) + "\n";
      *rows_csv = dup_string(csv);
    }
  });
}

bp_status bp_analyze_sweep(const bp_sweep_spec* spec, char** out_csv) {
  return guarded([&] {
    require(spec, "spec");
    require(spec->levels, "spec->levels");
    require(spec->strategies, "spec->strategies");
    require(out_csv, "out_csv");
    SweepSpec s;
    s.levels = parse_level_range(spec->levels);
    s.alpha = spec->alpha;
    s.beta = spec->beta;
    for (const auto& name : split_list(spec->strategies)) s.strategies.push_back(parse_strategy(name));
    if (s.strategies.empty()) fail(ErrorCode::kInvalidArgument, "no strategies given");
    s.runs = spec->runs;
    s.seed = spec->seed;
    s.options.trial_length_factor = spec->trial_length_factor;
    s.threads = spec->threads;
    *out_csv = dup_string(format_sweep_csv(run_sweep(s)));
  });
}

bp_status bp_analyze_maze(const bp_maze* maze, const char* policy, int episodes, int max_steps, uint64_t seed,
                          char** out_json) {
  return guarded([&] {
    require(maze, "maze");
    require(policy, "policy");
    require(out_json, "out_json");
    const std::string p = policy;
    ActionPolicy pol;
    if (p == "bfs") pol = bfs_policy();
    else if (p == "random") pol = uniform_random_policy();
    else fail(ErrorCode::kInvalidArgument, "policy must be 'bfs' or 'random'");
    Rng rng = make_rng(seed);
    const BirthDeathChain chain = estimate_chain(maze->maze, pol, episodes, max_steps, rng);
    nlohmann::json j;
    j["M"] = chain.M;
    j["alpha"] = chain.alpha;
    j["beta"] = chain.beta;
    j["first_passage_linear"] = first_passage_times(chain);
    const SpectralPassage sp = first_passage_spectral(chain);
    j["first_passage_spectral"] = sp.expected_steps;
    j["spectral_gap"] = spectral_gap(chain);
    *out_json = dup_string(j.dump(2) + "\n");
  });
}

bp_status bp_plot_sweep(const char* csv_text, const char* svg_path) {
  return guarded([&] {
    require(csv_text, "csv_text");
    require(svg_path, "svg_path");
    write_file(svg_path, sweep_svg(parse_sweep_csv(csv_text)));
  });
}

}  // extern "C"
