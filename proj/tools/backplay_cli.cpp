#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "backplay/backplay.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRun = 3;

struct CliFailure {
  int code;
};

bool is_config_status(bp_status st) {
  switch (st) {
    case BP_ERR_CONFIG:
    case BP_ERR_CONFIG_INFEASIBLE:
    case BP_ERR_INVALID_ARGUMENT:
    case BP_ERR_PARSE:
    case BP_ERR_IO:
      return true;
    default:
      return false;
  }
}

void check(bp_status st, const char* what) {
  if (st == BP_OK) return;
  std::fprintf(stderr, "error: %s: %s (%s)\n", what, bp_last_error(), bp_status_name(st));
  throw CliFailure{is_config_status(st) ? kExitConfig : kExitRun};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  bp_string_free(s);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    std::fprintf(stderr, "error: cannot write %s\n", path.c_str());
    throw CliFailure{kExitConfig};
  }
  f << text;
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    std::fprintf(stderr, "error: cannot read %s\n", path.c_str());
    throw CliFailure{kExitConfig};
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct ConfigHolder {
  bp_config* cfg = nullptr;
  ~ConfigHolder() { bp_config_free(cfg); }
};

struct RecordsHolder {
  bp_records* r = nullptr;
  ~RecordsHolder() { bp_records_free(r); }
};

void load_config(ConfigHolder& h, const std::string& config_path, const std::string& profile) {
  if (!config_path.empty()) check(bp_config_load(config_path.c_str(), &h.cfg), "config");
  else check(bp_config_profile(profile.c_str(), &h.cfg), "profile");
  check(bp_config_apply_env(h.cfg), "BACKPLAY_SEED");
}

void set(ConfigHolder& h, const char* key, const std::string& value) {
  if (!value.empty()) check(bp_config_set(h.cfg, key, value.c_str()), key);
}

void print_warnings(ConfigHolder& h) {
  char* w = nullptr;
  check(bp_config_validate(h.cfg, &w), "config");
  const std::string text = take(w);
  if (!text.empty()) std::fprintf(stderr, "warning: %s", text.c_str());
}

void progress(const char* label, int epoch, double success, void*) {
  std::fprintf(stderr, "%s epoch %d success %.3f\n", label, epoch, success);
}

void print_records(const bp_records* records) {
  const size_t n = bp_records_count(records);
  for (size_t i = 0; i < n; ++i) {
    bp_run_info info;
    check(bp_records_get(records, i, &info), "records");
    if (info.failed) {
      std::printf("%s gap %d seed %llu FAILED: %s\n", info.regime, info.gap,
                  static_cast<unsigned long long>(info.seed), bp_records_error(records, i));
      continue;
    }
    std::printf("%s gap %d seed %llu: optimal %.1f%% within5 %.1f%% success %.1f%% (%.1fs)\n", info.regime,
                info.gap, static_cast<unsigned long long>(info.seed), info.pct_optimal, info.pct_within_5,
                100.0 * info.success_rate, info.wall_seconds);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backplay maze experiments"};
  app.set_version_flag("--version", std::string(bp_version()));
  app.require_subcommand(1);

  // gen-mazes
  auto* gm = app.add_subcommand("gen-mazes", "Generate a maze set");
  std::string gm_config, gm_profile = "desk", gm_out;
  std::string gm_seed, gm_count;
  gm->add_option("--config", gm_config, "Config file");
  gm->add_option("--profile", gm_profile, "desk or paper")->capture_default_str();
  gm->add_option("--seed", gm_seed, "Maze seed");
  gm->add_option("--count", gm_count, "Number of mazes");
  gm->add_option("--out", gm_out, "Output directory")->required();

  // gen-demos
  auto* gd = app.add_subcommand("gen-demos", "Generate demonstrations for a maze set");
  std::string gd_config, gd_profile = "desk", gd_mazes, gd_out, gd_seed;
  std::vector<int> gd_gaps;
  gd->add_option("--config", gd_config, "Config file");
  gd->add_option("--profile", gd_profile, "desk or paper")->capture_default_str();
  gd->add_option("--mazes", gd_mazes, "Maze directory")->required();
  gd->add_option("--gap", gd_gaps, "Suboptimality gap (repeatable)");
  gd->add_option("--seed", gd_seed, "Seed");
  gd->add_option("--out", gd_out, "Output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train one regime");
  std::string tr_config, tr_profile = "desk", tr_regime, tr_mazes, tr_demos, tr_out, tr_epochs;
  std::uint64_t tr_seed = 1;
  int tr_gap = 0;
  bool tr_fresh = false;
  tr->add_option("--regime", tr_regime, "backplay, uniform, standard, rcg or bc")->required();
  tr->add_option("--config", tr_config, "Config file");
  tr->add_option("--profile", tr_profile, "desk or paper")->capture_default_str();
  tr->add_option("--mazes", tr_mazes, "Maze directory");
  tr->add_option("--demos", tr_demos, "Demonstration directory");
  tr->add_option("--gap", tr_gap, "Demonstration gap")->capture_default_str();
  tr->add_option("--seed", tr_seed, "Seed")->capture_default_str();
  tr->add_option("--epochs", tr_epochs, "Override the epoch count");
  tr->add_option("--out", tr_out, "Run directory")->required();
  tr->add_flag("--fresh", tr_fresh, "Ignore an existing checkpoint");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Greedy evaluation of a checkpoint");
  std::string ev_ckpt, ev_mazes, ev_out;
  int ev_steps = 100;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint.bin")->required();
  ev->add_option("--mazes", ev_mazes, "Maze directory")->required();
  ev->add_option("--max-steps", ev_steps, "Step limit")->capture_default_str();
  ev->add_option("--out", ev_out, "Per-maze CSV");

  // analyze
  auto* an = app.add_subcommand("analyze", "Chain analysis");
  std::string an_sweep, an_strategies = "standard,uniform,backplay:1", an_out = "-", an_maze, an_policy = "bfs";
  double an_alpha = 0.5, an_beta = 0.0;
  int an_runs = 200, an_factor = 1, an_threads = 0, an_episodes = 200, an_steps = 200;
  std::uint64_t an_seed = 1;
  auto* sweep_opt = an->add_option("--sweep", an_sweep, "Levels, e.g. M=4..14");
  auto* maze_opt = an->add_option("--maze", an_maze, "Estimate the chain of a maze file");
  sweep_opt->excludes(maze_opt);
  an->add_option("--alpha", an_alpha)->capture_default_str();
  an->add_option("--beta", an_beta)->capture_default_str();
  an->add_option("--strategies", an_strategies)->capture_default_str();
  an->add_option("--runs", an_runs)->capture_default_str();
  an->add_option("--trial-factor", an_factor, "Trial length as a multiple of M")->capture_default_str();
  an->add_option("--threads", an_threads)->capture_default_str();
  an->add_option("--policy", an_policy, "bfs or random")->capture_default_str();
  an->add_option("--episodes", an_episodes)->capture_default_str();
  an->add_option("--max-steps", an_steps)->capture_default_str();
  an->add_option("--seed", an_seed)->capture_default_str();
  an->add_option("--out", an_out, "Output file ('-' for stdout)")->capture_default_str();

  // plot
  auto* pl = app.add_subcommand("plot", "Write SVG plots");
  std::string pl_runs, pl_sweep, pl_out;
  int pl_marker = -1;
  auto* runs_opt = pl->add_option("--runs", pl_runs, "Experiment output directory");
  auto* sweep_csv_opt = pl->add_option("--sweep", pl_sweep, "Sweep CSV");
  runs_opt->excludes(sweep_csv_opt);
  pl->add_option("--marker", pl_marker, "Epoch of the marker line");
  pl->add_option("--out", pl_out, "SVG path")->required();

  // reproduce
  auto* rp = app.add_subcommand("reproduce", "Run a full experiment profile");
  std::string rp_profile = "desk", rp_config, rp_out, rp_seeds;
  bool rp_fresh = false;
  rp->add_option("--profile", rp_profile, "desk or paper")->capture_default_str();
  rp->add_option("--config", rp_config, "Config file (overrides --profile)");
  rp->add_option("--out", rp_out, "Output directory");
  rp->add_option("--seeds", rp_seeds, "Comma-separated seeds");
  rp->add_flag("--fresh", rp_fresh, "Ignore existing checkpoints");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gm) {
      ConfigHolder h;
      load_config(h, gm_config, gm_profile);
      set(h, "maze_seed", gm_seed);
      set(h, "maze_count", gm_count);
      std::filesystem::create_directories(gm_out);
      check(bp_generate_maze_set(h.cfg, gm_out.c_str()), "gen-mazes");
    } else if (*gd) {
      ConfigHolder h;
      load_config(h, gd_config, gd_profile);
      set(h, "maze_seed", gd_seed);
      if (!gd_gaps.empty()) {
        std::string gaps;
        for (int g : gd_gaps) gaps += (gaps.empty() ? "" : ",") + std::to_string(g);
        set(h, "gaps", gaps);
      }
      std::filesystem::create_directories(gd_out);
      check(bp_generate_demo_set(h.cfg, gd_mazes.c_str(), gd_out.c_str()), "gen-demos");
    } else if (*tr) {
      ConfigHolder h;
      load_config(h, tr_config, tr_profile);
      set(h, "mazes_dir", tr_mazes);
      set(h, "demos_dir", tr_demos);
      set(h, "epochs", tr_epochs);
      print_warnings(h);
      RecordsHolder r;
      const bp_status st = bp_train(h.cfg, tr_regime.c_str(), tr_gap, tr_seed, tr_out.c_str(), tr_fresh ? 0 : 1,
                                    progress, nullptr, &r.r);
      if (r.r) print_records(r.r);
      check(st, "train");
    } else if (*ev) {
      bp_net* net = nullptr;
      check(bp_net_load(ev_ckpt.c_str(), &net), "checkpoint");
      bp_eval_result res;
      char* rows = nullptr;
      const bp_status st = bp_evaluate(net, ev_mazes.c_str(), ev_steps, &res, ev_out.empty() ? nullptr : &rows);
      bp_net_free(net);
      check(st, "evaluate");
      if (!ev_out.empty()) write_text(ev_out, take(rows));
      std::printf("episodes %d\npct_optimal %.2f\npct_within_5 %.2f\navg_subopt %.4f\nstd_subopt %.4f\nsuccess_rate %.4f\n",
                  res.episodes, res.pct_optimal, res.pct_within_5, res.avg_subopt, res.std_subopt,
                  res.success_rate);
    } else if (*an) {
      if (!an_maze.empty()) {
        bp_maze* maze = nullptr;
        check(bp_maze_load(an_maze.c_str(), &maze), "maze");
        char* json = nullptr;
        const bp_status st = bp_analyze_maze(maze, an_policy.c_str(), an_episodes, an_steps, an_seed, &json);
        bp_maze_free(maze);
        check(st, "analyze");
        write_text(an_out, take(json));
      } else {
        if (an_sweep.empty()) {
          std::fprintf(stderr, "error: analyze needs --sweep or --maze\n");
          return kExitConfig;
        }
        std::string levels = an_sweep;
        if (levels.rfind("M=", 0) == 0) levels = levels.substr(2);
        bp_sweep_spec spec{levels.c_str(), an_alpha, an_beta, an_strategies.c_str(), an_runs, an_seed, an_factor,
                           an_threads};
        char* csv = nullptr;
        check(bp_analyze_sweep(&spec, &csv), "analyze");
        write_text(an_out, take(csv));
      }
    } else if (*pl) {
      if (!pl_sweep.empty()) {
        check(bp_plot_sweep(read_text(pl_sweep).c_str(), pl_out.c_str()), "plot");
      } else if (!pl_runs.empty()) {
        RecordsHolder r;
        check(bp_records_load(pl_runs.c_str(), &r.r), "plot");
        check(bp_records_plot(r.r, pl_marker, pl_out.c_str()), "plot");
      } else {
        std::fprintf(stderr, "error: plot needs --runs or --sweep\n");
        return kExitConfig;
      }
    } else if (*rp) {
      ConfigHolder h;
      load_config(h, rp_config, rp_profile);
      set(h, "output_dir", rp_out);
      set(h, "seeds", rp_seeds);
      print_warnings(h);
      RecordsHolder r;
      const bp_status st = bp_run_experiment(h.cfg, rp_fresh ? 0 : 1, progress, nullptr, &r.r);
      if (r.r) {
        print_records(r.r);
        std::cout << take([&] {
          char* s = nullptr;
          check(bp_records_summary(r.r, 1, &s), "summary");
          return s;
        }());
      }
      check(st, "reproduce");
    }
  } catch (const CliFailure& f) {
    return f.code;
  }
  return 0;
}
