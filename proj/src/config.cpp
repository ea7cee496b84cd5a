#include "config.hpp"

#include <cstdlib>
#include <set>

#include "error.hpp"
#include "io.hpp"
#include "json.hpp"

namespace backplay {

using nlohmann::json;

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::kBackplay: return "backplay";
    case Regime::kUniform: return "uniform";
    case Regime::kStandard: return "standard";
    case Regime::kRcg: return "rcg";
    case Regime::kBc: return "bc";
  }
  return "?";
}

Regime parse_regime(const std::string& text) {
  for (Regime r : {Regime::kBackplay, Regime::kUniform, Regime::kStandard, Regime::kRcg, Regime::kBc})
    if (regime_name(r) == text) return r;
  fail(ErrorCode::kConfig, "unknown regime '" + text + "' (backplay, uniform, standard, rcg, bc)");
}

bool uses_demos(Regime r) { return r == Regime::kBackplay || r == Regime::kUniform || r == Regime::kBc; }

ExperimentConfig desk_profile() {
  ExperimentConfig c;
  c.name = "desk";
  c.mazes.gen = {12, 12, 30, 10};
  c.mazes.max_steps = 100;
  c.mazes.count = 20;
  c.ppo.workers = 16;
  c.ppo.batch_size = 1024;
  c.ppo.minibatch_size = 256;
  c.rcg.params.nearby_states = 2000;
  c.epochs = 300;
  c.schedule = WindowSchedule::paper_maze().scaled(10);
  c.output_dir = "runs/desk";
  return c;
}

ExperimentConfig paper_profile() {
  ExperimentConfig c;
  c.name = "paper";
  c.mazes.gen = {24, 24, 120, 35};
  c.mazes.max_steps = 200;
  c.mazes.count = 100;
  c.demos.gaps = {0, 5, 10};
  c.regimes = {Regime::kBackplay, Regime::kUniform, Regime::kStandard, Regime::kRcg};
  c.ppo.workers = 60;
  c.ppo.batch_size = 102400;
  c.ppo.minibatch_size = 5120;
  c.epochs = 2000;
  c.eval_every = 10;
  c.checkpoint_every = 50;
  c.rcg.update_every = 50;
  c.schedule = WindowSchedule::paper_maze();
  c.output_dir = "runs/paper";
  return c;
}

namespace {

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) fail(ErrorCode::kConfig, where + " must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.contains(it.key())) fail(ErrorCode::kConfig, "unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, where + "." + key + ": " + e.what());
  }
}

WindowSchedule schedule_from_json(const json& arr) {
  if (!arr.is_array()) fail(ErrorCode::kConfig, "schedule must be a list");
  std::vector<ScheduleEntry> entries;
  for (const json& e : arr) {
    reject_unknown(e, "schedule entry", {"epoch", "j", "k", "terminal", "window"});
    ScheduleEntry s;
    read(e, "epoch", s.epoch_start, "schedule");
    if (!e.contains("epoch")) fail(ErrorCode::kConfig, "schedule entry lacks 'epoch'");
    const bool terminal = (e.contains("terminal") && e["terminal"] == true) ||
                          (e.contains("window") && e["window"] == "terminal");
    if (terminal) {
      s.window = Window::initial_state_only();
    } else {
      if (!e.contains("j") || !e.contains("k")) fail(ErrorCode::kConfig, "schedule entry needs j and k, or terminal");
      int j = 0, k = 0;
      read(e, "j", j, "schedule");
      read(e, "k", k, "schedule");
      s.window = Window::offsets(j, k);
    }
    entries.push_back(s);
  }
  return WindowSchedule(std::move(entries));
}

json schedule_to_json(const WindowSchedule& s) {
  json arr = json::array();
  for (const auto& e : s.entries()) {
    if (e.window.terminal) arr.push_back({{"epoch", e.epoch_start}, {"terminal", true}});
    else arr.push_back({{"epoch", e.epoch_start}, {"j", e.window.j}, {"k", e.window.k}});
  }
  return arr;
}

json to_json(const ExperimentConfig& c, bool for_hash) {
  json j;
  j["name"] = c.name;
  j["maze"] = {{"width", c.mazes.gen.width},         {"height", c.mazes.gen.height},
               {"wall_count", c.mazes.gen.wall_count}, {"min_path_len", c.mazes.gen.min_path_len},
               {"max_steps", c.mazes.max_steps},       {"count", c.mazes.count},
               {"seed", c.mazes.seed},                 {"heldout_count", c.mazes.heldout_count}};
  j["demos"] = {{"gaps", c.demos.gaps}, {"max_attempts", c.demos.max_attempts}};
  if (c.demos.follow_probability) j["demos"]["follow_probability"] = *c.demos.follow_probability;
  json regimes = json::array();
  for (Regime r : c.regimes) regimes.push_back(regime_name(r));
  j["regimes"] = regimes;
  j["schedule"] = schedule_to_json(c.schedule);
  const PPOConfig& p = c.ppo;
  j["ppo"] = {{"gamma", p.gamma},
              {"learning_rate", p.learning_rate},
              {"clip", p.clip},
              {"gae_tau", p.gae_tau},
              {"entropy_coef", p.entropy_coef},
              {"value_coef", p.value_coef},
              {"ppo_epochs", p.ppo_epochs},
              {"workers", p.workers},
              {"horizon", p.horizon},
              {"batch_size", p.batch_size},
              {"minibatch_size", p.minibatch_size},
              {"normalize_advantages", p.normalize_advantages},
              {"hidden", p.hidden}};
  const RcgParams& r = c.rcg.params;
  j["rcg"] = {{"brownian_steps", r.brownian_steps}, {"n_new", r.n_new},
              {"n_old", r.n_old},                   {"return_band", {r.r_min, r.r_max}},
              {"pool_cap", r.pool_cap},             {"nearby_states", r.nearby_states},
              {"eval_episodes", r.eval_episodes},   {"update_every", c.rcg.update_every}};
  j["bc"] = {{"learning_rate", c.bc.learning_rate}};
  j["seeds"] = c.seeds;
  j["epochs"] = c.epochs;
  j["eval_every"] = c.eval_every;
  j["checkpoint_every"] = c.checkpoint_every;
  if (!for_hash) {
    j["parallel_runs"] = c.parallel_runs;
    j["output_dir"] = c.output_dir;
    if (!c.mazes_dir.empty()) j["mazes_dir"] = c.mazes_dir;
    if (!c.demos_dir.empty()) j["demos_dir"] = c.demos_dir;
  }
  return j;
}

}  // namespace

WindowSchedule parse_schedule_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kConfig, std::string("schedule JSON: ") + e.what());
  }
  return schedule_from_json(j);
}

void validate(const ExperimentConfig& c, std::vector<std::string>* warnings) {
  validate(c.ppo);
  validate_rcg_params(c.rcg.params);
  if (c.seeds.empty()) fail(ErrorCode::kConfig, "seeds must be non-empty");
  if (c.regimes.empty()) fail(ErrorCode::kConfig, "regimes must be non-empty");
  if (c.epochs < 1) fail(ErrorCode::kConfig, "epochs must be >= 1");
  if (c.eval_every < 1) fail(ErrorCode::kConfig, "eval_every must be >= 1");
  if (c.checkpoint_every < 1) fail(ErrorCode::kConfig, "checkpoint_every must be >= 1");
  if (c.rcg.update_every < 1) fail(ErrorCode::kConfig, "rcg.update_every must be >= 1");
  if (c.mazes.count < 1) fail(ErrorCode::kConfig, "maze.count must be >= 1");
  if (c.mazes.max_steps < 1) fail(ErrorCode::kConfig, "maze.max_steps must be >= 1");
  if (c.demos.gaps.empty()) fail(ErrorCode::kConfig, "demos.gaps must be non-empty");
  for (int g : c.demos.gaps)
    if (g < 0) fail(ErrorCode::kConfig, "demo gaps must be >= 0");
  if (c.demos.follow_probability && !(*c.demos.follow_probability > 0.0 && *c.demos.follow_probability <= 1.0))
    fail(ErrorCode::kConfig, "demos.follow_probability must be in (0, 1]");
  const bool has_backplay =
      std::find(c.regimes.begin(), c.regimes.end(), Regime::kBackplay) != c.regimes.end();
  if (warnings && has_backplay && c.epochs <= c.schedule.terminal_epoch())
    warnings->push_back("epochs (" + std::to_string(c.epochs) + ") never reach the terminal schedule window at epoch " +
                        std::to_string(c.schedule.terminal_epoch()));
}

ExperimentConfig parse_config(const std::string& text, std::vector<std::string>* warnings) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kConfig, std::string("config JSON: ") + e.what());
  }
  ExperimentConfig c = desk_profile();
  reject_unknown(j, "config",
                 {"name", "profile", "maze", "demos", "regimes", "schedule", "ppo", "rcg", "bc", "seeds", "epochs",
                  "eval_every", "checkpoint_every", "parallel_runs", "output_dir", "mazes_dir", "demos_dir"});
  if (j.contains("profile")) {
    const std::string p = j["profile"].get<std::string>();
    if (p == "paper") c = paper_profile();
    else if (p != "desk") fail(ErrorCode::kConfig, "profile must be 'desk' or 'paper'");
  }
  read(j, "name", c.name, "config");
  if (j.contains("maze")) {
    const json& m = j["maze"];
    reject_unknown(m, "maze", {"width", "height", "wall_count", "min_path_len", "max_steps", "count", "seed", "heldout_count"});
    read(m, "width", c.mazes.gen.width, "maze");
    read(m, "height", c.mazes.gen.height, "maze");
    read(m, "wall_count", c.mazes.gen.wall_count, "maze");
    read(m, "min_path_len", c.mazes.gen.min_path_len, "maze");
    read(m, "max_steps", c.mazes.max_steps, "maze");
    read(m, "count", c.mazes.count, "maze");
    read(m, "seed", c.mazes.seed, "maze");
    read(m, "heldout_count", c.mazes.heldout_count, "maze");
  }
  if (j.contains("demos")) {
    const json& d = j["demos"];
    reject_unknown(d, "demos", {"gaps", "max_attempts", "follow_probability"});
    read(d, "gaps", c.demos.gaps, "demos");
    read(d, "max_attempts", c.demos.max_attempts, "demos");
    if (d.contains("follow_probability") && !d["follow_probability"].is_null()) {
      double p = 0;
      read(d, "follow_probability", p, "demos");
      c.demos.follow_probability = p;
    }
  }
  if (j.contains("regimes")) {
    std::vector<std::string> names;
    read(j, "regimes", names, "config");
    c.regimes.clear();
    for (const auto& n : names) c.regimes.push_back(parse_regime(n));
  }
  if (j.contains("schedule")) c.schedule = schedule_from_json(j["schedule"]);
  if (j.contains("ppo")) {
    const json& p = j["ppo"];
    reject_unknown(p, "ppo", {"gamma", "learning_rate", "clip", "gae_tau", "entropy_coef", "value_coef", "ppo_epochs",
                              "workers", "horizon", "batch_size", "minibatch_size", "normalize_advantages", "hidden"});
    read(p, "gamma", c.ppo.gamma, "ppo");
    read(p, "learning_rate", c.ppo.learning_rate, "ppo");
    read(p, "clip", c.ppo.clip, "ppo");
    read(p, "gae_tau", c.ppo.gae_tau, "ppo");
    read(p, "entropy_coef", c.ppo.entropy_coef, "ppo");
    read(p, "value_coef", c.ppo.value_coef, "ppo");
    read(p, "ppo_epochs", c.ppo.ppo_epochs, "ppo");
    read(p, "workers", c.ppo.workers, "ppo");
    read(p, "horizon", c.ppo.horizon, "ppo");
    read(p, "batch_size", c.ppo.batch_size, "ppo");
    read(p, "minibatch_size", c.ppo.minibatch_size, "ppo");
    read(p, "normalize_advantages", c.ppo.normalize_advantages, "ppo");
    read(p, "hidden", c.ppo.hidden, "ppo");
  }
  if (j.contains("rcg")) {
    const json& r = j["rcg"];
    reject_unknown(r, "rcg", {"brownian_steps", "n_new", "n_old", "return_band", "pool_cap", "nearby_states",
                              "eval_episodes", "update_every"});
    read(r, "brownian_steps", c.rcg.params.brownian_steps, "rcg");
    read(r, "n_new", c.rcg.params.n_new, "rcg");
    read(r, "n_old", c.rcg.params.n_old, "rcg");
    read(r, "pool_cap", c.rcg.params.pool_cap, "rcg");
    read(r, "nearby_states", c.rcg.params.nearby_states, "rcg");
    read(r, "eval_episodes", c.rcg.params.eval_episodes, "rcg");
    read(r, "update_every", c.rcg.update_every, "rcg");
    if (r.contains("return_band")) {
      std::vector<double> band;
      read(r, "return_band", band, "rcg");
      if (band.size() != 2) fail(ErrorCode::kConfig, "rcg.return_band must be [min, max]");
      c.rcg.params.r_min = band[0];
      c.rcg.params.r_max = band[1];
    }
  }
  if (j.contains("bc")) {
    reject_unknown(j["bc"], "bc", {"learning_rate"});
    read(j["bc"], "learning_rate", c.bc.learning_rate, "bc");
  }
  read(j, "seeds", c.seeds, "config");
  read(j, "epochs", c.epochs, "config");
  read(j, "eval_every", c.eval_every, "config");
  read(j, "checkpoint_every", c.checkpoint_every, "config");
  read(j, "parallel_runs", c.parallel_runs, "config");
  read(j, "output_dir", c.output_dir, "config");
  read(j, "mazes_dir", c.mazes_dir, "config");
  read(j, "demos_dir", c.demos_dir, "config");
  validate(c, warnings);
  return c;
}

ExperimentConfig load_config(const std::string& path, std::vector<std::string>* warnings) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, e.what());
  }
  return parse_config(text, warnings);
}

std::string dump_config(const ExperimentConfig& cfg) { return to_json(cfg, false).dump(2) + "\n"; }

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string canon = to_json(cfg, true).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void apply_env_overrides(ExperimentConfig& cfg) {
  if (const char* s = std::getenv("BACKPLAY_SEED"); s && *s) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (!end || *end != '\0') fail(ErrorCode::kConfig, std::string("BACKPLAY_SEED is not an integer: ") + s);
    cfg.seeds = {v};
  }
}

}  // namespace backplay
