#include "harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>

#include "bc.hpp"
#include "error.hpp"
#include "io.hpp"
#include "json.hpp"
#include "parallel.hpp"
#include "plot.hpp"
#include "ppo.hpp"

#ifndef BACKPLAY_VERSION_STRING
#define BACKPLAY_VERSION_STRING "0.0.0"
#endif

namespace backplay {

namespace fs = std::filesystem;
using nlohmann::json;

std::string version_string() { return BACKPLAY_VERSION_STRING; }

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fixed(double v, int precision = 6) { return format_na(v, precision); }

double parse_number(const std::string& field) {
  if (field == "N/A") return kNaN;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != field.size() || field.empty()) fail(ErrorCode::kParse, "not a number: '" + field + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

json report_json(const EvalReport& r) {
  auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  return {{"pct_optimal", r.pct_optimal},
          {"pct_within_5", r.pct_within_5},
          {"avg_subopt", num(r.avg_suboptimality)},
          {"std_subopt", num(r.std_suboptimality)},
          {"success_rate", r.success_rate},
          {"episodes", r.rows.size()}};
}

std::string format_eval_rows(const EvalReport& r) {
  std::string out = "maze_id,optimal_len,reached,length\n";
  for (const EvalRow& row : r.rows)
    out += hex_id(row.maze_id) + "," + std::to_string(row.optimal_len) + "," + (row.reached ? "1" : "0") + "," +
           std::to_string(row.length) + "\n";
  return out;
}

EvalReport parse_eval_rows(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != "maze_id,optimal_len,reached,length")
    fail(ErrorCode::kParse, "evaluation CSV: bad header");
  std::vector<EvalRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    if (f.size() != 4) fail(ErrorCode::kParse, "evaluation CSV line " + std::to_string(i + 1) + ": expected 4 fields");
    EvalRow row;
    row.maze_id = std::stoull(f[0], nullptr, 16);
    row.optimal_len = std::stoi(f[1]);
    row.reached = f[2] == "1";
    row.length = std::stoi(f[3]);
    rows.push_back(row);
  }
  return summarize_rows(std::move(rows));
}

// Optimizer state: "BPOP", u32 version, u64 n, i64 step, then m and v.
std::string serialize_adam(const Adam& adam) {
  std::string out = "BPOP";
  auto put = [&out](const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); };
  const std::uint32_t version = 1;
  const std::uint64_t n = adam.first_moment().size();
  const std::int64_t t = adam.step_count();
  put(&version, 4);
  put(&n, 8);
  put(&t, 8);
  put(adam.first_moment().data(), n * 8);
  put(adam.second_moment().data(), n * 8);
  return out;
}

void deserialize_adam(const std::string& bytes, Adam& adam) {
  const std::size_t n_expected = adam.first_moment().size();
  if (bytes.size() != 24 + 16 * n_expected || bytes.compare(0, 4, "BPOP") != 0)
    fail(ErrorCode::kParse, "optimizer state does not match the network");
  std::uint32_t version;
  std::uint64_t n;
  std::int64_t t;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&n, bytes.data() + 8, 8);
  std::memcpy(&t, bytes.data() + 16, 8);
  if (version != 1 || n != n_expected) fail(ErrorCode::kParse, "optimizer state version or size mismatch");
  std::memcpy(adam.first_moment().data(), bytes.data() + 24, n * 8);
  std::memcpy(adam.second_moment().data(), bytes.data() + 24 + n * 8, n * 8);
  adam.step_count() = t;
}

json cells_json(const auto& cells) {
  json arr = json::array();
  for (const Cell& c : cells) arr.push_back({c.row, c.col});
  return arr;
}

template <typename Container>
Container cells_from_json(const json& arr) {
  Container out;
  for (const json& c : arr) out.push_back(Cell{c.at(0).get<int>(), c.at(1).get<int>()});
  return out;
}

std::string actions_header() {
  std::string h = "epoch";
  for (Action a : kAllActions) h += std::string(",") + action_name(a);
  return h + "\n";
}

std::string hex(std::uint64_t v) { return hex_id(v); }

}  // namespace

std::string metrics_header() {
  return "epoch,regime,seed,success_rate,pct_optimal,pct_within_5,avg_subopt,std_subopt,policy_loss,value_loss,"
         "entropy,mean_start_distance";
}

std::string format_metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = metrics_header() + "\n";
  for (const MetricRow& r : rows) {
    out += std::to_string(r.epoch) + "," + r.regime + "," + std::to_string(r.seed) + "," + fixed(r.success_rate) + "," +
           fixed(r.pct_optimal) + "," + fixed(r.pct_within_5) + "," + fixed(r.avg_subopt) + "," + fixed(r.std_subopt) +
           "," + fixed(r.policy_loss) + "," + fixed(r.value_loss) + "," + fixed(r.entropy) + "," +
           fixed(r.mean_start_distance) + "\n";
  }
  return out;
}

std::vector<MetricRow> parse_metrics_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != metrics_header()) fail(ErrorCode::kParse, "metrics CSV: bad header");
  std::vector<MetricRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    if (f.size() != 12) fail(ErrorCode::kParse, "metrics CSV line " + std::to_string(i + 1) + ": expected 12 fields");
    MetricRow r;
    r.epoch = static_cast<int>(parse_number(f[0]));
    r.regime = f[1];
    r.seed = std::stoull(f[2]);
    r.success_rate = parse_number(f[3]);
    r.pct_optimal = parse_number(f[4]);
    r.pct_within_5 = parse_number(f[5]);
    r.avg_subopt = parse_number(f[6]);
    r.std_subopt = parse_number(f[7]);
    r.policy_loss = parse_number(f[8]);
    r.value_loss = parse_number(f[9]);
    r.entropy = parse_number(f[10]);
    r.mean_start_distance = parse_number(f[11]);
    if (!rows.empty() && r.epoch <= rows.back().epoch)
      fail(ErrorCode::kParse, "metrics CSV line " + std::to_string(i + 1) + ": epochs not increasing");
    rows.push_back(r);
  }
  return rows;
}

std::vector<Maze> generate_maze_set(const MazeGenConfig& gen, int count, std::uint64_t seed) {
  std::vector<Maze> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(i)});
    out.push_back(generate_maze(rng, gen));
  }
  return out;
}

std::vector<Demonstration> generate_demos(const std::vector<Maze>& mazes, int gap, const DemoConfig& cfg,
                                          std::uint64_t seed) {
  std::vector<Demonstration> out;
  for (std::size_t i = 0; i < mazes.size(); ++i) {
    const Maze& m = mazes[i];
    if (gap == 0) {
      out.push_back(shortest_path(m));
      continue;
    }
    const double p = cfg.follow_probability.value_or(default_follow_probability(m.shortest_path_length(), gap));
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(gap), 0x64656d6fULL});
    out.push_back(noisy_astar_demo(m, gap, p, rng, cfg.max_attempts));
  }
  return out;
}

namespace {

std::vector<fs::path> files_with_extension(const std::string& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) fail(ErrorCode::kIo, "not a directory: " + dir);
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ext) out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<Maze> load_maze_dir(const std::string& dir) {
  std::vector<Maze> out;
  for (const auto& p : files_with_extension(dir, ".maze")) out.push_back(load_maze_file(p.string()));
  if (out.empty()) fail(ErrorCode::kIo, "no .maze files in " + dir);
  return out;
}

std::vector<Demonstration> load_demo_dir(const std::string& dir, const std::vector<Maze>& mazes) {
  std::map<std::uint64_t, const Maze*> by_id;
  for (const Maze& m : mazes) by_id[m.id()] = &m;
  std::vector<Demonstration> out;
  for (const auto& p : files_with_extension(dir, ".demo")) {
    Demonstration d = load_demo_file(p.string());
    auto it = by_id.find(d.maze_id);
    if (it == by_id.end()) continue;  // demo for a maze outside this set
    validate_demo(d, it->second);
    out.push_back(std::move(d));
  }
  return out;
}

Dataset prepare_dataset(const ExperimentConfig& cfg) {
  Dataset data;
  if (!cfg.mazes_dir.empty()) {
    data.train = load_maze_dir(cfg.mazes_dir);
  } else {
    data.train = generate_maze_set(cfg.mazes.gen, cfg.mazes.count, cfg.mazes.seed);
  }
  if (cfg.mazes.heldout_count > 0)
    data.heldout = generate_maze_set(cfg.mazes.gen, cfg.mazes.heldout_count, derive_seed(cfg.mazes.seed, {0x68656c64ULL}));

  const bool any_demo_regime = std::any_of(cfg.regimes.begin(), cfg.regimes.end(), uses_demos);
  if (!any_demo_regime) return data;
  if (!cfg.demos_dir.empty()) {
    const auto loaded = load_demo_dir(cfg.demos_dir, data.train);
    for (int gap : cfg.demos.gaps) {
      std::vector<Demonstration> set;
      for (const Maze& m : data.train) {
        auto it = std::find_if(loaded.begin(), loaded.end(),
                               [&](const Demonstration& d) { return d.maze_id == m.id() && d.gap_n == gap; });
        if (it == loaded.end())
          fail(ErrorCode::kConfig, "no gap-" + std::to_string(gap) + " demonstration for maze " + hex_id(m.id()) +
                                       " in " + cfg.demos_dir);
        set.push_back(*it);
      }
      data.demos[gap] = std::move(set);
    }
  } else {
    for (int gap : cfg.demos.gaps) data.demos[gap] = generate_demos(data.train, gap, cfg.demos, cfg.mazes.seed);
  }
  return data;
}

std::string run_label(const RunSpec& spec) {
  std::string s = regime_name(spec.regime);
  if (spec.gap >= 0) s += "_gap" + std::to_string(spec.gap);
  return s + "_seed" + std::to_string(spec.seed);
}

int RunRecord::first_epoch_reaching(double threshold) const {
  for (const MetricRow& r : rows)
    if (r.success_rate >= threshold) return r.epoch;
  return -1;
}

std::vector<RunSpec> expand_runs(const ExperimentConfig& cfg) {
  std::vector<RunSpec> out;
  for (Regime r : cfg.regimes) {
    const std::vector<int> gaps = uses_demos(r) ? cfg.demos.gaps : std::vector<int>{-1};
    for (int gap : gaps)
      for (std::uint64_t seed : cfg.seeds) out.push_back({r, gap, seed});
  }
  return out;
}

namespace {

struct RunState {
  int next_epoch = 0;
  std::uint64_t config_hash = 0;
  std::string label;
  std::vector<RcgPool> pools;
};

json state_json(const RunState& s) {
  json pools = json::array();
  for (const RcgPool& p : s.pools)
    pools.push_back({{"new", cells_json(p.new_starts)}, {"old", cells_json(p.old_starts)}});
  return {{"next_epoch", s.next_epoch}, {"config_hash", hex(s.config_hash)}, {"run", s.label}, {"rcg_pools", pools}};
}

std::vector<std::string> filter_action_lines(const std::string& text, int before_epoch) {
  std::vector<std::string> out;
  const auto lines = lines_of(text);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    if (!f.empty() && std::stoi(f[0]) < before_epoch) out.push_back(lines[i]);
  }
  return out;
}

}  // namespace

RunRecord train_run(const ExperimentConfig& cfg, const Dataset& data, const RunSpec& spec, const std::string& run_dir,
                    const TrainOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.spec = spec;
  rec.config_hash = config_hash(cfg);
  rec.version = version_string();
  rec.dir = run_dir;
  const fs::path dir(run_dir);
  try {
    validate(cfg);
    const std::vector<Maze>& mazes = data.train;
    if (mazes.empty()) fail(ErrorCode::kConfig, "empty training maze set");
    for (const Maze& m : mazes)
      if (m.width() != mazes[0].width() || m.height() != mazes[0].height())
        fail(ErrorCode::kConfig, "training mazes differ in size");
    const int max_steps = cfg.mazes.max_steps;
    const std::string regime = regime_name(spec.regime);

    const std::vector<Demonstration>* demos = nullptr;
    if (uses_demos(spec.regime)) {
      auto it = data.demos.find(spec.gap);
      if (it == data.demos.end()) fail(ErrorCode::kConfig, "no demonstrations for gap " + std::to_string(spec.gap));
      demos = &it->second;
      if (demos->size() != mazes.size()) fail(ErrorCode::kConfig, "demonstration count does not match maze count");
      for (std::size_t i = 0; i < mazes.size(); ++i)
        if ((*demos)[i].maze_id != mazes[i].id()) fail(ErrorCode::kConfig, "demonstrations are not in maze order");
    }

    const Architecture arch{observation_size(mazes[0].width(), mazes[0].height()), cfg.ppo.hidden, cfg.ppo.hidden,
                            kNumActions, 4};
    Rng init_rng = make_rng(spec.seed, {0x696e6974ULL});
    PolicyValueNet net = PolicyValueNet::initialized(arch, init_rng);
    Adam adam(net.params().size(), cfg.ppo.learning_rate);

    std::vector<StartStateSampler> samplers;
    for (std::size_t i = 0; i < mazes.size(); ++i) {
      switch (spec.regime) {
        case Regime::kBackplay: samplers.emplace_back(BackplaySampler{cfg.schedule, (*demos)[i]}); break;
        case Regime::kUniform: samplers.emplace_back(UniformSampler{(*demos)[i]}); break;
        case Regime::kRcg: {
          ReverseCurriculumSampler s;
          s.pool.params = cfg.rcg.params;
          s.switch_epoch = cfg.schedule.terminal_epoch();
          samplers.emplace_back(std::move(s));
          break;
        }
        default: samplers.emplace_back(StandardSampler{}); break;
      }
    }
    std::vector<TrainingTask> tasks;
    for (std::size_t i = 0; i < mazes.size(); ++i) tasks.push_back({&mazes[i], &samplers[i]});

    std::optional<BehaviorCloner> cloner;
    if (spec.regime == Regime::kBc) cloner.emplace(mazes, *demos, net, cfg.bc.learning_rate);
    Adam& optimizer = cloner ? cloner->optimizer() : adam;

    RunState state;
    state.config_hash = rec.config_hash;
    state.label = run_label(spec);
    std::vector<std::string> action_lines;

    if (opts.resume && opts.write_files && fs::exists(dir / "state.json")) {
      const json s = json::parse(read_file(dir / "state.json"));
      if (s.value("config_hash", "") != hex(rec.config_hash) || s.value("run", "") != state.label) {
        std::clog << "[" << state.label << "] existing state belongs to a different configuration; starting over\n";
      } else {
        state.next_epoch = s.at("next_epoch").get<int>();
        net = load_checkpoint((dir / "checkpoint.bin").string());
        if (!(net.architecture() == arch)) fail(ErrorCode::kConfig, "checkpoint architecture mismatch");
        deserialize_adam(read_file(dir / "optimizer.bin"), optimizer);
        for (const MetricRow& r : parse_metrics_csv(read_file(dir / "metrics.csv")))
          if (r.epoch < state.next_epoch) rec.rows.push_back(r);
        if (fs::exists(dir / "actions.csv"))
          action_lines = filter_action_lines(read_file(dir / "actions.csv"), state.next_epoch);
        if (spec.regime == Regime::kRcg) {
          const json& pools = s.at("rcg_pools");
          if (pools.size() != samplers.size()) fail(ErrorCode::kParse, "resume state has the wrong pool count");
          for (std::size_t i = 0; i < samplers.size(); ++i) {
            auto& pool = std::get<ReverseCurriculumSampler>(samplers[i]).pool;
            pool.new_starts = cells_from_json<std::vector<Cell>>(pools[i].at("new"));
            pool.old_starts = cells_from_json<std::deque<Cell>>(pools[i].at("old"));
          }
        }
        std::clog << "[" << state.label << "] resuming at epoch " << state.next_epoch << "\n";
      }
    }

    auto save_all = [&](int next_epoch) {
      if (!opts.write_files) return;
      state.next_epoch = next_epoch;
      state.pools.clear();
      if (spec.regime == Regime::kRcg)
        for (const auto& s : samplers) state.pools.push_back(std::get<ReverseCurriculumSampler>(s).pool);
      save_checkpoint(net, (dir / "checkpoint.bin").string());
      write_file(dir / "optimizer.bin", serialize_adam(optimizer));
      write_file(dir / "metrics.csv", format_metrics_csv(rec.rows));
      std::string actions = actions_header();
      for (const auto& l : action_lines) actions += l + "\n";
      write_file(dir / "actions.csv", actions);
      write_file(dir / "state.json", state_json(state).dump(2) + "\n");
    };

    for (int epoch = state.next_epoch; epoch < cfg.epochs; ++epoch) {
      MetricRow row;
      row.epoch = epoch;
      row.regime = regime;
      row.seed = spec.seed;
      if (cloner) {
        cloner->step();
        row.policy_loss = cloner->report().loss;
        row.value_loss = row.entropy = row.mean_start_distance = kNaN;
      } else {
        if (spec.regime == Regime::kRcg && epoch % cfg.rcg.update_every == 0 &&
            epoch < cfg.schedule.terminal_epoch()) {
          const ActionPolicy policy = sampling_policy(net);
          for (std::size_t i = 0; i < samplers.size(); ++i) {
            auto& s = std::get<ReverseCurriculumSampler>(samplers[i]);
            Rng rng = make_rng(spec.seed, {static_cast<std::uint64_t>(epoch), i, 0x726367ULL});
            s.pool = rcg_update_pool(s.pool, mazes[i], policy, max_steps, rng);
            if (s.pool.empty()) s.pool.new_starts.push_back(mazes[i].goal());
          }
        }
        RolloutBatch batch = collect_rollouts(tasks, net, cfg.ppo, max_steps, epoch, spec.seed);
        compute_gae(batch, cfg.ppo.gamma, cfg.ppo.gae_tau);
        const UpdateStats stats = ppo_update(net, adam, batch, cfg.ppo, epoch, spec.seed);
        row.policy_loss = stats.policy_loss;
        row.value_loss = stats.value_loss;
        row.entropy = stats.entropy;
        row.mean_start_distance = batch.mean_start_distance;
        std::string line = std::to_string(epoch);
        for (long c : batch.action_counts) line += "," + std::to_string(c);
        action_lines.push_back(line);
      }
      const bool last = epoch == cfg.epochs - 1;
      if (epoch % cfg.eval_every == 0 || last) {
        const EvalReport r = evaluate_policy(net, mazes, 1, max_steps);
        row.success_rate = r.success_rate;
        row.pct_optimal = r.pct_optimal;
        row.pct_within_5 = r.pct_within_5;
        row.avg_subopt = r.avg_suboptimality;
        row.std_subopt = r.std_suboptimality;
        rec.rows.push_back(row);
        if (opts.on_row) opts.on_row(spec, row);
      }
      if ((epoch + 1) % cfg.checkpoint_every == 0 || last) save_all(epoch + 1);
    }

    rec.final_eval = evaluate_policy(net, mazes, 1, max_steps);
    if (!data.heldout.empty()) rec.heldout_eval = evaluate_policy(net, data.heldout, 1, max_steps);
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (opts.write_files) {
    try {
      json f = {{"run", run_label(spec)},
                {"regime", regime_name(spec.regime)},
                {"gap", spec.gap},
                {"seed", spec.seed},
                {"config_hash", hex(rec.config_hash)},
                {"version", rec.version},
                {"failed", rec.failed},
                {"error", rec.error},
                {"wall_seconds", rec.wall_seconds},
                {"first_epoch_50", rec.first_epoch_reaching(0.5)}};
      if (!rec.failed) {
        f["final"] = report_json(rec.final_eval);
        write_file(dir / "final_eval.csv", format_eval_rows(rec.final_eval));
        if (rec.heldout_eval) {
          f["heldout"] = report_json(*rec.heldout_eval);
          write_file(dir / "heldout_eval.csv", format_eval_rows(*rec.heldout_eval));
        }
      }
      write_file(dir / "final.json", f.dump(2) + "\n");
    } catch (const std::exception& e) {
      if (!rec.failed) {
        rec.failed = true;
        rec.error = e.what();
      }
    }
  }
  return rec;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const TrainOptions& opts) {
  validate(cfg);
  const Dataset data = prepare_dataset(cfg);
  const fs::path out(cfg.output_dir);
  if (opts.write_files) {
    write_file(out / "config.json", dump_config(cfg));
    if (cfg.mazes_dir.empty())
      for (std::size_t i = 0; i < data.train.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "maze_%03zu", i);
        save_maze_file(data.train[i], (out / "mazes" / (std::string(name) + ".maze")).string());
        for (const auto& [gap, demos] : data.demos)
          save_demo_file(demos[i], (out / "demos" / (std::string(name) + "_gap" + std::to_string(gap) + ".demo")).string());
      }
  }
  const auto specs = expand_runs(cfg);
  std::vector<RunRecord> records(specs.size());
  std::mutex log_mutex;
  parallel_for(specs.size(), cfg.parallel_runs, [&](std::size_t i) {
    records[i] = train_run(cfg, data, specs[i], (out / run_label(specs[i])).string(), opts);
    std::lock_guard lock(log_mutex);
    if (records[i].failed)
      std::clog << "[" << run_label(specs[i]) << "] failed: " << records[i].error << "\n";
  });
  if (opts.write_files) {
    const auto summary = summarize(records);
    write_file(out / "summary.csv", format_summary_csv(summary));
    write_file(out / "summary.md", format_summary_markdown(summary));
    const bool has_backplay =
        std::find(cfg.regimes.begin(), cfg.regimes.end(), Regime::kBackplay) != cfg.regimes.end();
    try {
      write_file(out / "learning_curve.svg",
                 learning_curve_svg(records, has_backplay ? cfg.schedule.terminal_epoch() : -1));
    } catch (const Error&) {
      // every run failed before its first evaluation
    }
  }
  return records;
}

namespace {

// Larger is better.
bool better(const EvalReport& a, const EvalReport& b) {
  if (a.pct_optimal != b.pct_optimal) return a.pct_optimal > b.pct_optimal;
  if (a.pct_within_5 != b.pct_within_5) return a.pct_within_5 > b.pct_within_5;
  if (a.success_rate != b.success_rate) return a.success_rate > b.success_rate;
  const double sa = a.has_suboptimality() ? a.avg_suboptimality : std::numeric_limits<double>::infinity();
  const double sb = b.has_suboptimality() ? b.avg_suboptimality : std::numeric_limits<double>::infinity();
  return sa < sb;
}

SummaryRow summary_row(const std::string& regime, int gap, const char* convention, int seeds, std::uint64_t best_seed,
                       const EvalReport& r) {
  return {regime,         gap,           convention,          seeds,         best_seed,
          r.pct_optimal, r.pct_within_5, r.avg_suboptimality, r.std_suboptimality, r.success_rate};
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records) {
  std::vector<std::pair<std::string, int>> order;
  std::map<std::pair<std::string, int>, std::vector<const RunRecord*>> groups;
  for (const RunRecord& r : records) {
    if (r.failed) continue;
    const auto key = std::make_pair(regime_name(r.spec.regime), r.spec.gap);
    if (!groups.contains(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    const auto& group = groups[key];
    const RunRecord* best = group.front();
    std::vector<EvalRow> pooled;
    for (const RunRecord* r : group) {
      if (better(r->final_eval, best->final_eval)) best = r;
      pooled.insert(pooled.end(), r->final_eval.rows.begin(), r->final_eval.rows.end());
    }
    const int n = static_cast<int>(group.size());
    out.push_back(summary_row(key.first, key.second, "best", n, best->spec.seed, best->final_eval));
    out.push_back(summary_row(key.first, key.second, "mean", n, 0, summarize_rows(std::move(pooled))));
  }
  return out;
}

std::string format_summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "regime,gap,convention,seeds,best_seed,pct_optimal,pct_within_5,avg_subopt,std_subopt,success_rate\n";
  for (const SummaryRow& r : rows)
    out += r.regime + "," + (r.gap < 0 ? std::string("N/A") : std::to_string(r.gap)) + "," + r.convention + "," +
           std::to_string(r.seeds) + "," + (r.convention == "best" ? std::to_string(r.best_seed) : "N/A") + "," +
           fixed(r.pct_optimal, 2) + "," + fixed(r.pct_within_5, 2) + "," + fixed(r.avg_subopt, 2) + "," +
           fixed(r.std_subopt, 2) + "," + fixed(r.success_rate, 4) + "\n";
  return out;
}

std::string format_summary_markdown(const std::vector<SummaryRow>& rows) {
  std::string out =
      "| Regime | Gap | Seeds | % Optimal | % 0-5 Optimal | Avg Suboptimality | Std Suboptimality |\n"
      "|---|---|---|---|---|---|---|\n";
  for (const SummaryRow& r : rows) {
    const std::string name = r.regime + (r.convention == "best" ? " (best, seed " + std::to_string(r.best_seed) + ")"
                                                                : " (mean)");
    out += "| " + name + " | " + (r.gap < 0 ? std::string("-") : std::to_string(r.gap)) + " | " +
           std::to_string(r.seeds) + " | " + fixed(r.pct_optimal, 1) + " | " + fixed(r.pct_within_5, 1) + " | " +
           fixed(r.avg_subopt, 2) + " | " + fixed(r.std_subopt, 2) + " |\n";
  }
  return out;
}

std::vector<RunRecord> load_run_records(const std::string& output_dir) {
  if (!fs::is_directory(output_dir)) fail(ErrorCode::kIo, "not a directory: " + output_dir);
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(output_dir))
    if (entry.is_directory() && fs::exists(entry.path() / "final.json")) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<RunRecord> out;
  for (const auto& d : dirs) {
    const json f = json::parse(read_file(d / "final.json"));
    RunRecord r;
    r.spec.regime = parse_regime(f.at("regime").get<std::string>());
    r.spec.gap = f.at("gap").get<int>();
    r.spec.seed = f.at("seed").get<std::uint64_t>();
    r.config_hash = std::stoull(f.at("config_hash").get<std::string>(), nullptr, 16);
    r.version = f.at("version").get<std::string>();
    r.failed = f.at("failed").get<bool>();
    r.error = f.at("error").get<std::string>();
    r.wall_seconds = f.at("wall_seconds").get<double>();
    r.dir = d.string();
    if (fs::exists(d / "metrics.csv")) r.rows = parse_metrics_csv(read_file(d / "metrics.csv"));
    if (!r.failed) r.final_eval = parse_eval_rows(read_file(d / "final_eval.csv"));
    if (fs::exists(d / "heldout_eval.csv")) r.heldout_eval = parse_eval_rows(read_file(d / "heldout_eval.csv"));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace backplay
