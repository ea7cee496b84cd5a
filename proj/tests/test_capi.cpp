#include <backplay/backplay.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  bp_string_free(s);
  return out;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("backplay_capi_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bp_config* small_config(const fs::path& out) {
  bp_config* cfg = nullptr;
  REQUIRE(bp_config_profile("desk", &cfg) == BP_OK);
  const char* kv[][2] = {{"maze_count", "3"}, {"workers", "2"},   {"minibatch_size", "64"},
                         {"batch_size", "128"}, {"epochs", "3"}, {"checkpoint_every", "2"},
                         {"seeds", "1"},      {"gaps", "0"},       {"regimes", "backplay,standard"}};
  for (auto& p : kv) REQUIRE(bp_config_set(cfg, p[0], p[1]) == BP_OK);
  REQUIRE(bp_config_set(cfg, "output_dir", out.string().c_str()) == BP_OK);
  return cfg;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(bp_version()).size() > 0);
  CHECK(std::string(bp_status_name(BP_OK)) == "ok");
  CHECK(std::string(bp_status_name(BP_ERR_PARSE)) == "parse");
  CHECK(std::string(bp_status_name(static_cast<bp_status>(1234))) == "unknown");
}

TEST_CASE("maze lifecycle") {
  bp_maze* m = nullptr;
  REQUIRE(bp_maze_generate(7, 12, 12, 30, 10, &m) == BP_OK);
  bp_maze_info info{};
  REQUIRE(bp_maze_get_info(m, &info) == BP_OK);
  CHECK(info.width == 12);
  CHECK(info.wall_count == 30);
  CHECK(info.shortest_path >= 10);
  char* text = nullptr;
  REQUIRE(bp_maze_format(m, &text) == BP_OK);
  const std::string t = take(text);
  bp_maze* back = nullptr;
  REQUIRE(bp_maze_parse(t.c_str(), &back) == BP_OK);
  bp_maze_info info2{};
  bp_maze_get_info(back, &info2);
  CHECK(info2.id == info.id);

  const fs::path dir = fresh_dir("maze");
  const std::string path = (dir / "a.maze").string();
  REQUIRE(bp_maze_save(m, path.c_str()) == BP_OK);
  bp_maze* loaded = nullptr;
  REQUIRE(bp_maze_load(path.c_str(), &loaded) == BP_OK);
  bp_maze_get_info(loaded, &info2);
  CHECK(info2.id == info.id);
  bp_maze_free(loaded);
  bp_maze_free(back);
  bp_maze_free(m);
  bp_maze_free(nullptr);
  fs::remove_all(dir);
}

TEST_CASE("errors carry a status and a message") {
  bp_maze* m = nullptr;
  CHECK(bp_maze_generate(1, 3, 3, 0, 50, &m) == BP_ERR_CONFIG_INFEASIBLE);
  CHECK(m == nullptr);
  CHECK(std::string(bp_last_error()).size() > 0);
  CHECK(bp_maze_parse("MAZE nonsense", &m) == BP_ERR_PARSE);
  CHECK(bp_maze_parse(nullptr, &m) == BP_ERR_INVALID_ARGUMENT);
  CHECK(bp_maze_generate(1, 12, 12, 30, 10, nullptr) == BP_ERR_INVALID_ARGUMENT);
  CHECK(bp_maze_load("/nonexistent/x.maze", &m) == BP_ERR_IO);
  bp_maze_info info{};
  CHECK(bp_maze_get_info(nullptr, &info) == BP_ERR_INVALID_ARGUMENT);
}

TEST_CASE("error messages are per thread") {
  bp_maze* m = nullptr;
  CHECK(bp_maze_parse("bad", &m) == BP_ERR_PARSE);
  const std::string mine = bp_last_error();
  std::string theirs = "unset";
  std::thread t([&] { theirs = bp_last_error(); });
  t.join();
  CHECK(theirs.empty());
  CHECK(std::string(bp_last_error()) == mine);
}

TEST_CASE("demonstrations") {
  bp_maze* m = nullptr;
  REQUIRE(bp_maze_generate(3, 12, 12, 30, 10, &m) == BP_OK);
  bp_maze_info mi{};
  bp_maze_get_info(m, &mi);
  bp_demo* d = nullptr;
  REQUIRE(bp_demo_shortest(m, &d) == BP_OK);
  bp_demo_info di{};
  bp_demo_get_info(d, &di);
  CHECK(di.length == mi.shortest_path);
  CHECK(di.gap == 0);
  CHECK(di.maze_id == mi.id);
  bp_demo_free(d);

  REQUIRE(bp_demo_noisy(m, 5, -1.0, 3, 100000, &d) == BP_OK);
  bp_demo_get_info(d, &di);
  CHECK(di.length == mi.shortest_path + 5);
  char* text = nullptr;
  REQUIRE(bp_demo_format(d, &text) == BP_OK);
  const std::string t = take(text);
  bp_demo* back = nullptr;
  REQUIRE(bp_demo_parse(t.c_str(), m, &back) == BP_OK);
  bp_demo_info bi{};
  bp_demo_get_info(back, &bi);
  CHECK(bi.length == di.length);
  CHECK(bp_demo_parse(t.substr(0, t.size() / 2).c_str(), m, &back) == BP_ERR_PARSE);
  bp_demo_free(back);
  bp_demo_free(d);

  CHECK(bp_demo_noisy(m, 5, 1.0, 3, 50, &d) == BP_ERR_EXHAUSTED_ATTEMPTS);
  CHECK(bp_demo_noisy(m, 5, 2.0, 3, 50, &d) == BP_ERR_INVALID_ARGUMENT);
  bp_maze_free(m);
}

TEST_CASE("configuration") {
  bp_config* cfg = nullptr;
  REQUIRE(bp_config_profile("paper", &cfg) == BP_OK);
  char* js = nullptr;
  REQUIRE(bp_config_dump(cfg, &js) == BP_OK);
  const std::string dumped = take(js);
  CHECK(dumped.find("102400") != std::string::npos);
  bp_config* back = nullptr;
  REQUIRE(bp_config_parse(dumped.c_str(), &back) == BP_OK);
  REQUIRE(bp_config_dump(back, &js) == BP_OK);
  CHECK(take(js) == dumped);
  bp_config_free(back);

  CHECK(bp_config_set(cfg, "epochs", "abc") == BP_ERR_CONFIG);
  CHECK(bp_config_set(cfg, "colour", "blue") == BP_ERR_CONFIG);
  CHECK(bp_config_set(cfg, "minibatch_size", "7") == BP_ERR_CONFIG);
  REQUIRE(bp_config_dump(cfg, &js) == BP_OK);
  CHECK(take(js) == dumped);
  CHECK(bp_config_profile("huge", &back) == BP_ERR_CONFIG);
  CHECK(bp_config_parse("{\"bogus\": 1}", &back) == BP_ERR_CONFIG);
  CHECK(bp_config_parse("{", &back) == BP_ERR_CONFIG);

  setenv("BACKPLAY_SEED", "77", 1);
  REQUIRE(bp_config_apply_env(cfg) == BP_OK);
  unsetenv("BACKPLAY_SEED");
  REQUIRE(bp_config_dump(cfg, &js) == BP_OK);
  CHECK(take(js).find("77") != std::string::npos);
  char* warnings = nullptr;
  CHECK(bp_config_validate(cfg, &warnings) == BP_OK);
  bp_string_free(warnings);
  bp_config_free(cfg);
}

TEST_CASE("maze and demo sets on disk") {
  const fs::path dir = fresh_dir("sets");
  bp_config* cfg = small_config(dir / "out");
  REQUIRE(bp_config_set(cfg, "gaps", "0,5") == BP_OK);
  REQUIRE(bp_generate_maze_set(cfg, (dir / "mazes").string().c_str()) == BP_OK);
  REQUIRE(bp_generate_demo_set(cfg, (dir / "mazes").string().c_str(), (dir / "demos").string().c_str()) == BP_OK);
  int mazes = 0, demos = 0;
  for (auto& e : fs::directory_iterator(dir / "mazes")) mazes += e.path().extension() == ".maze";
  for (auto& e : fs::directory_iterator(dir / "demos")) demos += e.path().extension() == ".demo";
  CHECK(mazes == 3);
  CHECK(demos == 6);
  CHECK(bp_generate_demo_set(cfg, (dir / "nothing").string().c_str(), (dir / "d2").string().c_str()) != BP_OK);
  bp_config_free(cfg);
  fs::remove_all(dir);
}

TEST_CASE("training, records and evaluation") {
  const fs::path dir = fresh_dir("train");
  bp_config* cfg = small_config(dir);
  int calls = 0;
  auto progress = [](const char*, int, double rate, void* user) {
    CHECK(rate >= 0.0);
    ++*static_cast<int*>(user);
  };
  bp_records* recs = nullptr;
  REQUIRE(bp_run_experiment(cfg, 0, progress, &calls, &recs) == BP_OK);
  CHECK(calls == 6);
  REQUIRE(bp_records_count(recs) == 2);
  bp_run_info info{};
  REQUIRE(bp_records_get(recs, 0, &info) == BP_OK);
  CHECK(std::string(info.regime) == "backplay");
  CHECK(info.gap == 0);
  CHECK(info.failed == 0);
  CHECK(info.epochs_recorded == 3);
  CHECK(std::string(bp_records_error(recs, 0)).empty());
  REQUIRE(bp_records_get(recs, 1, &info) == BP_OK);
  CHECK(info.gap == -1);
  CHECK(bp_records_get(recs, 2, &info) == BP_ERR_INVALID_ARGUMENT);

  char* csv = nullptr;
  REQUIRE(bp_records_metrics_csv(recs, 0, &csv) == BP_OK);
  CHECK(take(csv).rfind("epoch,regime,seed", 0) == 0);
  char* md = nullptr;
  REQUIRE(bp_records_summary(recs, 1, &md) == BP_OK);
  CHECK(take(md).find("| ") != std::string::npos);
  const std::string svg = (dir / "curve.svg").string();
  REQUIRE(bp_records_plot(recs, 1, svg.c_str()) == BP_OK);
  CHECK(fs::file_size(svg) > 0);
  bp_records_free(recs);

  REQUIRE(bp_records_load(dir.string().c_str(), &recs) == BP_OK);
  CHECK(bp_records_count(recs) == 2);
  bp_records_free(recs);

  bp_net* net = nullptr;
  REQUIRE(bp_net_load((dir / "standard_seed1" / "checkpoint.bin").string().c_str(), &net) == BP_OK);
  bp_eval_result ev{};
  char* rows = nullptr;
  REQUIRE(bp_evaluate(net, (dir / "mazes").string().c_str(), 100, &ev, &rows) == BP_OK);
  CHECK(ev.episodes == 3);
  CHECK(ev.success_rate >= 0.0);
  CHECK(ev.pct_within_5 >= ev.pct_optimal);
  CHECK(take(rows).rfind("maze_id,optimal_len,reached,length", 0) == 0);
  bp_net_free(net);
  CHECK(bp_net_load((dir / "missing.bin").string().c_str(), &net) != BP_OK);

  bp_records* one = nullptr;
  const std::string single = (dir / "single").string();
  REQUIRE(bp_train(cfg, "uniform", 0, 2, single.c_str(), 0, nullptr, nullptr, &one) == BP_OK);
  REQUIRE(bp_records_count(one) == 1);
  REQUIRE(bp_records_get(one, 0, &info) == BP_OK);
  CHECK(std::string(info.regime) == "uniform");
  CHECK(info.seed == 2);
  bp_records_free(one);
  CHECK(bp_train(cfg, "imitation", 0, 2, single.c_str(), 0, nullptr, nullptr, &one) == BP_ERR_CONFIG);
  bp_config_free(cfg);
  fs::remove_all(dir);
}

TEST_CASE("analysis") {
  bp_sweep_spec spec{"4..8:2", 0.5, 0.0, "standard,backplay:1", 20, 1, 1, 2};
  char* csv = nullptr;
  REQUIRE(bp_analyze_sweep(&spec, &csv) == BP_OK);
  const std::string text = take(csv);
  int lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == 1 + 3 * 2);
  spec.threads = 1;
  REQUIRE(bp_analyze_sweep(&spec, &csv) == BP_OK);
  CHECK(take(csv) == text);

  const fs::path dir = fresh_dir("analysis");
  const std::string svg = (dir / "sweep.svg").string();
  REQUIRE(bp_plot_sweep(text.c_str(), svg.c_str()) == BP_OK);
  CHECK(fs::exists(svg));

  spec.alpha = 1.5;
  CHECK(bp_analyze_sweep(&spec, &csv) == BP_ERR_INVALID_ARGUMENT);
  spec.alpha = 0.5;
  spec.strategies = "teleport";
  CHECK(bp_analyze_sweep(&spec, &csv) == BP_ERR_CONFIG);

  bp_maze* m = nullptr;
  REQUIRE(bp_maze_generate(5, 12, 12, 30, 10, &m) == BP_OK);
  char* js = nullptr;
  REQUIRE(bp_analyze_maze(m, "bfs", 50, 100, 1, &js) == BP_OK);
  const std::string j = take(js);
  for (const char* key : {"\"M\"", "\"alpha\"", "\"first_passage_linear\"", "\"spectral_gap\""})
    CHECK(j.find(key) != std::string::npos);
  CHECK(bp_analyze_maze(m, "psychic", 50, 100, 1, &js) == BP_ERR_INVALID_ARGUMENT);
  bp_maze_free(m);
  fs::remove_all(dir);
}
