#include <filesystem>
#include <sstream>

#include "config.hpp"
#include "doctest.h"
#include "harness.hpp"

using namespace backplay;
namespace fs = std::filesystem;

namespace {

struct FixtureResult {
  double backplay = 0.0;
  double standard = 0.0;
  std::string detail;
};

// Backplay and Standard on one fixture maze, same budget, three seeds.
FixtureResult train_fixture(const std::string& name) {
  const fs::path src = fs::path(FIXTURES_DIR);
  const fs::path tmp = fs::temp_directory_path() / ("backplay_fixture_" + name);
  fs::remove_all(tmp);
  fs::create_directories(tmp / "mazes");
  fs::create_directories(tmp / "demos");
  fs::copy_file(src / (name + ".maze"), tmp / "mazes" / (name + ".maze"));
  fs::copy_file(src / (name + ".demo"), tmp / "demos" / (name + ".demo"));

  ExperimentConfig c = desk_profile();
  c.mazes_dir = (tmp / "mazes").string();
  c.demos_dir = (tmp / "demos").string();
  c.demos.gaps = {load_demo_file((tmp / "demos" / (name + ".demo")).string()).gap_n};
  c.regimes = {Regime::kBackplay, Regime::kStandard};
  c.seeds = {1, 2, 3};
  c.epochs = 120;
  c.eval_every = 10;
  c.checkpoint_every = 120;
  c.schedule = WindowSchedule::paper_maze().scaled(20);
  c.output_dir = (tmp / "out").string();

  FixtureResult out;
  std::ostringstream detail;
  for (const RunRecord& r : run_experiment(c)) {
    REQUIRE_FALSE(r.failed);
    const double s = r.final_eval.success_rate / 3.0;
    (r.spec.regime == Regime::kBackplay ? out.backplay : out.standard) += s;
    detail << run_label(r.spec) << " success " << r.final_eval.success_rate << " first 50% at "
           << r.first_epoch_reaching(0.5) << "; ";
  }
  out.detail = detail.str();
  fs::remove_all(tmp);
  return out;
}

}  // namespace

TEST_CASE("fixture files load and replay") {
  for (const char* name : {"open_field", "bottleneck", "basin_detour"}) {
    const Maze m = load_maze_file(std::string(FIXTURES_DIR) + "/" + name + ".maze");
    const Demonstration d = load_demo_file(std::string(FIXTURES_DIR) + "/" + name + ".demo", &m);
    CHECK(m.width() == 12);
    CHECK(d.optimal_len == m.shortest_path_length());
  }
}

TEST_CASE("backplay beats standard on the open field") {
  const FixtureResult r = train_fixture("open_field");
  MESSAGE(r.detail);
  CHECK(r.backplay > r.standard);
}

TEST_CASE("backplay beats standard on the bottleneck maze") {
  const FixtureResult r = train_fixture("bottleneck");
  MESSAGE(r.detail);
  CHECK(r.backplay > r.standard);
}

TEST_CASE("basin detour is reported") {
  const FixtureResult r = train_fixture("basin_detour");
  MESSAGE("backplay mean success " << r.backplay << ", standard " << r.standard << ": " << r.detail);
}
