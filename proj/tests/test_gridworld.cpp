#include <cstdlib>
#include <set>

#include "doctest.h"
#include "error.hpp"
#include "gridworld.hpp"
#include "io.hpp"

using namespace backplay;

namespace {

Maze open_3x3() { return Maze::create(3, 3, {}, {0, 0}, {2, 2}); }

Maze seven() {
  Rng rng = make_rng(7);
  return generate_maze(rng, {24, 24, 120, 35});
}

std::string obs_text(const Observation& o, int w, int h) {
  std::string s = "OBS " + std::to_string(w) + " " + std::to_string(h) + "\n";
  for (int p = 0; p < 4; ++p) {
    for (int i = 0; i < w * h; ++i) s += o[p * w * h + i] != 0.0 ? '1' : '0';
    s += '\n';
  }
  return s;
}

std::vector<Action> random_actions(Rng& rng, int n) {
  std::vector<Action> a;
  for (int i = 0; i < n; ++i) a.push_back(action_from_int(static_cast<int>(uniform_index(rng, kNumActions))));
  return a;
}

}  // namespace

TEST_CASE("action encoding is stable") {
  CHECK(kNumActions == 5);
  CHECK(to_int(Action::kPass) == 0);
  CHECK(to_int(Action::kUp) == 1);
  CHECK(to_int(Action::kDown) == 2);
  CHECK(to_int(Action::kLeft) == 3);
  CHECK(to_int(Action::kRight) == 4);
  for (int i = 0; i < 5; ++i) CHECK(to_int(action_from_int(i)) == i);
  CHECK_THROWS_AS(action_from_int(5), Error);
  CHECK_THROWS_AS(action_from_int(-1), Error);
}

TEST_CASE("paper-scale generation") {
  const Maze m = seven();
  CHECK(m.width() == 24);
  CHECK(m.height() == 24);
  CHECK(m.walls().size() == 120);
  CHECK(m.shortest_path_length() >= 35);
  const auto d = bfs_distances(m, m.start());
  CHECK(d[m.index(m.goal())] == m.shortest_path_length());
  CHECK_FALSE(m.is_wall(m.start()));
  CHECK_FALSE(m.is_wall(m.goal()));
  CHECK(m.start() != m.goal());
}

TEST_CASE("wall-free 3x3 generation") {
  Rng rng = make_rng(0);
  const Maze m = generate_maze(rng, {3, 3, 0, 1});
  CHECK(m.walls().empty());
  CHECK(m.start() != m.goal());
}

TEST_CASE("generation is deterministic") {
  Rng a = make_rng(7), b = make_rng(7);
  const Maze x = generate_maze(a, {12, 12, 30, 10});
  const Maze y = generate_maze(b, {12, 12, 30, 10});
  CHECK(x.id() == y.id());
  CHECK(x == y);
}

TEST_CASE("generation rejects infeasible configs") {
  Rng rng = make_rng(1);
  CHECK_THROWS_AS(generate_maze(rng, {3, 3, 7, 1}), Error);
  CHECK_THROWS_AS(generate_maze(rng, {3, 3, 0, 0}), Error);
  try {
    generate_maze(rng, {3, 3, 0, 50});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfigInfeasible);
  }
}

TEST_CASE("generated mazes satisfy invariants across seeds") {
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng = make_rng(s);
    const Maze m = generate_maze(rng, {12, 12, 30, 10});
    REQUIRE(m.walls().size() == 30);
    REQUIRE(m.shortest_path_length() >= 10);
    std::set<Cell> w(m.walls().begin(), m.walls().end());
    REQUIRE(w.size() == 30);
    REQUIRE_FALSE(w.contains(m.start()));
    REQUIRE_FALSE(w.contains(m.goal()));
    for (Cell c : m.walls()) REQUIRE(m.in_bounds(c));
  }
}

TEST_CASE("maze id depends only on content") {
  const Maze a = Maze::create(4, 3, {{1, 1}, {0, 2}}, {0, 0}, {2, 3});
  const Maze b = Maze::create(4, 3, {{0, 2}, {1, 1}}, {0, 0}, {2, 3});
  const Maze c = Maze::create(4, 3, {{1, 1}}, {0, 0}, {2, 3});
  const Maze d = Maze::create(4, 3, {{1, 1}, {0, 2}}, {0, 1}, {2, 3});
  CHECK(a.id() == b.id());
  CHECK(a.id() != c.id());
  CHECK(a.id() != d.id());
}

TEST_CASE("maze creation validates") {
  CHECK_THROWS_AS(Maze::create(3, 3, {}, {0, 0}, {0, 0}), Error);
  CHECK_THROWS_AS(Maze::create(3, 3, {{0, 0}}, {0, 0}, {2, 2}), Error);
  CHECK_THROWS_AS(Maze::create(3, 3, {}, {0, 0}, {3, 0}), Error);
  // goal sealed off
  CHECK_THROWS_AS(Maze::create(3, 3, {{1, 2}, {2, 1}}, {0, 0}, {2, 2}), Error);
}

TEST_CASE("step into the goal") {
  const Maze m = Maze::create(3, 3, {}, {0, 0}, {1, 1});
  const StepResult r = step(m, reset_to(m, {2, 1}), Action::kUp, 100);
  CHECK(r.reached_goal);
  CHECK(r.done);
  CHECK(r.reward == doctest::Approx(0.97).epsilon(1e-12));
  CHECK(r.state.agent == Cell{1, 1});
}

TEST_CASE("blocked moves keep the agent in place") {
  const Maze m = Maze::create(3, 3, {{1, 1}}, {0, 0}, {2, 2});
  const EnvState s = reset_to(m, {0, 1});
  const StepResult r = step(m, s, Action::kDown, 100);
  CHECK(r.state.agent == Cell{0, 1});
  CHECK(r.reward == doctest::Approx(-0.03));
  CHECK_FALSE(r.done);
  CHECK(r.state.steps_taken == 1);
  const StepResult edge = step(m, s, Action::kUp, 100);
  CHECK(edge.state.agent == Cell{0, 1});
}

TEST_CASE("horizon cutoff") {
  const Maze m = open_3x3();
  EnvState s{{0, 1}, 199};
  const StepResult r = step(m, s, Action::kPass, 200);
  CHECK(r.done);
  CHECK_FALSE(r.reached_goal);
  CHECK(r.reward == doctest::Approx(-0.03));
}

TEST_CASE("step rejects corrupted states") {
  const Maze m = Maze::create(3, 3, {{1, 1}}, {0, 0}, {2, 2});
  try {
    step(m, EnvState{{1, 1}, 0}, Action::kPass, 10);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidState);
  }
}

TEST_CASE("reset_to") {
  const Maze m = Maze::create(3, 3, {{1, 1}}, {0, 0}, {2, 2});
  const EnvState s = reset_to(m, m.start());
  CHECK(s.agent == m.start());
  CHECK(s.steps_taken == 0);
  const EnvState g = reset_to(m, m.goal());
  const StepResult r = step(m, g, Action::kPass, 10);
  CHECK(r.reached_goal);
  CHECK(r.done);
  try {
    reset_to(m, {1, 1});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidCell);
  }
  CHECK_THROWS_AS(reset_to(m, {-1, 0}), Error);
  CHECK_THROWS_AS(reset_to(m, {0, 3}), Error);
}

TEST_CASE("observation planes on an empty 3x3") {
  const Maze m = open_3x3();
  const Observation o = observe(m, reset_to(m, {0, 0}));
  REQUIRE(o.size() == 36);
  CHECK(o[0] == 1.0);
  for (int i = 1; i < 9; ++i) CHECK(o[i] == 0.0);
  CHECK(o[9 + 8] == 1.0);
  for (int i = 27; i < 36; ++i) CHECK(o[i] == 0.0);
}

TEST_CASE("observation invariants hold along random walks") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = make_rng(seed);
    const Maze m = generate_maze(rng, {12, 12, 30, 10});
    const int n = m.num_cells();
    EnvState s = reset_to(m, m.start());
    for (Action a : random_actions(rng, 60)) {
      const Observation o = observe(m, s);
      int agents = 0;
      for (int i = 0; i < 4 * n; ++i) REQUIRE((o[i] == 0.0 || o[i] == 1.0));
      for (int i = 0; i < n; ++i) {
        agents += o[i] == 1.0;
        REQUIRE(o[2 * n + i] + o[3 * n + i] == 1.0);
      }
      REQUIRE(agents == 1);
      const StepResult r = step(m, s, a, 100);
      if (r.done) break;
      s = r.state;
    }
  }
}

TEST_CASE("seed-7 observation matches the golden file") {
  const Maze m = seven();
  const std::string text = obs_text(observe(m, reset_to(m, m.start())), m.width(), m.height());
  const std::string path = std::string(TEST_DATA_DIR) + "/golden_obs_seed7.txt";
  if (std::getenv("BACKPLAY_UPDATE_GOLDEN")) write_file(path, text);
  CHECK(read_file(path) == text);
}

TEST_CASE("step is deterministic") {
  Rng rng = make_rng(3);
  const Maze m = generate_maze(rng, {12, 12, 30, 10});
  for (Cell c : m.open_cells())
    for (Action a : kAllActions) {
      const StepResult x = step(m, reset_to(m, c), a, 100);
      const StepResult y = step(m, reset_to(m, c), a, 100);
      CHECK(x.state == y.state);
      CHECK(x.reward == y.reward);
      CHECK(x.done == y.done);
    }
}

TEST_CASE("optimal return equals 1 - 0.03 d*") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng = make_rng(seed);
    const Maze m = generate_maze(rng, {12, 12, 30, 10});
    const ActionPolicy pol = bfs_policy();
    EnvState s = reset_to(m, m.start());
    double ret = 0.0;
    int steps = 0;
    for (;;) {
      const StepResult r = step(m, s, pol(m, s, rng), 1000);
      ret += r.reward;
      ++steps;
      s = r.state;
      if (r.done) {
        CHECK(r.reached_goal);
        break;
      }
    }
    CHECK(steps == m.shortest_path_length());
    CHECK(ret == doctest::Approx(1.0 - 0.03 * m.shortest_path_length()).epsilon(1e-12));
  }
}

TEST_CASE("replay from a restored state reproduces the trajectory") {
  Rng rng = make_rng(11);
  const Maze m = generate_maze(rng, {12, 12, 30, 10});
  for (Cell c : m.open_cells()) {
    if (m.distance_to_goal(c) < 0) continue;
    const auto actions = random_actions(rng, 30);
    std::vector<EnvState> first;
    EnvState s = reset_to(m, c);
    for (Action a : actions) {
      const StepResult r = step(m, s, a, 100);
      first.push_back(r.state);
      if (r.done) break;
      s = r.state;
    }
    s = reset_to(m, c);
    for (std::size_t i = 0; i < first.size(); ++i) {
      const StepResult r = step(m, s, actions[i], 100);
      REQUIRE(r.state == first[i]);
      s = r.state;
    }
  }
}

TEST_CASE("episode length never exceeds max_steps") {
  const Maze m = Maze::create(5, 5, {}, {0, 0}, {4, 4});
  Rng rng = make_rng(2);
  for (int ep = 0; ep < 50; ++ep) {
    EnvState s = reset_to(m, m.start());
    for (Action a : random_actions(rng, 200)) {
      const StepResult r = step(m, s, a, 17);
      REQUIRE(r.state.steps_taken <= 17);
      if (r.done) {
        CHECK((r.reached_goal || r.state.steps_taken == 17));
        break;
      }
      s = r.state;
    }
  }
}

TEST_CASE("maze text round trip") {
  const Maze m = seven();
  const std::string text = format_maze(m);
  CHECK(text.rfind("MAZE v1 24 24\n", 0) == 0);
  CHECK(text.back() == '\n');
  const Maze back = parse_maze(text);
  CHECK(back == m);
  CHECK(back.id() == m.id());
  CHECK(format_maze(back) == text);
}

TEST_CASE("maze parser rejects malformed input") {
  CHECK_THROWS_AS(parse_maze("MAZE v2 3 3\nS..\n...\n..G\n"), Error);
  CHECK_THROWS_AS(parse_maze("MAZE v1 3 3\nS..\n...\n"), Error);
  CHECK_THROWS_AS(parse_maze("MAZE v1 3 3\nS..\n.x.\n..G\n"), Error);
  CHECK_THROWS_AS(parse_maze("MAZE v1 3 3\nS..\n...\n...\n"), Error);
  CHECK_THROWS_AS(parse_maze("MAZE v1 3 3\nS.S\n...\n..G\n"), Error);
  CHECK_THROWS_AS(parse_maze("MAZE v1 3 3\nS..\n...\n..G"), Error);
  CHECK_NOTHROW(parse_maze("MAZE v1 3 3\nS..\n...\n..G\n"));
}
