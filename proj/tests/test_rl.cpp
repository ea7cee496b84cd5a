#include <cmath>
#include <filesystem>
#include <map>
#include <memory>

#include "bc.hpp"
#include "doctest.h"
#include "error.hpp"
#include "evaluate.hpp"
#include "oracles.hpp"
#include "ppo.hpp"

using namespace backplay;
using namespace backplay::oracles;

namespace {

Maze random_maze(std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return generate_maze(rng, {12, 12, 30, 10});
}

std::vector<Maze> maze_set(int n, std::uint64_t base) {
  std::vector<Maze> out;
  for (int i = 0; i < n; ++i) out.push_back(random_maze(base + static_cast<std::uint64_t>(i)));
  return out;
}

Architecture maze_arch(int hidden = 32) { return {observation_size(12, 12), hidden, hidden, kNumActions, 4}; }

struct Trainer {
  std::vector<Maze> mazes;
  std::vector<StartStateSampler> samplers;
  std::vector<TrainingTask> tasks;

  explicit Trainer(int n) : mazes(maze_set(n, 500)) {
    samplers.reserve(mazes.size());
    for (const Maze& m : mazes) {
      Rng rng = make_rng(m.id());
      samplers.push_back(UniformSampler{noisy_astar_demo(m, 0, 1.0, rng, 10)});
    }
    for (std::size_t i = 0; i < mazes.size(); ++i) tasks.push_back({&mazes[i], &samplers[i]});
  }

  // Bit pattern of the parameters after `epochs` collect/update cycles.
  ParamVector run(int epochs, std::uint64_t seed, std::vector<std::unique_ptr<char[]>>* junk = nullptr) {
    Rng init = make_rng(seed, {1});
    PolicyValueNet net = PolicyValueNet::initialized(maze_arch(), init);
    PPOConfig cfg;
    cfg.workers = 4;
    cfg.batch_size = 256;
    cfg.minibatch_size = 64;
    Adam opt(net.params().size(), cfg.learning_rate);
    for (int e = 0; e < epochs; ++e) {
      if (junk)
        for (int k = 0; k < 7; ++k) junk->emplace_back(new char[static_cast<std::size_t>(13 + 97 * k + e)]);
      RolloutBatch b = collect_rollouts(tasks, net, cfg, 100, e, seed);
      compute_gae(b, cfg.gamma, cfg.gae_tau);
      ppo_update(net, opt, b, cfg, e, seed);
    }
    return net.params();
  }
};

}  // namespace

TEST_CASE("ppo config validation") {
  PPOConfig c;
  CHECK_NOTHROW(validate(c));
  c.clip = 0.0;
  CHECK_THROWS_AS(validate(c), Error);
  c = PPOConfig{};
  c.gamma = 1.1;
  CHECK_THROWS_AS(validate(c), Error);
  c = PPOConfig{};
  c.gae_tau = -0.1;
  CHECK_THROWS_AS(validate(c), Error);
  c = PPOConfig{};
  c.minibatch_size = 300;
  CHECK_THROWS_AS(validate(c), Error);
  c = PPOConfig{};
  c.horizon = 100;
  CHECK_THROWS_AS(validate(c), Error);
  c.horizon = 128;
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("toy net has 16 parameters") {
  const Architecture a{1, 1, 1, 5, 0};
  CHECK(a.param_count() == 16);
  CHECK(PolicyValueNet(a).params().size() == 16);
  CHECK(Architecture{10, 4, 3, 5, 0}.param_count() == 10 * 4 + 4 + 4 * 3 + 3 + 3 * 5 + 5 + 3 + 1);
  CHECK(Architecture{10, 4, 3, 5, 0}.hash() != Architecture{10, 4, 3, 5, 2}.hash());
  CHECK_THROWS_AS(PolicyValueNet(Architecture{10, 4, 3, 5, 3}), Error);
}

TEST_CASE("gae matches the brute-force sum") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng rng = make_rng(s);
    RolloutBatch b = random_batch(rng, 50);
    const double gamma = 0.9 + 0.1 * uniform01(rng), tau = uniform01(rng);
    compute_gae(b, gamma, tau);
    const auto oracle = brute_force_gae(b, gamma, tau);
    for (std::size_t i = 0; i < b.size(); ++i) {
      REQUIRE(std::abs(b.advantages[i] - oracle[i]) < 1e-10);
      REQUIRE(b.returns[i] == doctest::Approx(b.advantages[i] + b.values[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("gae with tau 1 is discounted return minus baseline") {
  Rng rng = make_rng(5);
  RolloutBatch b = random_batch(rng, 40);
  compute_gae(b, 0.97, 1.0);
  for (std::size_t t = 0; t < b.size(); ++t) {
    double ret = 0.0, disc = 1.0;
    std::size_t l = t;
    for (;; ++l) {
      ret += disc * b.rewards[l];
      if (b.dones[l] || b.segment_ends[l]) break;
      disc *= 0.97;
    }
    if (!b.dones[l]) ret += disc * 0.97 * b.next_values[l];
    CHECK(b.advantages[t] == doctest::Approx(ret - b.values[t]).epsilon(1e-10));
  }
}

TEST_CASE("single-step episode advantage") {
  RolloutBatch b;
  b.rewards = {0.97};
  b.values = {0.4};
  b.next_values = {0.0};
  b.dones = {1};
  b.segment_ends = {1};
  b.actions = {1};
  compute_gae(b, 0.99, 0.95);
  CHECK(b.advantages[0] == doctest::Approx(0.57));
}

TEST_CASE("analytic gradient matches finite differences on the toy net") {
  Rng rng = make_rng(3);
  PolicyValueNet net = PolicyValueNet::initialized({1, 1, 1, 5, 0}, rng);
  // keep both hidden units active so the check is not trivially zero
  for (double& p : net.params()) p = 0.5 + 0.5 * uniform01(rng);
  PPOConfig cfg;
  Minibatch mb = random_minibatch(net, rng, 16, false);
  mb.observations = mb.observations.cwiseAbs();
  CHECK(max_rel_grad_error(net, mb, cfg) < 1e-4);
}

TEST_CASE("analytic gradient matches finite differences on a plane-normalized net") {
  Rng rng = make_rng(4);
  PolicyValueNet net = PolicyValueNet::initialized({16, 8, 6, 5, 4}, rng);
  for (double& p : net.params()) p += 0.05 * (uniform01(rng) - 0.5);
  PPOConfig cfg;
  const Minibatch mb = random_minibatch(net, rng, 24, false);
  CHECK(max_rel_grad_error(net, mb, cfg) < 1e-4);
}

TEST_CASE("clipped and unclipped objectives coincide on-policy") {
  Rng rng = make_rng(6);
  const PolicyValueNet net = PolicyValueNet::initialized({16, 8, 8, 5, 4}, rng);
  const Minibatch mb = random_minibatch(net, rng, 32, true);
  PPOConfig a, b;
  b.clip = 1e6;
  const LossTerms la = ppo_loss(net, mb, a, {}), lb = ppo_loss(net, mb, b, {});
  CHECK(la.clip_fraction == 0.0);
  CHECK(la.total == doctest::Approx(lb.total).epsilon(1e-14));
  CHECK(la.policy_loss == doctest::Approx(lb.policy_loss).epsilon(1e-14));
}

TEST_CASE("zero advantages and exact targets leave only the entropy gradient") {
  Rng rng = make_rng(7);
  const PolicyValueNet net = PolicyValueNet::initialized({16, 8, 8, 5, 4}, rng);
  Minibatch mb = random_minibatch(net, rng, 32, true);
  ForwardCache cache;
  net.forward(mb.observations, cache);
  for (std::size_t i = 0; i < mb.returns.size(); ++i) {
    mb.advantages[i] = 0.0;
    mb.returns[i] = cache.values(static_cast<Eigen::Index>(i));
  }
  PPOConfig cfg;
  ParamVector g(net.params().size()), g0(net.params().size());
  ppo_loss(net, mb, cfg, g);
  cfg.entropy_coef = 0.0;
  ppo_loss(net, mb, cfg, g0);
  double n = 0, n0 = 0;
  for (std::size_t i = 0; i < g.size(); ++i) n += g[i] * g[i], n0 += g0[i] * g0[i];
  CHECK(std::sqrt(n0) < 1e-12);
  CHECK(std::sqrt(n) > 1e-8);
}

TEST_CASE("ppo update is a no-op without signal") {
  Trainer tr(3);
  Rng rng = make_rng(8);
  PolicyValueNet net = PolicyValueNet::initialized(maze_arch(), rng);
  PPOConfig cfg;
  cfg.workers = 4;
  cfg.batch_size = 128;
  cfg.minibatch_size = 32;
  cfg.entropy_coef = 0.0;
  RolloutBatch b = collect_rollouts(tr.tasks, net, cfg, 100, 0, 1);
  b.advantages.assign(b.size(), 0.0);
  b.returns = b.values;
  const ParamVector before = net.params();
  Adam opt(net.params().size());
  const UpdateStats st = ppo_update(net, opt, b, cfg, 0, 1);
  CHECK(st.grad_norm < 1e-12);
  CHECK(net.params() == before);
}

TEST_CASE("non-finite loss aborts the update") {
  Trainer tr(2);
  Rng rng = make_rng(9);
  PolicyValueNet net = PolicyValueNet::initialized(maze_arch(), rng);
  PPOConfig cfg;
  cfg.workers = 2;
  cfg.batch_size = 64;
  cfg.minibatch_size = 32;
  RolloutBatch b = collect_rollouts(tr.tasks, net, cfg, 100, 0, 1);
  compute_gae(b, cfg.gamma, cfg.gae_tau);
  b.returns[3] = std::numeric_limits<double>::quiet_NaN();
  Adam opt(net.params().size());
  try {
    ppo_update(net, opt, b, cfg, 0, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFiniteLoss);
  }
}

TEST_CASE("softmax probabilities sum to one") {
  Rng rng = make_rng(10);
  const PolicyValueNet net = PolicyValueNet::initialized(maze_arch(), rng);
  const Maze m = random_maze(10);
  for (Cell c : m.open_cells()) {
    const auto p = action_probabilities(net, m, c);
    double s = 0;
    for (double x : p) {
      CHECK(x >= 0.0);
      s += x;
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  double big[5] = {1000.0, -1000.0, 0.0, 999.0, 3.0}, out[5];
  log_softmax(big, 5, out);
  double s = 0;
  for (double x : out) {
    CHECK(std::isfinite(x));
    s += std::exp(x);
  }
  CHECK(std::abs(s - 1.0) < 1e-12);
}

TEST_CASE("forward pass is deterministic and finite") {
  Rng rng = make_rng(11);
  const PolicyValueNet net = PolicyValueNet::initialized(maze_arch(), rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(maze_arch().input_dim, 9);
  ForwardCache a, b;
  net.forward(x, a);
  net.forward(x, b);
  CHECK(a.logits == b.logits);
  CHECK(a.values == b.values);
  CHECK(a.logits.allFinite());
}

TEST_CASE("standard rollouts start at the maze start") {
  Trainer tr(4);
  std::vector<StartStateSampler> standard(tr.mazes.size(), StandardSampler{});
  std::vector<StartStateSampler> terminal;
  for (const auto& s : tr.samplers)
    terminal.push_back(BackplaySampler{WindowSchedule({{0, Window::initial_state_only()}}),
                                       std::get<UniformSampler>(s).demo});
  Rng rng = make_rng(12);
  const PolicyValueNet net = PolicyValueNet::initialized(maze_arch(), rng);
  PPOConfig cfg;
  cfg.workers = 4;
  cfg.batch_size = 512;
  cfg.minibatch_size = 64;
  for (const auto* samplers : {&standard, &terminal}) {
    std::vector<TrainingTask> tasks;
    for (std::size_t i = 0; i < tr.mazes.size(); ++i) tasks.push_back({&tr.mazes[i], &(*samplers)[i]});
    const RolloutBatch b = collect_rollouts(tasks, net, cfg, 30, 0, 3);
    int starts = 0;
    for (std::size_t i = 0; i < b.size(); ++i)
      if (b.episode_starts[i]) {
        ++starts;
        CHECK(b.cells[i] == tr.mazes[static_cast<std::size_t>(b.maze_indices[i])].start());
      }
    CHECK(starts >= 512 / 30);
  }
}

TEST_CASE("rollout batch is consistent with the environment") {
  Trainer tr(5);
  Rng rng = make_rng(13);
  const PolicyValueNet net = PolicyValueNet::initialized(maze_arch(), rng);
  PPOConfig cfg;
  cfg.workers = 8;
  cfg.batch_size = 1024;
  cfg.minibatch_size = 256;
  const int max_steps = 100;
  const RolloutBatch b = collect_rollouts(tr.tasks, net, cfg, max_steps, 2, 5);
  REQUIRE(b.size() == 1024u);
  REQUIRE(b.observations.cols() == 1024);
  REQUIRE(b.log_probs.size() == 1024u);
  REQUIRE(b.rewards.size() == 1024u);
  REQUIRE(b.values.size() == 1024u);
  REQUIRE(b.dones.size() == 1024u);

  int segments = 0, steps = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const Maze& m = tr.mazes[static_cast<std::size_t>(b.maze_indices[i])];
    if (b.episode_starts[i]) steps = 0;
    if (i == 0 || b.episode_starts[i] || b.segment_ends[i - 1]) ++segments;
    const StepResult r = step(m, EnvState{b.cells[i], steps}, action_from_int(b.actions[i]), max_steps);
    ++steps;
    REQUIRE(static_cast<bool>(b.dones[i]) == r.done);
    REQUIRE(b.rewards[i] == r.reward);
    const Observation o = observe(m, EnvState{b.cells[i], 0});
    for (int k = 0; k < b.obs_dim; ++k) REQUIRE(b.observations(k, static_cast<Eigen::Index>(i)) == o[static_cast<std::size_t>(k)]);
    if (!b.dones[i] && !b.segment_ends[i]) {
      REQUIRE(b.cells[i + 1] == r.state.agent);
      REQUIRE(b.worker_ids[i + 1] == b.worker_ids[i]);
    }
    if (b.dones[i] && i + 1 < b.size() && b.worker_ids[i + 1] == b.worker_ids[i]) REQUIRE(b.episode_starts[i + 1]);
  }
  CHECK(segments >= (1024 + max_steps - 1) / max_steps);
  int ends = 0;
  for (auto e : b.segment_ends) ends += e;
  CHECK(ends == cfg.workers);
}

TEST_CASE("rollouts are reproducible") {
  Trainer tr(3);
  Rng rng = make_rng(14);
  const PolicyValueNet net = PolicyValueNet::initialized(maze_arch(), rng);
  PPOConfig cfg;
  cfg.workers = 4;
  cfg.batch_size = 256;
  cfg.minibatch_size = 64;
  const RolloutBatch a = collect_rollouts(tr.tasks, net, cfg, 100, 3, 9);
  const RolloutBatch b = collect_rollouts(tr.tasks, net, cfg, 100, 3, 9);
  const RolloutBatch c = collect_rollouts(tr.tasks, net, cfg, 100, 4, 9);
  CHECK(a.actions == b.actions);
  CHECK(a.cells == b.cells);
  CHECK(a.log_probs == b.log_probs);
  CHECK(a.actions != c.actions);
}

TEST_CASE("training is bitwise reproducible under heap perturbation") {
  Trainer tr(3);
  const ParamVector a = tr.run(4, 21);
  std::vector<std::unique_ptr<char[]>> junk;
  junk.emplace_back(new char[24]);
  const ParamVector b = tr.run(4, 21, &junk);
  CHECK(a == b);
  CHECK(tr.run(4, 22) != a);
}

TEST_CASE("checkpoint round trip") {
  Rng rng = make_rng(15);
  const PolicyValueNet net = PolicyValueNet::initialized(maze_arch(), rng);
  const std::string bytes = serialize_checkpoint(net);
  CHECK(bytes.substr(0, 4) == "BPCK");
  const PolicyValueNet back = deserialize_checkpoint(bytes);
  CHECK(back.architecture() == net.architecture());
  CHECK(back.params() == net.params());
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 8)), Error);
  std::string bad = bytes;
  bad[9] ^= 1;  // arch hash
  CHECK_THROWS_AS(deserialize_checkpoint(bad), Error);
  const auto path = std::filesystem::temp_directory_path() / "backplay_ckpt_test.bin";
  save_checkpoint(net, path.string());
  CHECK(load_checkpoint(path.string()).params() == net.params());
  std::filesystem::remove(path);
}

TEST_CASE("oracle policy evaluation") {
  const auto mazes = maze_set(20, 700);
  const EvalReport r = evaluate_action_policy(bfs_policy(), mazes, 1, 100);
  CHECK(r.pct_optimal == 100.0);
  CHECK(r.pct_within_5 == 100.0);
  CHECK(r.avg_suboptimality == 0.0);
  CHECK(r.std_suboptimality == 0.0);
  CHECK(r.success_rate == 1.0);
  CHECK(r.rows.size() == 20u);
}

TEST_CASE("random policy rarely succeeds") {
  const auto mazes = maze_set(50, 800);
  const EvalReport r = evaluate_action_policy(uniform_random_policy(), mazes, 1, 100);
  CHECK(r.success_rate < 0.2);
  CHECK(r.pct_within_5 >= r.pct_optimal);
}

TEST_CASE("report aggregation") {
  std::vector<EvalRow> rows = {{1, 10, true, 10}, {2, 12, true, 15}, {3, 8, true, 20}, {4, 9, false, 100}};
  const EvalReport r = summarize_rows(rows);
  CHECK(r.pct_optimal == doctest::Approx(25.0));
  CHECK(r.pct_within_5 == doctest::Approx(50.0));
  CHECK(r.success_rate == doctest::Approx(0.75));
  CHECK(r.avg_suboptimality == doctest::Approx(5.0));
  CHECK(r.std_suboptimality == doctest::Approx(std::sqrt((25.0 + 4.0 + 49.0) / 3.0)));
  const EvalReport none = summarize_rows({{1, 10, false, 100}});
  CHECK(std::isnan(none.avg_suboptimality));
  CHECK_FALSE(none.has_suboptimality());
  CHECK(format_na(none.avg_suboptimality) == "N/A");
  CHECK(none.pct_optimal == 0.0);
}

TEST_CASE("greedy evaluation is deterministic") {
  const auto mazes = maze_set(10, 900);
  Rng rng = make_rng(16);
  const PolicyValueNet net = PolicyValueNet::initialized(maze_arch(), rng);
  const EvalReport a = evaluate_policy(net, mazes, 1, 100), b = evaluate_policy(net, mazes, 1, 100);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].length == b.rows[i].length);
    CHECK(a.rows[i].reached == b.rows[i].reached);
  }
}

TEST_CASE("behavior cloning replays a single demonstration") {
  const Maze m = random_maze(31);
  const Demonstration d = shortest_path(m);
  Rng rng = make_rng(32);
  PolicyValueNet net = PolicyValueNet::initialized(maze_arch(64), rng);
  std::vector<Maze> mazes = {m};
  std::vector<Demonstration> demos = {d};
  const BcReport rep = behavior_clone(mazes, demos, net, 400, 1e-3);
  CHECK(rep.accuracy >= 0.99);
  CHECK(rep.samples == d.length());
  EnvState s = reset_to(m, d.states.front());
  for (std::size_t i = 0; i < d.actions.size(); ++i) {
    const StepResult r = step(m, s, greedy_action(net, m, s.agent), 1000);
    REQUIRE(r.state.agent == d.states[i + 1]);
    s = r.state;
  }
}

TEST_CASE("behavior cloning fits noisy demonstrations as well as they allow") {
  // a noisy demo can revisit a cell with a different action; the best any
  // policy can do is the majority action per cell
  std::vector<Maze> mazes;
  std::vector<Demonstration> demos;
  for (std::uint64_t k = 0; k < 3; ++k) {
    mazes.push_back(random_maze(40 + k));
    Rng drng = make_rng(40 + k);
    demos.push_back(noisy_astar_demo(mazes.back(), 5, 0.85, drng, 100000));
  }
  int total = 0, best = 0;
  for (const Demonstration& d : demos) {
    std::map<std::pair<int, int>, std::array<int, kNumActions>> counts;
    for (std::size_t i = 0; i < d.actions.size(); ++i)
      ++counts[{d.states[i].row, d.states[i].col}][static_cast<std::size_t>(to_int(d.actions[i]))];
    for (const auto& [cell, c] : counts) best += *std::max_element(c.begin(), c.end());
    total += d.length();
  }
  Rng rng = make_rng(41);
  PolicyValueNet net = PolicyValueNet::initialized(maze_arch(64), rng);
  const BcReport rep = behavior_clone(mazes, demos, net, 600, 1e-3);
  CHECK(rep.samples == total);
  CHECK(rep.accuracy >= static_cast<double>(best) / total - 1e-9);
}

TEST_CASE("behavior cloning needs demonstrations") {
  Rng rng = make_rng(33);
  PolicyValueNet net = PolicyValueNet::initialized(maze_arch(), rng);
  CHECK_THROWS_AS(behavior_clone({}, {}, net, 10, 1e-3), Error);
}

TEST_CASE("behavior cloning leaves the value head alone") {
  const Maze m = random_maze(34);
  Rng rng = make_rng(34);
  PolicyValueNet net = PolicyValueNet::initialized(maze_arch(16), rng);
  const ParamVector before = net.params();
  std::vector<Maze> mazes = {m};
  std::vector<Demonstration> demos = {shortest_path(m)};
  behavior_clone(mazes, demos, net, 5, 1e-3);
  const Architecture a = net.architecture();
  const std::size_t value_params = static_cast<std::size_t>(a.hidden2 + 1);
  const std::size_t n = before.size();
  for (std::size_t i = n - value_params; i < n; ++i) CHECK(net.params()[i] == before[i]);
  CHECK(net.params() != before);
}
