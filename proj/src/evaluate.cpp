#include "evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

#include "error.hpp"

namespace backplay {

bool EvalReport::has_suboptimality() const { return !std::isnan(avg_suboptimality); }

EvalReport summarize_rows(std::vector<EvalRow> rows) {
  EvalReport r;
  r.rows = std::move(rows);
  const double n = static_cast<double>(r.rows.size());
  if (r.rows.empty()) {
    r.avg_suboptimality = r.std_suboptimality = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  int optimal = 0, within5 = 0, solved = 0;
  double sum = 0.0, sum2 = 0.0;
  for (const EvalRow& row : r.rows) {
    if (!row.reached) continue;
    ++solved;
    const int s = row.suboptimality();
    if (s == 0) ++optimal;
    if (s <= 5) ++within5;
    sum += s;
    sum2 += static_cast<double>(s) * s;
  }
  r.pct_optimal = 100.0 * optimal / n;
  r.pct_within_5 = 100.0 * within5 / n;
  r.success_rate = solved / n;
  if (solved == 0) {
    r.avg_suboptimality = r.std_suboptimality = std::numeric_limits<double>::quiet_NaN();
  } else {
    r.avg_suboptimality = sum / solved;
    r.std_suboptimality = std::sqrt(std::max(0.0, sum2 / solved - r.avg_suboptimality * r.avg_suboptimality));
  }
  return r;
}

EvalReport evaluate_policy(const PolicyValueNet& net, std::span<const Maze> mazes,
                           int episodes_per_maze, int max_steps) {
  if (episodes_per_maze < 1) fail(ErrorCode::kInvalidArgument, "episodes_per_maze must be >= 1");
  // Greedy rollouts are deterministic, so one rollout per maze is replicated.
  struct Episode {
    const Maze* maze;
    EnvState state;
    bool done = false;
    bool reached = false;
  };
  std::vector<Episode> eps;
  for (const Maze& m : mazes) eps.push_back({&m, reset_to(m, m.start())});
  if (eps.empty()) return summarize_rows({});

  const int obs_dim = net.architecture().input_dim;
  const int a_dim = net.architecture().num_actions;
  Eigen::MatrixXd input;
  ForwardCache cache;
  std::vector<std::size_t> live;
  while (true) {
    live.clear();
    for (std::size_t i = 0; i < eps.size(); ++i)
      if (!eps[i].done) live.push_back(i);
    if (live.empty()) break;
    input.resize(obs_dim, static_cast<Eigen::Index>(live.size()));
    for (std::size_t k = 0; k < live.size(); ++k)
      observe_into(*eps[live[k]].maze, eps[live[k]].state.agent, input.col(static_cast<Eigen::Index>(k)).data());
    net.forward(input, cache);
    for (std::size_t k = 0; k < live.size(); ++k) {
      Episode& e = eps[live[k]];
      Eigen::Index best;
      cache.logits.col(static_cast<Eigen::Index>(k)).head(a_dim).maxCoeff(&best);
      const StepResult r = step(*e.maze, e.state, action_from_int(static_cast<int>(best)), max_steps);
      e.state = r.state;
      e.done = r.done;
      e.reached = r.reached_goal;
    }
  }
  std::vector<EvalRow> rows;
  for (const Episode& e : eps)
    for (int k = 0; k < episodes_per_maze; ++k)
      rows.push_back({e.maze->id(), e.maze->shortest_path_length(), e.reached, e.state.steps_taken});
  return summarize_rows(std::move(rows));
}

EvalReport evaluate_action_policy(const ActionPolicy& policy, std::span<const Maze> mazes,
                                  int episodes_per_maze, int max_steps) {
  if (episodes_per_maze < 1) fail(ErrorCode::kInvalidArgument, "episodes_per_maze must be >= 1");
  std::vector<EvalRow> rows;
  for (const Maze& m : mazes) {
    for (int k = 0; k < episodes_per_maze; ++k) {
      Rng rng = make_rng(m.id(), {static_cast<std::uint64_t>(k)});
      EnvState s = reset_to(m, m.start());
      bool reached = false;
      while (true) {
        const StepResult r = step(m, s, policy(m, s, rng), max_steps);
        s = r.state;
        if (r.done) {
          reached = r.reached_goal;
          break;
        }
      }
      rows.push_back({m.id(), m.shortest_path_length(), reached, s.steps_taken});
    }
  }
  return summarize_rows(std::move(rows));
}

std::vector<double> action_probabilities(const PolicyValueNet& net, const Maze& maze, Cell agent) {
  Eigen::MatrixXd input(net.architecture().input_dim, 1);
  observe_into(maze, agent, input.data());
  ForwardCache cache;
  net.forward(input, cache);
  const int a_dim = net.architecture().num_actions;
  std::vector<double> p(static_cast<std::size_t>(a_dim));
  log_softmax(cache.logits.data(), a_dim, p.data());
  for (double& v : p) v = std::exp(v);
  return p;
}

Action greedy_action(const PolicyValueNet& net, const Maze& maze, Cell agent) {
  const auto p = action_probabilities(net, maze, agent);
  return action_from_int(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
}

ActionPolicy sampling_policy(const PolicyValueNet& net) {
  auto shared = std::make_shared<const PolicyValueNet>(net);
  return [shared](const Maze& maze, const EnvState& s, Rng& rng) {
    const auto p = action_probabilities(*shared, maze, s.agent);
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc += p[i];
      if (u < acc) return action_from_int(static_cast<int>(i));
    }
    return action_from_int(static_cast<int>(p.size()) - 1);
  };
}

ActionPolicy greedy_policy(const PolicyValueNet& net) {
  auto shared = std::make_shared<const PolicyValueNet>(net);
  return [shared](const Maze& maze, const EnvState& s, Rng&) { return greedy_action(*shared, maze, s.agent); };
}

std::string format_na(double value, int precision) {
  if (std::isnan(value)) return "N/A";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, value);
  return buf;
}

}  // namespace backplay
