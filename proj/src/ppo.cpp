#include "ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "error.hpp"

namespace backplay {

void validate(const PPOConfig& c) {
  if (!(c.clip > 0.0)) fail(ErrorCode::kConfig, "ppo.clip must be > 0");
  if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) fail(ErrorCode::kConfig, "ppo.gamma must be in [0, 1]");
  if (!(c.gae_tau >= 0.0 && c.gae_tau <= 1.0)) fail(ErrorCode::kConfig, "ppo.gae_tau must be in [0, 1]");
  if (!(c.learning_rate > 0.0)) fail(ErrorCode::kConfig, "ppo.learning_rate must be > 0");
  if (c.ppo_epochs < 1 || c.workers < 1 || c.batch_size < 1 || c.minibatch_size < 1 || c.hidden < 1)
    fail(ErrorCode::kConfig, "ppo counts must be positive");
  if (c.batch_size % c.minibatch_size != 0)
    fail(ErrorCode::kConfig, "ppo.minibatch_size must divide ppo.batch_size");
  if (c.workers > c.batch_size) fail(ErrorCode::kConfig, "ppo.workers must not exceed ppo.batch_size");
  if (c.horizon < 0) fail(ErrorCode::kConfig, "ppo.horizon must be >= 0");
  if (c.horizon > 0 && static_cast<long>(c.horizon) * c.workers != c.batch_size)
    fail(ErrorCode::kConfig, "ppo.horizon * ppo.workers must equal ppo.batch_size");
}

namespace {

struct WorkerBuffer {
  std::vector<double> obs;
  std::vector<int> actions;
  std::vector<double> log_probs, rewards, values;
  std::vector<std::uint8_t> dones, starts;
  std::vector<Cell> cells;
  std::vector<int> mazes;
};

struct Worker {
  Rng rng;
  int task = 0;
  EnvState state;
  bool fresh = true;
  int quota = 0;
  WorkerBuffer buf;
};

int sample_categorical(const double* log_probs, int n, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += std::exp(log_probs[i]);
    if (u < acc) return i;
  }
  return n - 1;
}

}  // namespace

RolloutBatch collect_rollouts(std::span<const TrainingTask> tasks, const PolicyValueNet& net,
                              const PPOConfig& cfg, int max_steps, int epoch, std::uint64_t seed,
                              std::vector<std::optional<WorkerCarry>>* carry) {
  validate(cfg);
  if (tasks.empty()) fail(ErrorCode::kInvalidArgument, "no training tasks");
  const Maze& first = *tasks.front().maze;
  const int obs_dim = observation_size(first.width(), first.height());
  for (const auto& t : tasks)
    if (observation_size(t.maze->width(), t.maze->height()) != obs_dim)
      fail(ErrorCode::kInvalidArgument, "all training mazes must share dimensions");
  if (net.architecture().input_dim != obs_dim)
    fail(ErrorCode::kInvalidArgument, "network input does not match maze observation size");
  const int num_actions = net.architecture().num_actions;

  RolloutBatch batch;
  batch.obs_dim = obs_dim;
  double start_distance_sum = 0.0;

  std::vector<Worker> workers(static_cast<std::size_t>(cfg.workers));
  for (int w = 0; w < cfg.workers; ++w) {
    Worker& wk = workers[static_cast<std::size_t>(w)];
    wk.rng = make_rng(seed, {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(w)});
    wk.quota = cfg.batch_size / cfg.workers + (w < cfg.batch_size % cfg.workers ? 1 : 0);
  }

  auto begin_episode = [&](Worker& wk) {
    wk.task = static_cast<int>(uniform_index(wk.rng, tasks.size()));
    const TrainingTask& t = tasks[static_cast<std::size_t>(wk.task)];
    const Cell start = sample_start(*t.sampler, *t.maze, epoch, wk.rng);
    wk.state = reset_to(*t.maze, start);
    wk.fresh = true;
    ++batch.episodes_started;
    start_distance_sum += t.maze->distance_to_goal(start);
  };
  if (carry) carry->resize(static_cast<std::size_t>(cfg.workers));
  for (std::size_t w = 0; w < workers.size(); ++w) {
    Worker& wk = workers[w];
    const auto& c = carry ? (*carry)[w] : std::optional<WorkerCarry>{};
    if (c && c->task >= 0 && static_cast<std::size_t>(c->task) < tasks.size() &&
        c->state.steps_taken < max_steps) {
      wk.task = c->task;
      wk.state = c->state;
      wk.fresh = c->fresh;
    } else {
      begin_episode(wk);
    }
  }

  const int max_quota = workers.front().quota;
  Eigen::MatrixXd input(obs_dim, cfg.workers);
  ForwardCache cache;
  std::vector<int> active;
  std::vector<double> logp(static_cast<std::size_t>(num_actions));
  for (int t = 0; t < max_quota; ++t) {
    active.clear();
    for (int w = 0; w < cfg.workers; ++w)
      if (t < workers[static_cast<std::size_t>(w)].quota) active.push_back(w);
    input.resize(obs_dim, static_cast<Eigen::Index>(active.size()));
    for (std::size_t i = 0; i < active.size(); ++i) {
      const Worker& wk = workers[static_cast<std::size_t>(active[i])];
      observe_into(*tasks[static_cast<std::size_t>(wk.task)].maze, wk.state.agent,
                   input.col(static_cast<Eigen::Index>(i)).data());
    }
    net.forward(input, cache);

    for (std::size_t i = 0; i < active.size(); ++i) {
      Worker& wk = workers[static_cast<std::size_t>(active[i])];
      const Maze& maze = *tasks[static_cast<std::size_t>(wk.task)].maze;
      const auto col = static_cast<Eigen::Index>(i);
      log_softmax(cache.logits.col(col).data(), num_actions, logp.data());
      const int a = sample_categorical(logp.data(), num_actions, wk.rng);
      const StepResult r = step(maze, wk.state, action_from_int(a), max_steps);

      WorkerBuffer& b = wk.buf;
      b.obs.insert(b.obs.end(), input.col(col).data(), input.col(col).data() + obs_dim);
      b.actions.push_back(a);
      b.log_probs.push_back(logp[static_cast<std::size_t>(a)]);
      b.values.push_back(cache.values(col));
      b.rewards.push_back(r.reward);
      b.dones.push_back(r.done ? 1 : 0);
      b.starts.push_back(wk.fresh ? 1 : 0);
      b.cells.push_back(wk.state.agent);
      b.mazes.push_back(wk.task);
      ++batch.action_counts[static_cast<std::size_t>(a)];
      wk.fresh = false;
      wk.state = r.state;
      if (r.done) {
        ++batch.episodes_finished;
        if (r.reached_goal) ++batch.episodes_succeeded;
        if (t + 1 < wk.quota || carry) begin_episode(wk);
      }
    }
  }
  // Episodes begun but never stepped are not counted as starts.
  batch.mean_start_distance = batch.episodes_started > 0 ? start_distance_sum / batch.episodes_started : 0.0;

  if (carry)
    for (std::size_t w = 0; w < workers.size(); ++w) (*carry)[w] = WorkerCarry{workers[w].task, workers[w].state, workers[w].fresh};

  // Bootstrap values for segments cut off mid-episode.
  std::vector<int> open;
  for (int w = 0; w < cfg.workers; ++w) {
    const Worker& wk = workers[static_cast<std::size_t>(w)];
    if (wk.quota > 0 && !wk.buf.dones.back()) open.push_back(w);
  }
  std::vector<double> bootstrap(static_cast<std::size_t>(cfg.workers), 0.0);
  if (!open.empty()) {
    input.resize(obs_dim, static_cast<Eigen::Index>(open.size()));
    for (std::size_t i = 0; i < open.size(); ++i) {
      const Worker& wk = workers[static_cast<std::size_t>(open[i])];
      observe_into(*tasks[static_cast<std::size_t>(wk.task)].maze, wk.state.agent,
                   input.col(static_cast<Eigen::Index>(i)).data());
    }
    net.forward(input, cache);
    for (std::size_t i = 0; i < open.size(); ++i)
      bootstrap[static_cast<std::size_t>(open[i])] = cache.values(static_cast<Eigen::Index>(i));
  }

  const auto n = static_cast<std::size_t>(cfg.batch_size);
  batch.observations.resize(obs_dim, static_cast<Eigen::Index>(n));
  std::size_t pos = 0;
  for (int w = 0; w < cfg.workers; ++w) {
    const WorkerBuffer& b = workers[static_cast<std::size_t>(w)].buf;
    const std::size_t len = b.actions.size();
    std::copy(b.obs.begin(), b.obs.end(), batch.observations.col(static_cast<Eigen::Index>(pos)).data());
    batch.actions.insert(batch.actions.end(), b.actions.begin(), b.actions.end());
    batch.log_probs.insert(batch.log_probs.end(), b.log_probs.begin(), b.log_probs.end());
    batch.rewards.insert(batch.rewards.end(), b.rewards.begin(), b.rewards.end());
    batch.values.insert(batch.values.end(), b.values.begin(), b.values.end());
    batch.dones.insert(batch.dones.end(), b.dones.begin(), b.dones.end());
    batch.episode_starts.insert(batch.episode_starts.end(), b.starts.begin(), b.starts.end());
    batch.cells.insert(batch.cells.end(), b.cells.begin(), b.cells.end());
    batch.maze_indices.insert(batch.maze_indices.end(), b.mazes.begin(), b.mazes.end());
    for (std::size_t i = 0; i < len; ++i) {
      batch.worker_ids.push_back(w);
      const bool last = i + 1 == len;
      batch.segment_ends.push_back(last ? 1 : 0);
      double next = 0.0;
      if (!b.dones[i]) next = last ? bootstrap[static_cast<std::size_t>(w)] : b.values[i + 1];
      batch.next_values.push_back(next);
    }
    pos += len;
  }
  return batch;
}

void compute_gae(RolloutBatch& batch, double gamma, double tau) {
  const std::size_t n = batch.size();
  batch.advantages.assign(n, 0.0);
  batch.returns.assign(n, 0.0);
  double carry = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const bool done = batch.dones[i] != 0;
    const bool cut = done || batch.segment_ends[i] != 0;
    if (cut) carry = 0.0;
    const double delta =
        batch.rewards[i] + gamma * batch.next_values[i] * (done ? 0.0 : 1.0) - batch.values[i];
    carry = delta + gamma * tau * carry;
    batch.advantages[i] = carry;
    batch.returns[i] = carry + batch.values[i];
  }
}

Minibatch gather(const RolloutBatch& batch, std::span<const std::size_t> indices,
                 std::span<const double> advantages) {
  Minibatch mb;
  mb.observations.resize(batch.obs_dim, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t k = indices[i];
    mb.observations.col(static_cast<Eigen::Index>(i)) = batch.observations.col(static_cast<Eigen::Index>(k));
    mb.actions.push_back(batch.actions[k]);
    mb.old_log_probs.push_back(batch.log_probs[k]);
    mb.advantages.push_back(advantages[k]);
    mb.returns.push_back(batch.returns[k]);
  }
  return mb;
}

LossTerms ppo_loss(const PolicyValueNet& net, const Minibatch& mb, const PPOConfig& cfg,
                   std::span<double> grad) {
  const int a_dim = net.architecture().num_actions;
  const auto b = static_cast<Eigen::Index>(mb.actions.size());
  if (b == 0) fail(ErrorCode::kInvalidArgument, "empty minibatch");
  ForwardCache cache;
  net.forward(mb.observations, cache);

  const bool want_grad = !grad.empty();
  Eigen::MatrixXd dlogits(a_dim, b);
  Eigen::VectorXd dvalues(b);
  std::vector<double> logp(static_cast<std::size_t>(a_dim));
  const double inv_b = 1.0 / static_cast<double>(b);
  LossTerms terms;
  for (Eigen::Index i = 0; i < b; ++i) {
    log_softmax(cache.logits.col(i).data(), a_dim, logp.data());
    const int a = mb.actions[static_cast<std::size_t>(i)];
    const double adv = mb.advantages[static_cast<std::size_t>(i)];
    const double ratio = std::exp(logp[static_cast<std::size_t>(a)] - mb.old_log_probs[static_cast<std::size_t>(i)]);
    const double surr1 = ratio * adv;
    const double surr2 = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
    terms.policy_loss -= std::min(surr1, surr2);
    if (std::abs(ratio - 1.0) > cfg.clip) terms.clip_fraction += 1.0;

    double entropy = 0.0;
    for (int k = 0; k < a_dim; ++k) entropy -= std::exp(logp[static_cast<std::size_t>(k)]) * logp[static_cast<std::size_t>(k)];
    terms.entropy += entropy;

    const double err = cache.values(i) - mb.returns[static_cast<std::size_t>(i)];
    terms.value_loss += err * err;

    if (want_grad) {
      // d(-min(surr1, surr2))/d log pi(a); zero when the clipped branch is active.
      const double g_logp = surr1 <= surr2 ? -ratio * adv : 0.0;
      for (int k = 0; k < a_dim; ++k) {
        const double p = std::exp(logp[static_cast<std::size_t>(k)]);
        const double onehot = k == a ? 1.0 : 0.0;
        dlogits(k, i) = (g_logp * (onehot - p) + cfg.entropy_coef * p * (logp[static_cast<std::size_t>(k)] + entropy)) * inv_b;
      }
      dvalues(i) = 2.0 * cfg.value_coef * err * inv_b;
    }
  }
  terms.policy_loss *= inv_b;
  terms.value_loss *= inv_b;
  terms.entropy *= inv_b;
  terms.clip_fraction *= inv_b;
  terms.total = terms.policy_loss + cfg.value_coef * terms.value_loss - cfg.entropy_coef * terms.entropy;

  if (want_grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    net.backward(cache, dlogits, dvalues, grad);
  }
  return terms;
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    fail(ErrorCode::kInvalidArgument, "optimizer size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

UpdateStats ppo_update(PolicyValueNet& net, Adam& optimizer, const RolloutBatch& batch,
                       const PPOConfig& cfg, int epoch, std::uint64_t seed) {
  validate(cfg);
  if (!batch.has_advantages()) fail(ErrorCode::kInvalidArgument, "ppo_update needs advantages (run compute_gae)");
  const std::size_t n = batch.size();
  if (n % static_cast<std::size_t>(cfg.minibatch_size) != 0)
    fail(ErrorCode::kInvalidArgument, "minibatch_size must divide the batch");

  std::vector<double> adv = batch.advantages;
  if (cfg.normalize_advantages) {
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (double& a : adv) a = (a - mean) / (sd + 1e-8);
  }

  Rng rng = make_rng(seed, {static_cast<std::uint64_t>(epoch), 0x707061ULL});
  std::vector<std::size_t> order(n);
  ParamVector grad(net.params().size());
  UpdateStats stats;
  int steps = 0;
  for (int pass = 0; pass < cfg.ppo_epochs; ++pass) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t off = 0; off < n; off += static_cast<std::size_t>(cfg.minibatch_size)) {
      const Minibatch mb =
          gather(batch, std::span(order).subspan(off, static_cast<std::size_t>(cfg.minibatch_size)), adv);
      const LossTerms t = ppo_loss(net, mb, cfg, grad);
      double norm2 = 0.0;
      for (double g : grad) norm2 += g * g;
      if (!std::isfinite(t.total) || !std::isfinite(norm2)) {
        std::ostringstream msg;
        msg << "epoch " << epoch << " pass " << pass << " minibatch " << off / static_cast<std::size_t>(cfg.minibatch_size)
            << ": policy_loss=" << t.policy_loss << " value_loss=" << t.value_loss << " entropy=" << t.entropy
            << " grad_norm2=" << norm2;
        fail(ErrorCode::kNonFiniteLoss, msg.str());
      }
      optimizer.step(net.params(), grad);
      stats.policy_loss += t.policy_loss;
      stats.value_loss += t.value_loss;
      stats.entropy += t.entropy;
      stats.clip_fraction += t.clip_fraction;
      stats.grad_norm = std::sqrt(norm2);
      ++steps;
    }
  }
  stats.policy_loss /= steps;
  stats.value_loss /= steps;
  stats.entropy /= steps;
  stats.clip_fraction /= steps;
  return stats;
}

}  // namespace backplay
