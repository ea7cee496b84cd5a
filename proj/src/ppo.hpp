#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "curriculum.hpp"
#include "gridworld.hpp"
#include "net.hpp"

namespace backplay {

struct PPOConfig {
  double gamma = 0.99;
  double learning_rate = 1e-3;
  double clip = 0.2;
  double gae_tau = 0.95;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  int ppo_epochs = 4;
  int workers = 8;
  // Transitions per worker per epoch; 0 derives it from batch_size / workers.
  int horizon = 0;
  int batch_size = 1024;
  int minibatch_size = 256;
  bool normalize_advantages = true;
  int hidden = 128;
};

void validate(const PPOConfig& cfg);

// Per-timestep arrays. Each worker's transitions are contiguous; the last
// transition of a worker is marked segment_end and bootstraps from
// next_values.
struct RolloutBatch {
  int obs_dim = 0;
  Eigen::MatrixXd observations;  // obs_dim x N
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<double> next_values;
  std::vector<std::uint8_t> dones;
  std::vector<std::uint8_t> segment_ends;
  std::vector<std::uint8_t> episode_starts;
  std::vector<Cell> cells;
  std::vector<int> maze_indices;
  std::vector<int> worker_ids;
  std::vector<double> advantages;
  std::vector<double> returns;

  // Collection statistics.
  int episodes_started = 0;
  int episodes_finished = 0;
  int episodes_succeeded = 0;
  double mean_start_distance = 0.0;
  std::array<long, kNumActions> action_counts{};

  std::size_t size() const { return actions.size(); }
  bool has_advantages() const { return advantages.size() == actions.size() && !actions.empty(); }
};

// One maze and the sampler that chooses its episode start states.
struct TrainingTask {
  const Maze* maze = nullptr;
  const StartStateSampler* sampler = nullptr;
};

// An unfinished episode handed from one collection to the next.
struct WorkerCarry {
  int task = 0;
  EnvState state;
  bool fresh = false;  // not yet stepped
};

// Exactly cfg.batch_size transitions from cfg.workers lockstep episode streams.
// Worker w draws from the stream derived from (seed, epoch, w); each new
// episode picks a task uniformly, then a start state from its sampler.
// With `carry`, workers resume the episodes left running by the previous call
// (an empty entry starts a new one) and leave theirs behind on return;
// without it every worker starts a fresh episode.
RolloutBatch collect_rollouts(std::span<const TrainingTask> tasks, const PolicyValueNet& net,
                              const PPOConfig& cfg, int max_steps, int epoch, std::uint64_t seed,
                              std::vector<std::optional<WorkerCarry>>* carry = nullptr);

void compute_gae(RolloutBatch& batch, double gamma, double tau);

struct Minibatch {
  Eigen::MatrixXd observations;
  std::vector<int> actions;
  std::vector<double> old_log_probs;
  std::vector<double> advantages;
  std::vector<double> returns;
};

Minibatch gather(const RolloutBatch& batch, std::span<const std::size_t> indices,
                 std::span<const double> advantages);

struct LossTerms {
  double total = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

// Mean over the minibatch of
//   -min(r A, clip(r, 1-eps, 1+eps) A) + c_v (V - R)^2 - c_e H(pi).
// When `grad` is non-empty it is overwritten with the exact gradient.
LossTerms ppo_loss(const PolicyValueNet& net, const Minibatch& mb, const PPOConfig& cfg,
                   std::span<double> grad);

class Adam {
 public:
  explicit Adam(std::size_t n, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad);

  std::vector<double>& first_moment() { return m_; }
  std::vector<double>& second_moment() { return v_; }
  long& step_count() { return t_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  long step_count() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;  // of the last minibatch
};

// cfg.ppo_epochs passes over shuffled minibatches. Minibatch order is drawn
// from the stream derived from (seed, epoch).
UpdateStats ppo_update(PolicyValueNet& net, Adam& optimizer, const RolloutBatch& batch,
                       const PPOConfig& cfg, int epoch, std::uint64_t seed);

}  // namespace backplay
