#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "net.hpp"
#include "ppo.hpp"
#include "random.hpp"

namespace backplay::oracles {

// Advantage by direct double sum over the rest of the episode.
inline std::vector<double> brute_force_gae(const RolloutBatch& b, double gamma, double tau) {
  const std::size_t n = b.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double sum = 0.0;
    for (std::size_t l = t; l < n; ++l) {
      const double delta = b.rewards[l] + gamma * b.next_values[l] * (b.dones[l] ? 0.0 : 1.0) - b.values[l];
      sum += std::pow(gamma * tau, static_cast<double>(l - t)) * delta;
      if (b.dones[l] || b.segment_ends[l]) break;
    }
    out[t] = sum;
  }
  return out;
}

inline RolloutBatch random_batch(Rng& rng, int n) {
  RolloutBatch b;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < n; ++i) {
    b.rewards.push_back(u(rng));
    b.values.push_back(u(rng));
    b.dones.push_back(uniform01(rng) < 0.1 ? 1 : 0);
    b.segment_ends.push_back(i + 1 == n || uniform01(rng) < 0.05 ? 1 : 0);
    b.actions.push_back(0);
  }
  for (int i = 0; i < n; ++i) {
    if (b.dones[i]) b.next_values.push_back(0.0);
    else if (b.segment_ends[i]) b.next_values.push_back(u(rng));
    else b.next_values.push_back(b.values[i + 1]);
  }
  return b;
}

inline Minibatch random_minibatch(const PolicyValueNet& net, Rng& rng, int n, bool on_policy) {
  const Architecture& a = net.architecture();
  Minibatch mb;
  mb.observations = Eigen::MatrixXd::Random(a.input_dim, n);
  ForwardCache cache;
  net.forward(mb.observations, cache);
  std::vector<double> logp(static_cast<std::size_t>(a.num_actions));
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const int act = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(a.num_actions)));
    log_softmax(cache.logits.col(i).data(), a.num_actions, logp.data());
    mb.actions.push_back(act);
    mb.old_log_probs.push_back(logp[static_cast<std::size_t>(act)] + (on_policy ? 0.0 : 0.3 * g(rng)));
    mb.advantages.push_back(g(rng));
    mb.returns.push_back(g(rng));
  }
  return mb;
}

inline double max_rel_grad_error(PolicyValueNet& net, const Minibatch& mb, const PPOConfig& cfg) {
  ParamVector grad(net.params().size());
  ppo_loss(net, mb, cfg, grad);
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double keep = net.params()[i];
    net.params()[i] = keep + h;
    const double up = ppo_loss(net, mb, cfg, {}).total;
    net.params()[i] = keep - h;
    const double down = ppo_loss(net, mb, cfg, {}).total;
    net.params()[i] = keep;
    const double fd = (up - down) / (2 * h);
    const double rel = std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace backplay::oracles
