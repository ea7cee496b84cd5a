#include "bc.hpp"

#include <cmath>
#include <map>

#include "error.hpp"

namespace backplay {

BehaviorCloner::BehaviorCloner(std::span<const Maze> mazes, std::span<const Demonstration> demos,
                               PolicyValueNet& net, double learning_rate)
    : net_(net), adam_(net.params().size(), learning_rate), grad_(net.params().size()) {
  if (demos.empty()) fail(ErrorCode::kInvalidArgument, "behavior cloning needs at least one demonstration");
  const int obs_dim = net.architecture().input_dim;
  std::map<std::uint64_t, const Maze*> by_id;
  for (const Maze& m : mazes) by_id[m.id()] = &m;
  std::size_t total = 0;
  for (const auto& d : demos) total += d.actions.size();
  if (total == 0) fail(ErrorCode::kInvalidArgument, "demonstrations contain no actions");
  observations_.resize(obs_dim, static_cast<Eigen::Index>(total));
  Eigen::Index col = 0;
  for (const auto& d : demos) {
    auto it = by_id.find(d.maze_id);
    if (it == by_id.end()) fail(ErrorCode::kInvalidArgument, "no maze for demonstration " + hex_id(d.maze_id));
    const Maze& m = *it->second;
    if (observation_size(m.width(), m.height()) != obs_dim)
      fail(ErrorCode::kInvalidArgument, "maze size does not match network input");
    for (std::size_t i = 0; i < d.actions.size(); ++i) {
      observe_into(m, d.states[i], observations_.col(col++).data());
      actions_.push_back(to_int(d.actions[i]));
    }
  }
  dlogits_.resize(net.architecture().num_actions, static_cast<Eigen::Index>(total));
}

double BehaviorCloner::evaluate(bool fill_grad, int* correct) {
  const int a_dim = net_.architecture().num_actions;
  const auto n = static_cast<Eigen::Index>(actions_.size());
  std::vector<double> logp(static_cast<std::size_t>(a_dim));
  net_.forward(observations_, cache_);
  double loss = 0.0;
  *correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    log_softmax(cache_.logits.col(i).data(), a_dim, logp.data());
    const int a = actions_[static_cast<std::size_t>(i)];
    loss -= logp[static_cast<std::size_t>(a)];
    Eigen::Index best;
    cache_.logits.col(i).maxCoeff(&best);
    if (best == a) ++*correct;
    if (fill_grad)
      for (int k = 0; k < a_dim; ++k)
        dlogits_(k, i) = (std::exp(logp[static_cast<std::size_t>(k)]) - (k == a ? 1.0 : 0.0)) / static_cast<double>(n);
  }
  return loss / static_cast<double>(n);
}

void BehaviorCloner::step() {
  int correct = 0;
  const double loss = evaluate(true, &correct);
  if (!std::isfinite(loss)) fail(ErrorCode::kNonFiniteLoss, "behavior cloning loss diverged");
  std::fill(grad_.begin(), grad_.end(), 0.0);
  const Eigen::VectorXd dvalues = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(actions_.size()));
  net_.backward(cache_, dlogits_, dvalues, grad_);
  adam_.step(net_.params(), grad_);
  ++epochs_run_;
}

BcReport BehaviorCloner::report() {
  BcReport r;
  int correct = 0;
  r.loss = evaluate(false, &correct);
  r.samples = static_cast<int>(actions_.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(actions_.size());
  r.epochs_run = epochs_run_;
  return r;
}

BcReport behavior_clone(std::span<const Maze> mazes, std::span<const Demonstration> demos,
                        PolicyValueNet& net, int epochs, double learning_rate) {
  BehaviorCloner cloner(mazes, demos, net, learning_rate);
  for (int e = 0; e < epochs; ++e) cloner.step();
  return cloner.report();
}

}  // namespace backplay
