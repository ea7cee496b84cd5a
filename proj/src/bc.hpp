#pragma once

#include <cstdint>
#include <span>

#include "demos.hpp"
#include "net.hpp"
#include "ppo.hpp"

namespace backplay {

struct BcReport {
  double accuracy = 0.0;  // greedy action matches the demo action
  double loss = 0.0;      // mean cross-entropy after the final epoch
  int samples = 0;
  int epochs_run = 0;
};

// Full-batch Adam on the cross-entropy of pi(a|s) over every (state, action)
// pair of the demonstrations. Each demo is paired with the maze whose id it
// carries; the value head is left untouched.
class BehaviorCloner {
 public:
  BehaviorCloner(std::span<const Maze> mazes, std::span<const Demonstration> demos, PolicyValueNet& net,
                 double learning_rate);

  // One full-batch gradient step.
  void step();
  // Loss and accuracy of the current parameters.
  BcReport report();

  Adam& optimizer() { return adam_; }
  int epochs_run() const { return epochs_run_; }

 private:
  double evaluate(bool fill_grad, int* correct);

  PolicyValueNet& net_;
  Eigen::MatrixXd observations_;
  std::vector<int> actions_;
  Adam adam_;
  ParamVector grad_;
  Eigen::MatrixXd dlogits_;
  ForwardCache cache_;
  int epochs_run_ = 0;
};

BcReport behavior_clone(std::span<const Maze> mazes, std::span<const Demonstration> demos,
                        PolicyValueNet& net, int epochs, double learning_rate);

}  // namespace backplay
