#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "random.hpp"

namespace backplay {

// Parameter storage is over-aligned so vectorized kernels see the same
// alignment on every allocation; otherwise summation order, and so results,
// can depend on heap layout.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

// Dense trunk (two ReLU layers) feeding a logits head and a scalar value head.
struct Architecture {
  int input_dim = 0;
  int hidden1 = 128;
  int hidden2 = 128;
  int num_actions = 5;
  // When > 0 the input is split into this many equal planes and each plane is
  // scaled to unit length before the first layer; 0 feeds it unchanged.
  int input_planes = 0;

  std::size_t param_count() const;
  std::uint64_t hash() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct ForwardCache {
  Eigen::MatrixXd input;   // input_dim x B
  Eigen::MatrixXd hidden1; // post-ReLU
  Eigen::MatrixXd hidden2; // post-ReLU
  Eigen::MatrixXd logits;  // num_actions x B
  Eigen::VectorXd values;  // B
};

class PolicyValueNet {
 public:
  PolicyValueNet() = default;
  explicit PolicyValueNet(const Architecture& arch);

  // Orthogonal init: gain sqrt(2) for the trunk, 0.01 for the policy head,
  // 1 for the value head; zero biases.
  static PolicyValueNet initialized(const Architecture& arch, Rng& rng);

  const Architecture& architecture() const { return arch_; }
  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }

  // Columns of `input` are observations.
  void forward(const Eigen::MatrixXd& input, ForwardCache& cache) const;

  // Accumulates d(loss)/d(params) into `grad` given the loss gradient with
  // respect to logits (num_actions x B) and values (B).
  void backward(const ForwardCache& cache, const Eigen::MatrixXd& dlogits,
                const Eigen::VectorXd& dvalues, std::span<double> grad) const;

 private:
  struct Offsets {
    std::size_t w1, b1, w2, b2, wp, bp, wv, bv, end;
  };
  Offsets offsets() const;

  Architecture arch_;
  ParamVector params_;
};

// Row-wise stable softmax / log-softmax over one column of logits.
void log_softmax(const double* logits, int n, double* out);

// Checkpoint: "BPCK", u32 version, u64 arch_hash, u64 param_count,
// 5 x u32 architecture fields (input, hidden1, hidden2, actions, planes), then param_count little-endian f64.
std::string serialize_checkpoint(const PolicyValueNet& net);
PolicyValueNet deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const PolicyValueNet& net, const std::string& path);
PolicyValueNet load_checkpoint(const std::string& path);

}  // namespace backplay
