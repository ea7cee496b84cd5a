#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gridworld.hpp"

namespace backplay {

// Skip-free chain on distance levels 0..M; level 0 absorbing. From level l the
// chain moves to l-1 with alpha[l-1], stays with beta[l-1], and moves to l+1
// otherwise. At l = M the away mass folds into staying.
struct BirthDeathChain {
  int M = 0;
  std::vector<double> alpha;
  std::vector<double> beta;

  double toward(int level) const { return alpha[static_cast<std::size_t>(level - 1)]; }
  double away(int level) const {
    return level == M ? 0.0 : 1.0 - alpha[static_cast<std::size_t>(level - 1)] - beta[static_cast<std::size_t>(level - 1)];
  }
  double stay(int level) const { return 1.0 - toward(level) - away(level); }
};

void validate(const BirthDeathChain& chain);

BirthDeathChain constant_alpha_chain(int M, double alpha, double beta = 0.0);

// M x M sub-stochastic block over levels 1..M (level 0 removed).
Eigen::MatrixXd transient_block(const BirthDeathChain& chain);

// Empirical chain from policy rollouts restarted uniformly over open non-goal
// cells, Laplace-smoothed with pseudocount 1 per outcome.
BirthDeathChain estimate_chain(const Maze& maze, const ActionPolicy& policy, int episodes,
                               int max_steps, Rng& rng);

// Expected absorption times E_1..E_M by a tridiagonal (Thomas) solve.
std::vector<double> first_passage_times(const BirthDeathChain& chain);
double first_passage_linear(const BirthDeathChain& chain, int from_level);

struct SpectralPassage {
  double expected_steps = 0.0;       // sum of 1 / (1 - lambda_j), real part
  double imaginary_residue = 0.0;    // |imag| of that sum
  std::vector<double> eigen_moduli;  // sorted descending
};

// Expected absorption time from level M through the non-unit spectrum.
SpectralPassage first_passage_spectral(const BirthDeathChain& chain);

// 1 - max |lambda| over the non-unit spectrum.
double spectral_gap(const BirthDeathChain& chain);

struct ComplexityRates {
  double backplay_rate = 0.0;
  double standard_rate = 0.0;
  double uniform_rate = 0.0;
};

ComplexityRates complexity_rates(int M, int m, double alpha);

enum class StrategyKind { kStandard, kUniform, kBackplay };

struct StrategySpec {
  StrategyKind kind = StrategyKind::kStandard;
  int step = 1;  // Backplay step size m

  static StrategySpec standard() { return {StrategyKind::kStandard, 0}; }
  static StrategySpec uniform() { return {StrategyKind::kUniform, 0}; }
  static StrategySpec backplay(int m) { return {StrategyKind::kBackplay, m}; }
};

std::string strategy_name(const StrategySpec& s);
// "standard", "uniform", "backplay:<m>"
StrategySpec parse_strategy(const std::string& text);

struct SimulationOptions {
  // A trial lasts at most trial_length_factor * M steps.
  int trial_length_factor = 1;
  long max_trials_per_run = 50'000'000;
};

struct ComplexityRecord {
  int M = 0;
  int m = 0;
  std::string strategy;
  double alpha = 0.0;
  double predicted_rate = 0.0;
  double mean_trials = 0.0;
  double trials_std = 0.0;
  int n_runs = 0;
  int censored = 0;
};

// Trials (bounded episodes) a strategy needs before value information
// reaches level M. Replication r uses the stream derived from (seed, r).
ComplexityRecord simulate_strategy(const BirthDeathChain& chain, const StrategySpec& strategy,
                                   std::uint64_t seed, int n_runs, const SimulationOptions& opts = {});

struct SweepSpec {
  std::vector<int> levels;
  double alpha = 0.5;
  double beta = 0.0;
  std::vector<StrategySpec> strategies;
  int runs = 200;
  std::uint64_t seed = 1;
  SimulationOptions options;
  int threads = 0;  // 0: hardware concurrency
};

// Rows sorted by (M, strategy order in the spec).
std::vector<ComplexityRecord> run_sweep(const SweepSpec& spec);

// Header: M,m,strategy,alpha,predicted_rate,mean_trials,std_trials,n_runs,censored
std::string format_sweep_csv(const std::vector<ComplexityRecord>& rows);
std::vector<ComplexityRecord> parse_sweep_csv(const std::string& text);

// "4..14" (step 1), "4..14:2", or "4,6,8".
std::vector<int> parse_level_range(const std::string& text);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace backplay
