#include "analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <sstream>

#include "error.hpp"
#include "parallel.hpp"

namespace backplay {

void validate(const BirthDeathChain& c) {
  if (c.M < 1) fail(ErrorCode::kInvalidArgument, "chain needs M >= 1");
  if (c.alpha.size() != static_cast<std::size_t>(c.M) || c.beta.size() != static_cast<std::size_t>(c.M))
    fail(ErrorCode::kInvalidArgument, "chain alpha/beta must have M entries");
  for (int l = 1; l <= c.M; ++l) {
    const double a = c.alpha[static_cast<std::size_t>(l - 1)], b = c.beta[static_cast<std::size_t>(l - 1)];
    if (!(a > 0.0 && a <= 1.0)) fail(ErrorCode::kInvalidArgument, "alpha_" + std::to_string(l) + " must be in (0, 1]");
    if (!(b >= 0.0)) fail(ErrorCode::kInvalidArgument, "beta_" + std::to_string(l) + " must be >= 0");
    if (a + b > 1.0 + 1e-12) fail(ErrorCode::kInvalidArgument, "alpha_l + beta_l exceeds 1 at level " + std::to_string(l));
  }
}

BirthDeathChain constant_alpha_chain(int M, double alpha, double beta) {
  BirthDeathChain c{M, std::vector<double>(static_cast<std::size_t>(M), alpha),
                    std::vector<double>(static_cast<std::size_t>(M), beta)};
  validate(c);
  return c;
}

Eigen::MatrixXd transient_block(const BirthDeathChain& c) {
  validate(c);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(c.M, c.M);
  for (int l = 1; l <= c.M; ++l) {
    const int i = l - 1;
    if (l > 1) q(i, i - 1) = c.toward(l);
    q(i, i) = c.stay(l);
    if (l < c.M) q(i, i + 1) = c.away(l);
  }
  return q;
}

BirthDeathChain estimate_chain(const Maze& maze, const ActionPolicy& policy, int episodes, int max_steps,
                               Rng& rng) {
  const auto& dist = maze.distance_to_goal();
  int M = 0;
  std::vector<Cell> starts;
  for (int i = 0; i < maze.num_cells(); ++i) {
    M = std::max(M, dist[static_cast<std::size_t>(i)]);
    if (dist[static_cast<std::size_t>(i)] > 0) starts.push_back(maze.cell_at(i));
  }
  std::vector<long> dec(static_cast<std::size_t>(M) + 1, 0), stay(dec), inc(dec);
  for (int e = 0; e < episodes; ++e) {
    EnvState s = reset_to(maze, starts[uniform_index(rng, starts.size())]);
    while (true) {
      const int from = maze.distance_to_goal(s.agent);
      const StepResult r = step(maze, s, policy(maze, s, rng), max_steps);
      const int to = maze.distance_to_goal(r.state.agent);
      if (from > 0) {
        if (to == from - 1) ++dec[static_cast<std::size_t>(from)];
        else if (to == from) ++stay[static_cast<std::size_t>(from)];
        else ++inc[static_cast<std::size_t>(from)];
      }
      s = r.state;
      if (r.done) break;
    }
  }
  BirthDeathChain c;
  c.M = M;
  for (int l = 1; l <= M; ++l) {
    const auto i = static_cast<std::size_t>(l);
    const double n = static_cast<double>(dec[i] + stay[i] + inc[i]) + 3.0;
    const double a = (dec[i] + 1.0) / n;
    c.alpha.push_back(a);
    c.beta.push_back(l == M ? 1.0 - a : (stay[i] + 1.0) / n);
  }
  validate(c);
  return c;
}

std::vector<double> first_passage_times(const BirthDeathChain& c) {
  validate(c);
  const int M = c.M;
  // (1 - stay_l) E_l - alpha_l E_{l-1} - away_l E_{l+1} = 1, E_0 = 0.
  std::vector<double> cp(static_cast<std::size_t>(M)), dp(static_cast<std::size_t>(M));
  for (int l = 1; l <= M; ++l) {
    const auto i = static_cast<std::size_t>(l - 1);
    const double a = l > 1 ? -c.toward(l) : 0.0;
    const double b = 1.0 - c.stay(l);
    const double up = -c.away(l);
    const double denom = b - (l > 1 ? a * cp[i - 1] : 0.0);
    if (!(std::abs(denom) > 1e-300)) fail(ErrorCode::kNumeric, "singular first-passage system at level " + std::to_string(l));
    cp[i] = up / denom;
    dp[i] = (1.0 - (l > 1 ? a * dp[i - 1] : 0.0)) / denom;
  }
  std::vector<double> e(static_cast<std::size_t>(M));
  e[static_cast<std::size_t>(M - 1)] = dp[static_cast<std::size_t>(M - 1)];
  for (int i = M - 2; i >= 0; --i)
    e[static_cast<std::size_t>(i)] = dp[static_cast<std::size_t>(i)] - cp[static_cast<std::size_t>(i)] * e[static_cast<std::size_t>(i + 1)];
  return e;
}

double first_passage_linear(const BirthDeathChain& c, int from_level) {
  if (from_level < 0 || from_level > c.M) fail(ErrorCode::kInvalidArgument, "level out of range");
  if (from_level == 0) return 0.0;
  return first_passage_times(c)[static_cast<std::size_t>(from_level - 1)];
}

namespace {

Eigen::VectorXcd nonunit_spectrum(const BirthDeathChain& c) {
  const Eigen::MatrixXd q = transient_block(c);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(q, false);
  if (solver.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "eigen-solver failed on transient block:\n" << q;
    fail(ErrorCode::kNumeric, msg.str());
  }
  return solver.eigenvalues();
}

}  // namespace

SpectralPassage first_passage_spectral(const BirthDeathChain& c) {
  const Eigen::VectorXcd lambda = nonunit_spectrum(c);
  std::complex<double> sum = 0.0;
  SpectralPassage out;
  for (Eigen::Index j = 0; j < lambda.size(); ++j) {
    sum += 1.0 / (1.0 - lambda(j));
    out.eigen_moduli.push_back(std::abs(lambda(j)));
  }
  std::sort(out.eigen_moduli.rbegin(), out.eigen_moduli.rend());
  out.expected_steps = sum.real();
  out.imaginary_residue = std::abs(sum.imag());
  if (out.imaginary_residue >= 1e-9 * std::max(1.0, std::abs(sum.real()))) {
    std::ostringstream msg;
    msg << "spectral first-passage sum has imaginary residue " << out.imaginary_residue << "; block:\n"
        << transient_block(c);
    fail(ErrorCode::kNumeric, msg.str());
  }
  return out;
}

double spectral_gap(const BirthDeathChain& c) {
  const Eigen::VectorXcd lambda = nonunit_spectrum(c);
  return 1.0 - lambda.cwiseAbs().maxCoeff();
}

ComplexityRates complexity_rates(int M, int m, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::kDomain, "alpha must lie in (0, 1)");
  if (M < 1 || m < 1 || m > M) fail(ErrorCode::kDomain, "need 1 <= m <= M");
  const double dm = static_cast<double>(M);
  ComplexityRates r;
  r.backplay_rate = dm * dm * (1.0 - std::pow(alpha, m + 1)) / (m * (1.0 - alpha)) * std::pow(alpha, -m);
  r.standard_rate = dm * std::pow(alpha, -dm / 2.0);
  r.uniform_rate = dm * dm * dm / alpha;
  return r;
}

std::string strategy_name(const StrategySpec& s) {
  switch (s.kind) {
    case StrategyKind::kStandard: return "standard";
    case StrategyKind::kUniform: return "uniform";
    case StrategyKind::kBackplay: return "backplay:" + std::to_string(s.step);
  }
  return "?";
}

StrategySpec parse_strategy(const std::string& text) {
  if (text == "standard") return StrategySpec::standard();
  if (text == "uniform") return StrategySpec::uniform();
  if (text.rfind("backplay", 0) == 0) {
    if (text == "backplay") return StrategySpec::backplay(1);
    if (text.size() > 9 && text[8] == ':') {
      try {
        std::size_t used = 0;
        const int m = std::stoi(text.substr(9), &used);
        if (used == text.size() - 9 && m >= 1) return StrategySpec::backplay(m);
      } catch (const std::exception&) {
      }
    }
  }
  fail(ErrorCode::kConfig, "unknown strategy '" + text + "' (standard, uniform, backplay:<m>)");
}

namespace {

class ChainSampler {
 public:
  ChainSampler(const BirthDeathChain& c, int cap) : c_(c), cap_(cap) {}

  // One trial from `start`; succeeds when the chain reaches a level at or
  // below `floor` within the step cap.
  bool trial(int start, int floor, Rng& rng) const {
    int l = start;
    for (int t = 0; t < cap_; ++t) {
      l = next(l, rng);
      if (l <= floor) return true;
    }
    return false;
  }

  // Trial that succeeds on entering any conquered level.
  bool trial(int start, const std::vector<std::uint8_t>& conquered, Rng& rng) const {
    int l = start;
    for (int t = 0; t < cap_; ++t) {
      l = next(l, rng);
      if (conquered[static_cast<std::size_t>(l)]) return true;
    }
    return false;
  }

 private:
  int next(int l, Rng& rng) const {
    const double u = uniform01(rng);
    const double a = c_.toward(l);
    if (u < a) return l - 1;
    if (u < a + c_.stay(l)) return l;
    return l + 1;
  }

  const BirthDeathChain& c_;
  int cap_;
};

}  // namespace

ComplexityRecord simulate_strategy(const BirthDeathChain& chain, const StrategySpec& strategy, std::uint64_t seed,
                                   int n_runs, const SimulationOptions& opts) {
  validate(chain);
  if (n_runs < 1) fail(ErrorCode::kInvalidArgument, "n_runs must be >= 1");
  if (opts.trial_length_factor < 1) fail(ErrorCode::kInvalidArgument, "trial_length_factor must be >= 1");
  const int M = chain.M;
  if (strategy.kind == StrategyKind::kBackplay && (strategy.step < 1 || strategy.step > M))
    fail(ErrorCode::kInvalidArgument, "backplay step must satisfy 1 <= m <= M");
  const ChainSampler sampler(chain, opts.trial_length_factor * M);

  double mean_alpha = 0.0;
  for (double a : chain.alpha) mean_alpha += a;
  mean_alpha /= M;

  ComplexityRecord rec;
  rec.M = M;
  rec.m = strategy.kind == StrategyKind::kBackplay ? strategy.step : 0;
  rec.strategy = strategy_name(strategy);
  rec.alpha = mean_alpha;
  rec.n_runs = n_runs;
  if (mean_alpha > 0.0 && mean_alpha < 1.0) {
    const ComplexityRates rates = complexity_rates(M, std::max(rec.m, 1), mean_alpha);
    rec.predicted_rate = strategy.kind == StrategyKind::kBackplay   ? rates.backplay_rate
                         : strategy.kind == StrategyKind::kStandard ? rates.standard_rate
                                                                    : rates.uniform_rate;
  }

  std::vector<double> totals;
  for (int run = 0; run < n_runs; ++run) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(run)});
    long trials = 0;
    bool censored = false;
    const long cap = opts.max_trials_per_run;
    switch (strategy.kind) {
      case StrategyKind::kStandard:
        while (!censored) {
          ++trials;
          if (sampler.trial(M, 0, rng)) break;
          censored = trials >= cap;
        }
        break;
      case StrategyKind::kBackplay: {
        // Stages at levels m, 2m, ..., ending at M; conquered levels absorb.
        int floor = 0;
        while (floor < M && !censored) {
          const int level = std::min(floor + strategy.step, M);
          while (true) {
            ++trials;
            if (sampler.trial(level, floor, rng)) break;
            if (trials >= cap) {
              censored = true;
              break;
            }
          }
          floor = level;
        }
        break;
      }
      case StrategyKind::kUniform: {
        std::vector<std::uint8_t> conquered(static_cast<std::size_t>(M) + 1, 0);
        conquered[0] = 1;
        int remaining = M - 1;  // levels 1..M-1 still to conquer
        while (!censored) {
          ++trials;
          const int start = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(M)));
          if (sampler.trial(start, conquered, rng)) {
            if (start == M) {
              if (remaining == 0) break;
            } else if (!conquered[static_cast<std::size_t>(start)]) {
              conquered[static_cast<std::size_t>(start)] = 1;
              --remaining;
            }
          }
          censored = trials >= cap;
        }
        break;
      }
    }
    if (censored) ++rec.censored;
    totals.push_back(static_cast<double>(trials));
  }
  double sum = 0.0;
  for (double t : totals) sum += t;
  rec.mean_trials = sum / n_runs;
  double var = 0.0;
  for (double t : totals) var += (t - rec.mean_trials) * (t - rec.mean_trials);
  rec.trials_std = n_runs > 1 ? std::sqrt(var / (n_runs - 1)) : 0.0;
  return rec;
}

std::vector<ComplexityRecord> run_sweep(const SweepSpec& spec) {
  if (spec.levels.empty() || spec.strategies.empty())
    fail(ErrorCode::kConfig, "sweep needs at least one level and one strategy");
  struct Job {
    int M;
    std::size_t strategy;
  };
  std::vector<Job> jobs;
  for (int M : spec.levels)
    for (std::size_t s = 0; s < spec.strategies.size(); ++s) jobs.push_back({M, s});
  std::vector<ComplexityRecord> out(jobs.size());
  parallel_for(jobs.size(), spec.threads, [&](std::size_t i) {
    const Job& job = jobs[i];
    const StrategySpec& strat = spec.strategies[job.strategy];
    const BirthDeathChain chain = constant_alpha_chain(job.M, spec.alpha, spec.beta);
    const std::uint64_t seed = derive_seed(spec.seed, {static_cast<std::uint64_t>(job.M),
                                                       static_cast<std::uint64_t>(strat.kind),
                                                       static_cast<std::uint64_t>(strat.step)});
    out[i] = simulate_strategy(chain, strat, seed, spec.runs, spec.options);
  });
  return out;
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream ss;
  ss << std::setprecision(10) << v;
  return ss.str();
}

}  // namespace

std::string format_sweep_csv(const std::vector<ComplexityRecord>& rows) {
  std::string out = "M,m,strategy,alpha,predicted_rate,mean_trials,std_trials,n_runs,censored\n";
  for (const auto& r : rows) {
    out += std::to_string(r.M) + "," + std::to_string(r.m) + "," + r.strategy + "," + fmt_double(r.alpha) + "," +
           fmt_double(r.predicted_rate) + "," + fmt_double(r.mean_trials) + "," + fmt_double(r.trials_std) + "," +
           std::to_string(r.n_runs) + "," + std::to_string(r.censored) + "\n";
  }
  return out;
}

std::vector<ComplexityRecord> parse_sweep_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "M,m,strategy,alpha,predicted_rate,mean_trials,std_trials,n_runs,censored")
    fail(ErrorCode::kParse, "sweep CSV line 1: unexpected header");
  std::vector<ComplexityRecord> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 9) fail(ErrorCode::kParse, "sweep CSV line " + std::to_string(lineno) + ": expected 9 fields");
    try {
      ComplexityRecord r;
      r.M = std::stoi(f[0]);
      r.m = std::stoi(f[1]);
      r.strategy = f[2];
      r.alpha = std::stod(f[3]);
      r.predicted_rate = std::stod(f[4]);
      r.mean_trials = std::stod(f[5]);
      r.trials_std = std::stod(f[6]);
      r.n_runs = std::stoi(f[7]);
      r.censored = std::stoi(f[8]);
      rows.push_back(r);
    } catch (const std::exception&) {
      fail(ErrorCode::kParse, "sweep CSV line " + std::to_string(lineno) + ": bad number");
    }
  }
  return rows;
}

std::vector<int> parse_level_range(const std::string& text) {
  auto bad = [&]() -> std::vector<int> { fail(ErrorCode::kConfig, "bad level range '" + text + "'"); };
  std::vector<int> out;
  try {
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
      const int lo = std::stoi(text.substr(0, dots));
      std::string rest = text.substr(dots + 2);
      int stride = 1;
      const auto colon = rest.find(':');
      if (colon != std::string::npos) {
        stride = std::stoi(rest.substr(colon + 1));
        rest = rest.substr(0, colon);
      }
      const int hi = std::stoi(rest);
      if (lo < 1 || hi < lo || stride < 1) return bad();
      for (int v = lo; v <= hi; v += stride) out.push_back(v);
    } else {
      std::stringstream ss(text);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        const int v = std::stoi(tok);
        if (v < 1) return bad();
        out.push_back(v);
      }
    }
  } catch (const std::exception&) {
    return bad();
  }
  if (out.empty()) return bad();
  return out;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) fail(ErrorCode::kInvalidArgument, "fit_line needs >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

}  // namespace backplay
