#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "gicshield/acopf.hpp"
#include "gicshield/common.hpp"
#include "gicshield/network.hpp"

namespace gicshield {

struct SlOptions {
  int samples = 8;       // N, evaluations per iteration
  double step_a = 1.0;   // eta_t = step_a / t
  double epsilon = 1e-3; // gradient-norm tolerance
  int max_iters = 100;
  std::uint64_t seed = 0;
  Eigen::VectorXd p0;  // empty -> 0.5 everywhere
  int jobs = 0;        // concurrent evaluations; 0 -> hardware
  EvalOptions eval;
};

struct SlState {
  Eigen::VectorXd p;  // in [delta, 1-delta]^S
  int t = 1;
  double last_gradient_norm = kInf;
  Placement best_z;
  double best_f = kInf;
  bool has_best = false;
};

struct SlTraceRow {
  int t = 0;
  double grad_norm = 0.0;
  double batch_best_f = 0.0;
  Eigen::VectorXd p;
};

struct SlResult {
  Eigen::VectorXd p;  // terminal probabilities
  Placement best_z;
  double best_f = kInf;
  bool converged = false;
  int iterations = 0;
  int dropped_evaluations = 0;
  std::vector<SlTraceRow> trace;
};

namespace sl {

/// Probabilities are kept inside [kProbClip, 1 - kProbClip]; the score
/// estimator divides by p and 1-p.
inline constexpr double kProbClip = 1e-6;

/// Deterministic per-sample RNG substream derived from (seed, t, k).
std::mt19937_64 substream(std::uint64_t seed, int t, int k);

/// Budget-aware Bernoulli sampling: indices visited by descending
/// probability (ties by ascending index), one draw per visited index,
/// stop once the budget is consumed. budget = 0 returns all-zeros
/// without touching the RNG.
Placement sample_budgeted(const Eigen::VectorXd& p, int budget, std::mt19937_64& rng);

/// Score-function estimator
/// g = (1/N) sum_k F(z^k) sum_i (z^k_i/p_i - (1-z^k_i)/(1-p_i)) e_i.
Eigen::VectorXd gradient_estimate(const std::vector<Placement>& samples,
                                  const std::vector<double>& f_values, const Eigen::VectorXd& p);

/// p <- clip(p - (a/t) g), t <- t + 1.
void sl_step(SlState& state, const Eigen::VectorXd& g, const SlOptions& opts);

/// Full driver: sample, evaluate concurrently, estimate, step; after
/// termination draws one final batch from the terminal p and returns the
/// best placement seen anywhere.
SlResult run_sl(const AcNetwork& ac, const DcNetwork& dc, const GmdScenario& scenario, int budget,
                const SlOptions& opts);

} // namespace sl
} // namespace gicshield
