#include "gicshield/stochastic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include "gicshield/errors.hpp"

namespace gicshield {
namespace sl {

using Eigen::VectorXd;

namespace {

// 53-bit uniform in [0, 1); fully specified, unlike the distribution
// objects in <random>.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  h *= 0xff51afd7ed558ccdull;
  h ^= h >> 33;
  return h;
}

} // namespace

std::mt19937_64 substream(std::uint64_t seed, int t, int k) {
  std::uint64_t h = 0x517cc1b727220a95ull;
  h = mix(h, seed);
  h = mix(h, static_cast<std::uint64_t>(t));
  h = mix(h, static_cast<std::uint64_t>(k));
  return std::mt19937_64(h);
}

Placement sample_budgeted(const VectorXd& p, int budget, std::mt19937_64& rng) {
  const int s = static_cast<int>(p.size());
  Placement z(static_cast<size_t>(s), 0);
  if (budget <= 0) return z;

  std::vector<int> order(static_cast<size_t>(s));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a] > p[b]; });

  int left = budget;
  for (int j : order) {
    const double u = uniform01(rng);
    if (u < p[j]) {
      z[static_cast<size_t>(j)] = 1;
      if (--left == 0) break;
    }
  }
  return z;
}

VectorXd gradient_estimate(const std::vector<Placement>& samples,
                           const std::vector<double>& f_values, const VectorXd& p) {
  if (samples.size() != f_values.size()) {
    throw SolveError("gradient_estimate: sample/value length mismatch");
  }
  const int s = static_cast<int>(p.size());
  VectorXd pc = p.cwiseMax(kProbClip).cwiseMin(1.0 - kProbClip);
  VectorXd g = VectorXd::Zero(s);
  const double n = static_cast<double>(samples.size());
  for (size_t k = 0; k < samples.size(); ++k) {
    const Placement& z = samples[k];
    for (int i = 0; i < s; ++i) {
      const double score = z[static_cast<size_t>(i)] ? 1.0 / pc[i] : -1.0 / (1.0 - pc[i]);
      g[i] += f_values[k] * score;
    }
  }
  g /= n;
  return g;
}

void sl_step(SlState& state, const VectorXd& g, const SlOptions& opts) {
  const double eta = opts.step_a / static_cast<double>(state.t);
  state.p = (state.p - eta * g).cwiseMax(kProbClip).cwiseMin(1.0 - kProbClip);
  state.t += 1;
  state.last_gradient_norm = g.norm();
}

namespace {

// Evaluate a batch concurrently; duplicate placements solved once.
// Failed evaluations are dropped from the batch.
struct BatchEvaluator {
  const AcNetwork& ac;
  const DcNetwork& dc;
  const GmdScenario& scenario;
  EvalOptions eval;
  int jobs;
  std::map<Placement, double> cache;
  std::mutex cache_mutex;
  int dropped = 0;

  BatchEvaluator(const AcNetwork& a, const DcNetwork& d, const GmdScenario& s,
                 const EvalOptions& e, int j)
      : ac(a), dc(d), scenario(s), eval(e), jobs(j > 0 ? j : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))) {}

  // returns (kept samples, kept F values)
  std::pair<std::vector<Placement>, std::vector<double>> evaluate(
      const std::vector<Placement>& batch) {
    std::vector<Placement> todo;
    {
      std::lock_guard<std::mutex> lock(cache_mutex);
      std::map<Placement, char> seen;
      for (const auto& z : batch) {
        if (!cache.count(z) && !seen.count(z)) {
          todo.push_back(z);
          seen[z] = 1;
        }
      }
    }

    std::atomic<size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= todo.size()) break;
        try {
          const EvaluationReport rep = acopf::evaluate_placement(ac, dc, scenario, todo[i], eval);
          std::lock_guard<std::mutex> lock(cache_mutex);
          cache[todo[i]] = rep.objective;
        } catch (const std::exception&) {
          std::lock_guard<std::mutex> lock(cache_mutex);
          cache[todo[i]] = kInf;  // marks a dropped evaluation
        }
      }
    };
    const int n_workers = std::min<int>(jobs, static_cast<int>(todo.size()));
    std::vector<std::thread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    std::pair<std::vector<Placement>, std::vector<double>> kept;
    std::lock_guard<std::mutex> lock(cache_mutex);
    for (size_t i = 0; i < batch.size(); ++i) {
      const double f = cache.at(batch[i]);
      if (std::isfinite(f)) {
        kept.first.push_back(batch[i]);
        kept.second.push_back(f);
      } else {
        ++dropped;
      }
    }
    return kept;
  }
};

} // namespace

SlResult run_sl(const AcNetwork& ac, const DcNetwork& dc, const GmdScenario& scenario, int budget,
                const SlOptions& opts) {
  if (budget < 0) throw ValidationError("run_sl: budget must be nonnegative");
  const int S = ac.substation_count();

  SlState state;
  state.p = (opts.p0.size() == S) ? opts.p0 : VectorXd::Constant(S, 0.5);
  state.p = state.p.cwiseMax(kProbClip).cwiseMin(1.0 - kProbClip);

  EvalOptions eval = opts.eval;
  eval.budget = budget;
  BatchEvaluator evaluator(ac, dc, scenario, eval, opts.jobs);

  SlResult result;

  auto run_batch = [&](int t, const VectorXd& p) {
    std::vector<Placement> batch;
    batch.reserve(static_cast<size_t>(opts.samples));
    for (int k = 0; k < opts.samples; ++k) {
      std::mt19937_64 rng = substream(opts.seed, t, k);
      batch.push_back(sample_budgeted(p, budget, rng));
    }
    return evaluator.evaluate(batch);
  };

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    auto [samples, values] = run_batch(state.t, state.p);
    if (samples.empty()) {
      throw SolveError("run_sl: every evaluation in the batch failed");
    }

    double batch_best = kInf;
    for (size_t k = 0; k < samples.size(); ++k) {
      if (values[k] < batch_best) batch_best = values[k];
      if (!state.has_best || values[k] < state.best_f) {
        state.best_f = values[k];
        state.best_z = samples[k];
        state.has_best = true;
      }
    }

    const VectorXd g = gradient_estimate(samples, values, state.p);
    const int t_row = state.t;
    sl_step(state, g, opts);

    result.trace.push_back({t_row, state.last_gradient_norm, batch_best, state.p});
    result.iterations = t_row;

    if (state.last_gradient_norm < opts.epsilon) {
      result.converged = true;
      break;
    }
  }

  // final exploration batch from the terminal distribution
  {
    auto [samples, values] = run_batch(state.t, state.p);
    for (size_t k = 0; k < samples.size(); ++k) {
      if (!state.has_best || values[k] < state.best_f) {
        state.best_f = values[k];
        state.best_z = samples[k];
        state.has_best = true;
      }
    }
  }

  if (!state.has_best) throw SolveError("run_sl: no successful evaluation");
  result.p = state.p;
  result.best_z = state.best_z;
  result.best_f = state.best_f;
  result.dropped_evaluations = evaluator.dropped;
  return result;
}

} // namespace sl
} // namespace gicshield
