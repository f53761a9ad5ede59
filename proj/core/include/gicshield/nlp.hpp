#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gicshield/common.hpp"

namespace gicshield {

/// Smooth bound-constrained NLP with equality and inequality constraints.
///
/// Callbacks return the value and, when `grad` is non-null, must fill the
/// full dense gradient (the buffer arrives zeroed). Callbacks must be
/// deterministic, reentrant, and smooth on the box.
struct NlpProblem {
  using Fn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

  struct Constraint {
    std::string name;
    Fn fn;
  };

  int n = 0;
  Eigen::VectorXd lower;  // may contain -inf
  Eigen::VectorXd upper;  // may contain +inf
  Fn objective;
  std::vector<Constraint> eq;    // c(x) = 0
  std::vector<Constraint> ineq;  // g(x) <= 0
  /// Pairs (i, j) of variable indices whose product is driven to
  /// x_i * x_j <= eps_c on a decreasing relaxation schedule. Both
  /// variables are expected to carry nonnegative lower bounds.
  std::vector<std::pair<int, int>> complementarity_pairs;
};

struct NlpOptions {
  double tol = 1e-6;        // residual and projected-gradient target
  int max_outer = 50;       // multiplier updates
  int max_inner = 500;      // quasi-Newton iterations per outer round
  double penalty0 = 10.0;   // initial augmented-Lagrangian penalty
  double penalty_growth = 10.0;
  double penalty_max = 1e12;
  double comp_eps0 = 1e-2;      // complementarity relaxation start
  double comp_eps_final = 1e-8; // relaxation floor (factor 10 per round)
  int lbfgs_memory = 10;
  // diagnostics: called once per outer round
  std::function<void(int outer, int inner_iters, double f, double res, double pg, double penalty)>
      on_outer;
};

struct NlpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd ineq_multipliers;
  Eigen::VectorXd comp_multipliers;
  SolveStatus status = SolveStatus::IterationLimit;
  int outer_iterations = 0;
  int inner_iterations = 0;     // total across outer rounds
  double max_residual = kInf;   // true max over all constraints
  double projected_gradient = kInf;
  double penalty = 0.0;         // final AL penalty (useful for warm starts)
};

/// Optional multiplier warm start (e.g. across ADMM iterations).
struct NlpWarmStart {
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd ineq_multipliers;
  Eigen::VectorXd comp_multipliers;
  double penalty = 0.0;  // <= 0 means "use opts.penalty0"
};

namespace nlp {

/// Augmented-Lagrangian outer loop with a projected L-BFGS inner loop on
/// the box. Complementarity pairs enter as inequalities x_i*x_j <= eps_c
/// with eps_c tightened by a factor 10 each outer round down to
/// comp_eps_final. Deterministic: identical inputs give identical iterates.
NlpSolution solve(const NlpProblem& p, const Eigen::VectorXd& x0, const NlpOptions& opts,
                  const NlpWarmStart* warm = nullptr);

/// Central finite differences (step 1e-6*(1+|x_i|)) against the analytic
/// gradients of the objective and every constraint. Returns the max over
/// functions of max_i |fd_i - an_i| / max(1, ||an||_inf).
double check_gradients(const NlpProblem& p, const Eigen::VectorXd& x);

} // namespace nlp
} // namespace gicshield
