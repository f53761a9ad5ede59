#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gicshield/acopf.hpp"
#include "gicshield/common.hpp"
#include "gicshield/network.hpp"
#include "gicshield/nlp.hpp"

namespace gicshield {

/// Full iterate state of the three-block ADMM driver.
///
/// The effective-GIC consensus is carried on normalized currents
/// I / i_scale so that both consensus blocks live on comparable [0,1]-ish
/// scales regardless of the instance's ampere magnitudes; i_ac and i_dc
/// stay in amperes, mu is the dual of the normalized constraint.
struct AdmmState {
  int t = 0;
  Eigen::VectorXd z;     // relaxed placement copy, [0,1]^S
  Placement z_b;         // binary placement, sum <= V
  Eigen::VectorXd i_ac;  // AC copy of effective GIC (A), [0, I_max]
  Eigen::VectorXd i_dc;  // DC copy of effective GIC (A), [0, I_max]
  Eigen::VectorXd lambda;  // duals of z_b = z
  Eigen::VectorXd mu;      // duals of I_dc/s = I_ac/s
  Eigen::VectorXd i_scale; // per-transformer normalization (>= 1)
  double rho = 1e2;
  double p_res = kInf, d_res = kInf;
};

struct NrbOptions {
  bool enabled = true;
  double beta = 2.0;
  double tau = 10.0;
  bool rescale_duals = false;  // scale duals by rho ratio on every update
  // safeguard clamps: the bare rule can spiral rho towards zero on small
  // instances (the dual norm in the d-residual shrinks with rho itself)
  double rho_min = 1.0;
  double rho_max = 1e8;
};

enum class SubproblemFailurePolicy { Abort, ContinueBest };

struct AdmmOptions {
  double epsilon = 1e-4;
  int max_iters = 200;
  double rho0 = 1e2;
  NrbOptions nrb;
  SubproblemFailurePolicy on_failure = SubproblemFailurePolicy::ContinueBest;
  NlpOptions nlp;
  // optional initial overrides; empty vectors select the defaults
  // (lambda = mu = 0, z = (V/S) 1, i_ac = effective GIC with no blockers)
  Eigen::VectorXd lambda0, mu0, z0, i_ac0;
};

struct AdmmTraceRow {
  int t = 0;
  double p_res = 0.0, d_res = 0.0, rho = 0.0;
  double third_objective = 0.0;  // third-block subproblem objective at its solution
  Placement z_b;
};

struct AdmmResult {
  Placement z_b;
  bool converged = false;
  int iterations = 0;
  std::vector<AdmmTraceRow> trace;
  AdmmState state;
};

namespace admm {

/// Exact greedy minimizer of the first-block binary knapsack:
/// c_i = rho/2 + lambda_i - rho z_c_i, ascending order, take negative
/// coefficients until the budget is consumed. Ties by ascending index.
Placement knapsack_closed(double rho, const Eigen::VectorXd& lambda, const Eigen::VectorXd& z_c,
                          int budget);

/// Relaxed DC subproblem built over (vd, z, i_dc, s+, s-):
/// KCL with the bilinear a_m vd_m (1 - z_m) term, transformer theta split
/// rows, i_dc recovery rows, and the quadratic consensus objective.
struct DcSubproblem {
  NlpProblem problem;
  int vd0 = 0, z0 = 0, idc0 = 0, sp0 = 0, sm0 = 0;
  int n_node = 0, n_sub = 0, n_tr = 0;
};

DcSubproblem build_second_block(const AcNetwork& ac, const DcNetwork& dc,
                                const Eigen::VectorXd& xi, const AdmmState& state);

struct SecondBlockResult {
  Eigen::VectorXd z;     // [0,1]^S
  Eigen::VectorXd i_dc;  // [0, I_max]
  NlpSolution nlp;
  Eigen::VectorXd x;  // full subproblem iterate (warm start for next round)
};

SecondBlockResult second_block(const AcNetwork& ac, const DcNetwork& dc, const Eigen::VectorXd& xi,
                               const AdmmState& state, const NlpOptions& opts,
                               const Eigen::VectorXd* warm_x = nullptr,
                               const NlpWarmStart* warm_mult = nullptr);

struct ThirdBlockResult {
  Eigen::VectorXd i_ac;
  NlpSolution nlp;
  double objective = 0.0;  // subproblem objective (with consensus terms)
  EvaluationReport report;
  Eigen::VectorXd x;
};

ThirdBlockResult third_block(const AcNetwork& ac, const AdmmState& state, const NlpOptions& opts,
                             const Eigen::VectorXd* warm_x = nullptr,
                             const NlpWarmStart* warm_mult = nullptr);

/// lambda += rho (z_b - z); mu += rho (i_dc - i_ac); t += 1.
void dual_update(AdmmState& state);

/// Normalized primal/dual residuals with u = (z, i_ac), v = (z_b, i_dc),
/// w = (lambda, mu). Zero denominators: residual is 0 when its numerator
/// is 0, +inf otherwise.
std::pair<double, double> residuals(const AdmmState& state, const Eigen::VectorXd& u_prev);

/// Normalized residual balancing: p > beta d -> rho tau; p < beta d ->
/// rho / tau; boundary leaves rho unchanged.
double nrb_update(double rho, double p_res, double d_res, double beta, double tau);

AdmmResult run_admm(const AcNetwork& ac, const DcNetwork& dc, const GmdScenario& scenario,
                    int budget, const AdmmOptions& opts);

} // namespace admm
} // namespace gicshield
