#pragma once

#include <Eigen/Core>

#include "gicshield/common.hpp"
#include "gicshield/gic.hpp"
#include "gicshield/network.hpp"
#include "gicshield/nlp.hpp"

namespace gicshield {

/// How the AC problem sees the effective GIC.
enum class CouplingMode {
  Fixed,            // i_eff pinned to a given vector (the F(z) evaluation path)
  Penalized,        // ADMM third block: -<mu, I> + (rho/2)||I_dc - I||^2
  Free,             // i_eff free in [0, I_max], no coupling terms
  Complementarity,  // theta given; |theta| recovered via slack pair rows
};

struct AcOpfCoupling {
  CouplingMode mode = CouplingMode::Free;
  Eigen::VectorXd i_eff_fixed;  // Fixed
  Eigen::VectorXd theta;        // Complementarity
  Eigen::VectorXd mu;           // Penalized
  Eigen::VectorXd i_dc;         // Penalized
  double rho = 0.0;             // Penalized
  Eigen::VectorXd i_scale;      // Penalized: consensus normalization (empty = ones)

  static AcOpfCoupling fixed(Eigen::VectorXd i_eff);
  static AcOpfCoupling penalized(Eigen::VectorXd mu, double rho, Eigen::VectorXd i_dc,
                                 Eigen::VectorXd i_scale = Eigen::VectorXd());
  static AcOpfCoupling free_coupling();
  static AcOpfCoupling complementarity(Eigen::VectorXd theta);
};

/// Variable layout of the rectangular AC-OPF problem. Block starts are
/// dense indices into the NLP variable vector.
struct AcOpfLayout {
  int n_bus = 0, n_gen = 0, n_branch = 0, n_tr = 0;
  bool has_slacks = false;  // s+/s- present (Complementarity mode)
  int vr0 = 0, vi0 = 0, fp0 = 0, fq0 = 0;
  int pfr0 = 0, pto0 = 0, qfr0 = 0, qto0 = 0;
  int lpp0 = 0, lpm0 = 0, lqp0 = 0, lqm0 = 0;
  int dq0 = 0, ieff0 = 0, sp0 = 0, sm0 = 0;
  int n_vars = 0;

  int vr(int i) const { return vr0 + i; }
  int vi(int i) const { return vi0 + i; }
  int fp(int k) const { return fp0 + k; }
  int fq(int k) const { return fq0 + k; }
  int p_fr(int e) const { return pfr0 + e; }
  int p_to(int e) const { return pto0 + e; }
  int q_fr(int e) const { return qfr0 + e; }
  int q_to(int e) const { return qto0 + e; }
  int lp_plus(int i) const { return lpp0 + i; }
  int lp_minus(int i) const { return lpm0 + i; }
  int lq_plus(int i) const { return lqp0 + i; }
  int lq_minus(int i) const { return lqm0 + i; }
  int dqloss(int i) const { return dq0 + i; }
  int i_eff(int t) const { return ieff0 + t; }
  int s_plus(int t) const { return sp0 + t; }
  int s_minus(int t) const { return sm0 + t; }
};

/// Built AC-OPF instance. Callbacks hold a pointer to the network, which
/// must outlive the model.
struct AcOpfModel {
  NlpProblem problem;
  AcOpfLayout layout;
};

struct EvaluationReport {
  double objective = 0.0;     // $: gen_cost + shed_penalty
  double gen_cost = 0.0;      // $
  double shed_penalty = 0.0;  // $
  double max_balance_residual = 0.0;  // pu
  SolveStatus solver_status = SolveStatus::IterationLimit;
  Eigen::VectorXd i_eff;  // amperes, fixed coupling used for this evaluation
  NlpSolution nlp;
};

struct EvalOptions {
  int budget = -1;  // -1: no budget check
  NlpOptions nlp;
  int restarts = 3;
  double restart_perturbation = 1e-2;
  bool complementarity_acopf = false;  // resolve |theta| inside the NLP
};

namespace acopf {

/// Assemble the rectangular AC-OPF NLP: generation/voltage boxes, thermal
/// and angle-tangent inequalities, flow and balance equalities, per-bus
/// GIC reactive-loss rows, and the coupling-mode specific terms.
AcOpfModel build_acopf(const AcNetwork& ac, const AcOpfCoupling& coupling);

/// Deterministic start: vR = 1, vI = 0 (clamped), generation at bound
/// midpoints, flows consistent with the flat voltages, sheds zero.
Eigen::VectorXd flat_start(const AcNetwork& ac, const AcOpfCoupling& coupling,
                           const AcOpfLayout& layout);

/// Gen cost, shed penalty, and balance residual extracted from a solution.
EvaluationReport summarize(const AcNetwork& ac, const AcOpfModel& model, const NlpSolution& sol);

/// Lagrangian gradient restricted to the i_eff block: the marginal cost
/// of effective GIC at a solved instance (meaningful in Fixed mode where
/// the variables are pinned). Used to seed the ADMM duals.
Eigen::VectorXd i_eff_reduced_costs(const AcOpfModel& model, const NlpSolution& sol);

/// F(z): GIC solve at z, effective GIC, fixed-coupling AC-OPF.
/// Deterministic given opts (fixed start, fixed restart sequence).
EvaluationReport evaluate_placement(const AcNetwork& ac, const DcNetwork& dc,
                                    const GmdScenario& scenario, const Placement& z,
                                    const EvalOptions& opts);

} // namespace acopf
} // namespace gicshield
