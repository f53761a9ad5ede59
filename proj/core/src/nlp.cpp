#include "gicshield/nlp.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "gicshield/errors.hpp"

namespace gicshield {
namespace nlp {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd clamp_to_box(const VectorXd& x, const VectorXd& lo, const VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) {
    throw SolveError("non-finite value in " + what);
  }
}

// Augmented-Lagrangian state for fixed multipliers and penalty.
// Equalities use the classic lambda*c + (rho/2)c^2 term; inequalities and
// complementarity rows use the Powell-Hestenes-Rockafellar form
// ((max(0, nu + rho g))^2 - nu^2) / (2 rho).
//
// The objective enters scaled by 1/obj_scale so that tolerances stay
// meaningful when cost coefficients span orders of magnitude (the shed
// penalty weight can be 1e5 and more). Constraints are never scaled;
// multipliers are reported back in unscaled units.
struct AugLag {
  const NlpProblem& p;
  VectorXd lambda;  // equality multipliers
  VectorXd nu;      // inequality multipliers
  VectorXd nu_c;    // complementarity multipliers
  double rho = 10.0;
  double comp_eps = 0.0;
  double obj_scale = 1.0;

  mutable VectorXd gbuf;
  mutable VectorXd c_eq, g_ineq, g_comp;  // last constraint values

  // Gauss-Newton workspace, filled when eval() is called with curvature.
  // Row k of jac holds the gradient of constraint k; weight[k] is the
  // second-order weight (rho for active rows, 0 otherwise).
  mutable MatrixXd jac;
  mutable VectorXd weight;
  mutable std::vector<std::pair<int, double>> comp_cross;  // (pair index, activation)

  explicit AugLag(const NlpProblem& prob) : p(prob) {
    lambda = VectorXd::Zero(static_cast<int>(p.eq.size()));
    nu = VectorXd::Zero(static_cast<int>(p.ineq.size()));
    nu_c = VectorXd::Zero(static_cast<int>(p.complementarity_pairs.size()));
    gbuf.resize(p.n);
    c_eq.resize(lambda.size());
    g_ineq.resize(nu.size());
    g_comp.resize(nu_c.size());
  }

  int rows() const { return static_cast<int>(p.eq.size() + p.ineq.size() + p.complementarity_pairs.size()); }

  double comp_value(const VectorXd& x, int k) const {
    const auto& pr = p.complementarity_pairs[static_cast<size_t>(k)];
    return x[pr.first] * x[pr.second] - comp_eps;
  }

  // Value of the AL at x; fills the gradient when grad != nullptr and the
  // Gauss-Newton Jacobian/weights when curvature is requested.
  double eval(const VectorXd& x, VectorXd* grad, bool curvature = false) const {
    if (curvature && jac.rows() != rows()) {
      jac.resize(rows(), p.n);
      weight.resize(rows());
    }
    if (curvature) comp_cross.clear();
    if (grad) grad->setZero();

    if (grad) gbuf.setZero();
    double val = p.objective(x, grad ? &gbuf : nullptr) / obj_scale;
    require_finite(val, "objective");
    if (grad) *grad = gbuf / obj_scale;

    int row = 0;
    for (int k = 0; k < c_eq.size(); ++k, ++row) {
      if (grad) gbuf.setZero();
      const double c = p.eq[static_cast<size_t>(k)].fn(x, grad ? &gbuf : nullptr);
      require_finite(c, "constraint '" + p.eq[static_cast<size_t>(k)].name + "'");
      c_eq[k] = c;
      val += lambda[k] * c + 0.5 * rho * c * c;
      if (grad) grad->noalias() += (lambda[k] + rho * c) * gbuf;
      if (curvature) {
        jac.row(row) = gbuf.transpose();
        weight[row] = rho;
      }
    }
    for (int k = 0; k < g_ineq.size(); ++k, ++row) {
      if (grad) gbuf.setZero();
      const double g = p.ineq[static_cast<size_t>(k)].fn(x, grad ? &gbuf : nullptr);
      require_finite(g, "constraint '" + p.ineq[static_cast<size_t>(k)].name + "'");
      g_ineq[k] = g;
      const double a = nu[k] + rho * g;
      if (a > 0.0) {
        val += (a * a - nu[k] * nu[k]) / (2.0 * rho);
        if (grad) grad->noalias() += a * gbuf;
        if (curvature) {
          jac.row(row) = gbuf.transpose();
          weight[row] = rho;
        }
      } else {
        val -= nu[k] * nu[k] / (2.0 * rho);
        if (curvature) weight[row] = 0.0;
      }
    }
    for (int k = 0; k < g_comp.size(); ++k, ++row) {
      const double g = comp_value(x, k);
      g_comp[k] = g;
      const double a = nu_c[k] + rho * g;
      const auto& pr = p.complementarity_pairs[static_cast<size_t>(k)];
      if (a > 0.0) {
        val += (a * a - nu_c[k] * nu_c[k]) / (2.0 * rho);
        if (grad) {
          (*grad)[pr.first] += a * x[pr.second];
          (*grad)[pr.second] += a * x[pr.first];
        }
        if (curvature) {
          jac.row(row).setZero();
          jac(row, pr.first) = x[pr.second];
          jac(row, pr.second) = x[pr.first];
          weight[row] = rho;
          comp_cross.emplace_back(k, a);
        }
      } else {
        val -= nu_c[k] * nu_c[k] / (2.0 * rho);
        if (curvature) weight[row] = 0.0;
      }
    }
    return val;
  }

  void update_multipliers() {
    lambda.noalias() += rho * c_eq;
    for (int k = 0; k < nu.size(); ++k) nu[k] = std::max(0.0, nu[k] + rho * g_ineq[k]);
    for (int k = 0; k < nu_c.size(); ++k) nu_c[k] = std::max(0.0, nu_c[k] + rho * g_comp[k]);
  }

  // Violation w.r.t. the *current* relaxation (drives multiplier updates).
  double violation() const {
    double r = 0.0;
    for (int k = 0; k < c_eq.size(); ++k) r = std::max(r, std::abs(c_eq[k]));
    for (int k = 0; k < g_ineq.size(); ++k) r = std::max(r, g_ineq[k]);
    for (int k = 0; k < g_comp.size(); ++k) r = std::max(r, g_comp[k]);
    return r;
  }

  // Violation w.r.t. the fully tightened complementarity target.
  double violation_final(const VectorXd& x, double comp_eps_final) const {
    double r = 0.0;
    for (int k = 0; k < c_eq.size(); ++k) r = std::max(r, std::abs(c_eq[k]));
    for (int k = 0; k < g_ineq.size(); ++k) r = std::max(r, g_ineq[k]);
    for (size_t k = 0; k < p.complementarity_pairs.size(); ++k) {
      const auto& pr = p.complementarity_pairs[k];
      r = std::max(r, x[pr.first] * x[pr.second] - comp_eps_final);
    }
    return r;
  }

  // Central-difference diagonal curvature of the (scaled) objective,
  // which is smooth everywhere; constraint curvature beyond Gauss-Newton
  // is left to the BFGS updates of the inner loop.
  VectorXd objective_diagonal(const VectorXd& x) const {
    VectorXd diag = VectorXd::Zero(p.n);
    VectorXd gp(p.n), gm(p.n);
    VectorXd xt = x;
    for (int i = 0; i < p.n; ++i) {
      const double h = 1e-5 * (1.0 + std::abs(x[i]));
      xt[i] = x[i] + h;
      gp.setZero();
      p.objective(xt, &gp);
      xt[i] = x[i] - h;
      gm.setZero();
      p.objective(xt, &gm);
      xt[i] = x[i];
      diag[i] = std::max(0.0, (gp[i] - gm[i]) / (2.0 * h) / obj_scale);
    }
    return diag;
  }
};

struct InnerResult {
  double f = 0.0;
  double pg_inf = kInf;
  int iterations = 0;
  // the remaining projected gradient lies along penalty-stiff directions
  // where the attainable improvement is below double-precision resolution
  // of the AL value: stationary to working precision
  bool at_numerical_floor = false;
};

// Projected quasi-Newton on the box. The dense Hessian model starts from
// the Gauss-Newton matrix J' diag(w) J (plus the objective diagonal and
// the exact cross terms of active complementarity rows) and is improved
// by damped BFGS updates, which pick up the multiplier-weighted
// constraint curvature the Gauss-Newton part misses. Steps solve the
// Levenberg-damped model on the free variables and are searched along
// the projection arc.
InnerResult minimize_box(const AugLag& al, VectorXd& x, const VectorXd& lo, const VectorXd& hi,
                         double tol, int max_iters) {
  InnerResult out;
  const int n = static_cast<int>(x.size());

  x = clamp_to_box(x, lo, hi);
  VectorXd g(n), gn(n);
  double f = al.eval(x, &g, true);

  MatrixXd B(n, n);
  // jac/weight must be current at the refresh point
  auto refresh_model = [&](const VectorXd& at) {
    B.setZero();
    for (int r = 0; r < al.rows(); ++r) {
      if (al.weight[r] <= 0.0) continue;
      B.selfadjointView<Eigen::Lower>().rankUpdate(al.jac.row(r).transpose(), al.weight[r]);
    }
    B = B.selfadjointView<Eigen::Lower>();
    for (const auto& [k, a] : al.comp_cross) {
      const auto& pr = al.p.complementarity_pairs[static_cast<size_t>(k)];
      B(pr.first, pr.second) += a;
      B(pr.second, pr.first) += a;
    }
    B.diagonal() += al.objective_diagonal(at);
  };
  refresh_model(x);
  int steps_since_refresh = 0;

  double lm = 1e-8;
  int stall_count = 0;
  std::vector<int> free_idx;
  free_idx.reserve(static_cast<size_t>(n));

  for (int it = 0; it < max_iters; ++it) {
    const VectorXd pg = x - clamp_to_box(x - g, lo, hi);
    out.pg_inf = pg.lpNorm<Eigen::Infinity>();
    if (out.pg_inf <= tol) break;

    // active set: at a bound with the gradient pushing outward
    free_idx.clear();
    for (int i = 0; i < n; ++i) {
      const double el = 1e-10 * (1.0 + std::abs(lo[i]));
      const double eu = 1e-10 * (1.0 + std::abs(hi[i]));
      const bool at_lo = x[i] <= lo[i] + el;
      const bool at_hi = x[i] >= hi[i] - eu;
      if ((at_lo && at_hi) || (at_lo && g[i] > 0.0) || (at_hi && g[i] < 0.0)) continue;
      free_idx.push_back(i);
    }

    bool accepted = false;
    bool refreshed_this_iter = false;
    if (!free_idx.empty()) {
      const int nf = static_cast<int>(free_idx.size());
      VectorXd gf(nf);
      for (int a = 0; a < nf; ++a) gf[a] = g[free_idx[static_cast<size_t>(a)]];

      for (int attempt = 0; attempt < 16 && !accepted; ++attempt) {
        MatrixXd Hd(nf, nf);
        for (int a = 0; a < nf; ++a) {
          for (int b = 0; b < nf; ++b) {
            Hd(a, b) = B(free_idx[static_cast<size_t>(a)], free_idx[static_cast<size_t>(b)]);
          }
        }
        const double shift = std::max(lm * Hd.diagonal().cwiseAbs().maxCoeff(), 1e-12);
        Hd.diagonal().array() += shift;
        Eigen::LDLT<MatrixXd> ldlt(Hd);
        VectorXd df = ldlt.solve(-gf);
        if (ldlt.info() != Eigen::Success || !df.allFinite()) {
          lm = std::max(lm * 10.0, 1e-8);
          continue;
        }
        VectorXd d = VectorXd::Zero(n);
        for (int a = 0; a < nf; ++a) d[free_idx[static_cast<size_t>(a)]] = df[a];

        // projected backtracking Armijo
        double alpha = 1.0;
        for (int ls = 0; ls < 40; ++ls) {
          const VectorXd xn = clamp_to_box(x + alpha * d, lo, hi);
          const VectorXd step = xn - x;
          const double step_norm = step.lpNorm<Eigen::Infinity>();
          if (step_norm == 0.0) break;
          const double slope = g.dot(step);
          const bool with_grad = (ls == 0);
          const double fn = al.eval(xn, with_grad ? &gn : nullptr, with_grad);
          if (fn <= f + 1e-4 * std::min(slope, 0.0) && (slope <= 0.0 || fn < f)) {
            if (!with_grad) al.eval(xn, &gn, true);
            stall_count = (step_norm <= 1e-14 * (1.0 + x.lpNorm<Eigen::Infinity>()))
                              ? stall_count + 1
                              : 0;
            // damped BFGS update (Powell) keeps the model positive definite
            {
              const VectorXd s = step;
              VectorXd y = gn - g;
              const VectorXd Bs = B * s;
              const double sBs = s.dot(Bs);
              double sy = s.dot(y);
              if (sBs > 0.0 && sy < 0.2 * sBs) {
                const double theta = 0.8 * sBs / (sBs - sy);
                y = theta * y + (1.0 - theta) * Bs;
                sy = s.dot(y);
              }
              if (sBs > 1e-16 && sy > 1e-16) {
                B.noalias() -= (Bs * Bs.transpose()) / sBs;
                B.noalias() += (y * y.transpose()) / sy;
              }
            }
            x = xn;
            f = fn;
            g.swap(gn);
            accepted = true;
            ++steps_since_refresh;
            lm = (ls == 0) ? std::max(1e-14, lm / 3.0) : lm * 2.0;
            break;
          }
          alpha *= 0.5;
        }
        if (!accepted) {
          if (std::abs(gf.dot(df)) <= 1e3 * 2.2e-16 * (1.0 + std::abs(f))) {
            out.at_numerical_floor = true;
            break;
          }
          // re-anchor the model once, then escalate damping
          if (!refreshed_this_iter) {
            refresh_model(x);
            steps_since_refresh = 0;
            refreshed_this_iter = true;
          } else {
            lm = std::max(lm * 10.0, 1e-8);
          }
        }
      }
    }
    ++out.iterations;
    if (accepted && steps_since_refresh >= 50) {
      refresh_model(x);
      steps_since_refresh = 0;
    }
    if (stall_count >= 3) out.at_numerical_floor = true;
    if (!accepted || stall_count >= 3) break;  // flat to working precision
  }
  const VectorXd pg = x - clamp_to_box(x - g, lo, hi);
  out.pg_inf = pg.lpNorm<Eigen::Infinity>();
  out.f = f;
  return out;
}

} // namespace

NlpSolution solve(const NlpProblem& p, const Eigen::VectorXd& x0, const NlpOptions& opts,
                  const NlpWarmStart* warm) {
  if (p.n <= 0 || !p.objective) throw SolveError("nlp::solve: empty problem");
  if (x0.size() != p.n) throw SolveError("nlp::solve: x0 dimension mismatch");

  AugLag al(p);
  al.rho = opts.penalty0;

  // objective scale from the start point; keeps absolute tolerances
  // meaningful across cost magnitudes
  {
    VectorXd g0 = VectorXd::Zero(p.n);
    const double f0 = p.objective(x0, &g0);
    require_finite(f0, "objective");
    al.obj_scale = std::max(1.0, g0.lpNorm<Eigen::Infinity>() / 100.0);
  }

  if (warm) {
    if (warm->eq_multipliers.size() == al.lambda.size()) al.lambda = warm->eq_multipliers / al.obj_scale;
    if (warm->ineq_multipliers.size() == al.nu.size()) al.nu = warm->ineq_multipliers / al.obj_scale;
    if (warm->comp_multipliers.size() == al.nu_c.size()) al.nu_c = warm->comp_multipliers / al.obj_scale;
    if (warm->penalty > 0.0) al.rho = warm->penalty;
  }
  const bool has_comp = !p.complementarity_pairs.empty();
  al.comp_eps = has_comp ? opts.comp_eps0 : 0.0;

  const bool unconstrained = p.eq.empty() && p.ineq.empty() && !has_comp;
  double omega = unconstrained ? opts.tol : std::max(opts.tol, 1e-2);

  NlpSolution sol;
  sol.x = x0.cwiseMax(p.lower).cwiseMin(p.upper);

  double res_prev = kInf;
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    const InnerResult inner = minimize_box(al, sol.x, p.lower, p.upper, omega, opts.max_inner);
    sol.inner_iterations += inner.iterations;
    sol.outer_iterations = outer + 1;
    sol.projected_gradient = inner.pg_inf;

    al.eval(sol.x, nullptr);  // refresh constraint values at the iterate
    const double res = al.violation();
    sol.max_residual = al.violation_final(sol.x, has_comp ? opts.comp_eps_final : 0.0);
    if (opts.on_outer) {
      opts.on_outer(outer, inner.iterations, inner.f, sol.max_residual, inner.pg_inf, al.rho);
    }

    const bool comp_tight = !has_comp || al.comp_eps <= opts.comp_eps_final * (1.0 + 1e-12);
    const bool stationary = inner.pg_inf <= opts.tol || inner.at_numerical_floor;
    if (sol.max_residual <= opts.tol && stationary && comp_tight) {
      sol.status = SolveStatus::OptimalTolerance;
      break;
    }

    if (res <= std::max(0.25 * res_prev, opts.tol)) {
      // at the numerical floor further updates only add noise
      if (res > 0.01 * opts.tol) al.update_multipliers();
      res_prev = std::max(res, opts.tol);
    } else {
      al.rho = std::min(al.rho * opts.penalty_growth, opts.penalty_max);
    }
    if (has_comp) al.comp_eps = std::max(opts.comp_eps_final, al.comp_eps * 0.1);
    omega = std::max(opts.tol, omega * 0.2);
  }

  if (sol.status != SolveStatus::OptimalTolerance) {
    const bool penalty_saturated = al.rho >= opts.penalty_max * 0.999;
    sol.status = (sol.max_residual > opts.tol && penalty_saturated) ? SolveStatus::Infeasible
                                                                    : SolveStatus::IterationLimit;
  }
  sol.eq_multipliers = al.lambda * al.obj_scale;
  sol.ineq_multipliers = al.nu * al.obj_scale;
  sol.comp_multipliers = al.nu_c * al.obj_scale;
  sol.penalty = al.rho;
  return sol;
}

double check_gradients(const NlpProblem& p, const Eigen::VectorXd& x) {
  using Eigen::VectorXd;
  VectorXd an(p.n);

  auto discrepancy = [&](const NlpProblem::Fn& fn) {
    an.setZero();
    fn(x, &an);
    const double scale = std::max(1.0, an.lpNorm<Eigen::Infinity>());
    double worst = 0.0;
    VectorXd xp = x, xm = x;
    for (int i = 0; i < p.n; ++i) {
      const double h = 1e-6 * (1.0 + std::abs(x[i]));
      xp[i] = x[i] + h;
      xm[i] = x[i] - h;
      const double fd = (fn(xp, nullptr) - fn(xm, nullptr)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - an[i]) / scale);
      xp[i] = x[i];
      xm[i] = x[i];
    }
    return worst;
  };

  double worst = discrepancy(p.objective);
  for (const auto& c : p.eq) worst = std::max(worst, discrepancy(c.fn));
  for (const auto& c : p.ineq) worst = std::max(worst, discrepancy(c.fn));
  return worst;
}

} // namespace nlp
} // namespace gicshield
