#include "gicshield/admm.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "gicshield/errors.hpp"
#include "gicshield/gic.hpp"

namespace gicshield {
namespace admm {

using Eigen::VectorXd;

Placement knapsack_closed(double rho, const VectorXd& lambda, const VectorXd& z_c, int budget) {
  if (lambda.size() != z_c.size()) throw SolveError("knapsack_closed: dimension mismatch");
  if (budget < 0) throw SolveError("knapsack_closed: negative budget");
  const int s = static_cast<int>(lambda.size());
  VectorXd c(s);
  for (int i = 0; i < s; ++i) c[i] = 0.5 * rho + lambda[i] - rho * z_c[i];

  std::vector<int> order(static_cast<size_t>(s));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return c[a] < c[b]; });

  Placement z(static_cast<size_t>(s), 0);
  int left = budget;
  for (int j : order) {
    if (c[j] < 0.0 && left > 0) {
      z[static_cast<size_t>(j)] = 1;
      --left;
    }
  }
  return z;
}

DcSubproblem build_second_block(const AcNetwork& ac, const DcNetwork& dc, const VectorXd& xi,
                                const AdmmState& state) {
  DcSubproblem sub;
  sub.n_node = dc.node_count();
  sub.n_sub = dc.substation_count();
  sub.n_tr = ac.transformer_count();
  sub.vd0 = 0;
  sub.z0 = sub.n_node;
  sub.idc0 = sub.z0 + sub.n_sub;
  sub.sp0 = sub.idc0 + sub.n_tr;
  sub.sm0 = sub.sp0 + sub.n_tr;
  const int n = sub.sm0 + sub.n_tr;

  NlpProblem& p = sub.problem;
  p.n = n;
  p.lower = VectorXd::Constant(n, -kInf);
  p.upper = VectorXd::Constant(n, kInf);
  for (int s = 0; s < sub.n_sub; ++s) {
    p.lower[sub.z0 + s] = 0.0;
    p.upper[sub.z0 + s] = 1.0;
  }
  for (int t = 0; t < sub.n_tr; ++t) {
    p.lower[sub.idc0 + t] = 0.0;
    p.upper[sub.idc0 + t] = ac.transformer(t).i_eff_max;
    p.lower[sub.sp0 + t] = 0.0;
    p.lower[sub.sm0 + t] = 0.0;
  }

  // substation index per node (-1 when ungrounded)
  auto sub_of_node = std::make_shared<std::vector<int>>(static_cast<size_t>(sub.n_node), -1);
  for (int s = 0; s < sub.n_sub; ++s) {
    (*sub_of_node)[static_cast<size_t>(dc.substation_nodes[static_cast<size_t>(s)])] = s;
  }

  struct Ctx {
    const DcNetwork* dc;
    VectorXd xi;
    std::shared_ptr<std::vector<int>> sub_of_node;
    DcSubproblem lay;  // copies of the offsets only (problem unused)
    VectorXd lambda, mu, i_ac, z_b, i_scale;
    double rho;
  };
  auto ctx = std::make_shared<Ctx>();
  ctx->dc = &dc;
  ctx->xi = xi;
  ctx->sub_of_node = sub_of_node;
  ctx->i_scale = (state.i_scale.size() == sub.n_tr) ? state.i_scale
                                                    : VectorXd::Ones(sub.n_tr);
  ctx->lay.vd0 = sub.vd0;
  ctx->lay.z0 = sub.z0;
  ctx->lay.idc0 = sub.idc0;
  ctx->lay.sp0 = sub.sp0;
  ctx->lay.sm0 = sub.sm0;
  ctx->lay.n_node = sub.n_node;
  ctx->lay.n_sub = sub.n_sub;
  ctx->lay.n_tr = sub.n_tr;
  ctx->lambda = state.lambda;
  ctx->mu = state.mu;
  ctx->i_ac = state.i_ac;
  ctx->z_b = VectorXd(state.z_b.size());
  for (size_t i = 0; i < state.z_b.size(); ++i) {
    ctx->z_b[static_cast<int>(i)] = static_cast<double>(state.z_b[i]);
  }
  ctx->rho = state.rho;

  // consensus objective
  p.objective = [ctx](const VectorXd& x, VectorXd* gr) {
    const auto& lay = ctx->lay;
    double val = 0.0;
    for (int s = 0; s < lay.n_sub; ++s) {
      const double zs = x[lay.z0 + s];
      const double dz = ctx->z_b[s] - zs;
      val += -ctx->lambda[s] * zs + 0.5 * ctx->rho * dz * dz;
      if (gr) (*gr)[lay.z0 + s] += -ctx->lambda[s] - ctx->rho * dz;
    }
    for (int t = 0; t < lay.n_tr; ++t) {
      const double s = ctx->i_scale[t];
      const double idc = x[lay.idc0 + t];
      const double di = (idc - ctx->i_ac[t]) / s;
      val += ctx->mu[t] * idc / s + 0.5 * ctx->rho * di * di;
      if (gr) (*gr)[lay.idc0 + t] += (ctx->mu[t] + ctx->rho * di) / s;
    }
    return val;
  };

  // KCL with relaxed blockers, one row per node, scaled by the incident
  // conductance so tolerances behave uniformly across instances
  for (int m = 0; m < sub.n_node; ++m) {
    double scale = 1.0 + dc.nodes[static_cast<size_t>(m)].a_ground;
    for (const auto& e : dc.edges) {
      if (e.from_node == m || e.to_node == m) scale += e.gamma;
    }
    const double inv = 1.0 / scale;
    p.eq.push_back({"kcl[" + std::to_string(dc.nodes[static_cast<size_t>(m)].id) + "]",
                    [ctx, m, inv](const VectorXd& x, VectorXd* gr) {
      const auto& lay = ctx->lay;
      const DcNetwork& dc = *ctx->dc;
      double val = 0.0;
      for (int k = 0; k < dc.edge_count(); ++k) {
        const DcEdge& e = dc.edges[static_cast<size_t>(k)];
        if (e.to_node != m && e.from_node != m) continue;
        const double flow = e.gamma * (x[lay.vd0 + e.from_node] - x[lay.vd0 + e.to_node] + ctx->xi[k]);
        const double sgn = (e.to_node == m) ? 1.0 : -1.0;
        val += sgn * flow;
        if (gr) {
          (*gr)[lay.vd0 + e.from_node] += sgn * inv * e.gamma;
          (*gr)[lay.vd0 + e.to_node] -= sgn * inv * e.gamma;
        }
      }
      const double a = dc.nodes[static_cast<size_t>(m)].a_ground;
      if (a > 0.0) {
        const int s = (*ctx->sub_of_node)[static_cast<size_t>(m)];
        const double zs = x[lay.z0 + s];
        val -= a * x[lay.vd0 + m] * (1.0 - zs);
        if (gr) {
          (*gr)[lay.vd0 + m] -= inv * a * (1.0 - zs);
          (*gr)[lay.z0 + s] += inv * a * x[lay.vd0 + m];
        }
      }
      return val * inv;
    }});
  }

  // theta split and i_dc recovery per transformer
  for (int t = 0; t < sub.n_tr; ++t) {
    const TransformerSpec& spec = ac.transformer(t);
    // (edge index, coefficient) of each winding current in theta
    auto terms = std::make_shared<std::vector<std::pair<int, double>>>();
    const auto& wind = dc.transformer_winding_edges[static_cast<size_t>(t)];
    switch (spec.topology) {
      case TransformerTopology::GWyeGWye:
        terms->emplace_back(wind.at(WindingRole::High), 1.0);
        terms->emplace_back(wind.at(WindingRole::Low), spec.n_low / spec.n_high);
        break;
      case TransformerTopology::GWyeGWyeAuto: {
        const double den = spec.n_series + spec.n_common;
        terms->emplace_back(wind.at(WindingRole::Series), spec.n_series / den);
        terms->emplace_back(wind.at(WindingRole::Common), spec.n_common / den);
        break;
      }
      case TransformerTopology::GWyeDeltaGSU:
        terms->emplace_back(wind.at(WindingRole::High), 1.0);
        break;
    }
    const std::string id = std::to_string(
        ac.branches[static_cast<size_t>(ac.transformer_branches[static_cast<size_t>(t)])].id);
    p.eq.push_back({"theta_split[" + id + "]", [ctx, t, terms](const VectorXd& x, VectorXd* gr) {
      const auto& lay = ctx->lay;
      const DcNetwork& dc = *ctx->dc;
      double theta = 0.0;
      for (const auto& [k, coef] : *terms) {
        const DcEdge& e = dc.edges[static_cast<size_t>(k)];
        theta += coef * e.gamma * (x[lay.vd0 + e.from_node] - x[lay.vd0 + e.to_node] + ctx->xi[k]);
        if (gr) {
          (*gr)[lay.vd0 + e.from_node] -= coef * e.gamma;
          (*gr)[lay.vd0 + e.to_node] += coef * e.gamma;
        }
      }
      if (gr) {
        (*gr)[lay.sp0 + t] += 1.0;
        (*gr)[lay.sm0 + t] -= 1.0;
      }
      return x[lay.sp0 + t] - x[lay.sm0 + t] - theta;
    }});
    p.eq.push_back({"i_dc_recover[" + id + "]", [ctx, t](const VectorXd& x, VectorXd* gr) {
      const auto& lay = ctx->lay;
      if (gr) {
        (*gr)[lay.idc0 + t] = 1.0;
        (*gr)[lay.sp0 + t] = -1.0;
        (*gr)[lay.sm0 + t] = -1.0;
      }
      return x[lay.idc0 + t] - x[lay.sp0 + t] - x[lay.sm0 + t];
    }});
    p.complementarity_pairs.emplace_back(sub.sp0 + t, sub.sm0 + t);
  }

  return sub;
}

namespace {

// Deterministic second-block start: GIC solve at the binary placement
// (falls back to zero voltages when every grounding is blocked).
VectorXd second_block_start(const AcNetwork& ac, const DcNetwork& dc, const VectorXd& xi,
                            const AdmmState& state, const DcSubproblem& sub) {
  VectorXd x = VectorXd::Zero(sub.problem.n);
  for (int s = 0; s < sub.n_sub; ++s) {
    x[sub.z0 + s] = static_cast<double>(state.z_b[static_cast<size_t>(s)]);
  }
  try {
    const GicSolution g = gic::solve_gic(dc, xi, state.z_b);
    for (int m = 0; m < sub.n_node; ++m) x[sub.vd0 + m] = g.vd[m];
    const VectorXd theta = gic::all_transformer_theta(ac, dc, g);
    for (int t = 0; t < sub.n_tr; ++t) {
      x[sub.sp0 + t] = std::max(theta[t], 0.0);
      x[sub.sm0 + t] = std::max(-theta[t], 0.0);
      x[sub.idc0 + t] = std::min(std::abs(theta[t]), ac.transformer(t).i_eff_max);
    }
  } catch (const SolveError&) {
    // all grounding blocked: flat start
  }
  return x;
}

} // namespace

SecondBlockResult second_block(const AcNetwork& ac, const DcNetwork& dc, const VectorXd& xi,
                               const AdmmState& state, const NlpOptions& opts,
                               const VectorXd* warm_x, const NlpWarmStart* warm_mult) {
  DcSubproblem sub = build_second_block(ac, dc, xi, state);
  VectorXd x0 = (warm_x && warm_x->size() == sub.problem.n)
                    ? *warm_x
                    : second_block_start(ac, dc, xi, state, sub);
  SecondBlockResult out;
  out.nlp = nlp::solve(sub.problem, x0, opts, warm_mult);
  out.x = out.nlp.x;
  out.z = out.nlp.x.segment(sub.z0, sub.n_sub);
  out.i_dc = out.nlp.x.segment(sub.idc0, sub.n_tr);
  return out;
}

ThirdBlockResult third_block(const AcNetwork& ac, const AdmmState& state, const NlpOptions& opts,
                             const VectorXd* warm_x, const NlpWarmStart* warm_mult) {
  const int n_tr = static_cast<int>(state.i_dc.size());
  const VectorXd scale =
      (state.i_scale.size() == n_tr) ? state.i_scale : VectorXd::Ones(n_tr);
  const AcOpfCoupling coupling =
      AcOpfCoupling::penalized(state.mu, state.rho, state.i_dc, scale);
  const AcOpfModel model = acopf::build_acopf(ac, coupling);
  VectorXd x0 = (warm_x && warm_x->size() == model.problem.n)
                    ? *warm_x
                    : acopf::flat_start(ac, coupling, model.layout);
  ThirdBlockResult out;
  out.nlp = nlp::solve(model.problem, x0, opts, warm_mult);
  out.x = out.nlp.x;
  out.i_ac.resize(model.layout.n_tr);
  for (int t = 0; t < model.layout.n_tr; ++t) out.i_ac[t] = out.nlp.x[model.layout.i_eff(t)];
  out.report = acopf::summarize(ac, model, out.nlp);
  // subproblem objective: f(x) - <mu, I_ac/s> + (rho/2)||(I_dc - I_ac)/s||^2
  const VectorXd gap = (state.i_dc - out.i_ac).cwiseQuotient(scale);
  out.objective = out.report.objective - state.mu.dot(out.i_ac.cwiseQuotient(scale)) +
                  0.5 * state.rho * gap.squaredNorm();
  return out;
}

void dual_update(AdmmState& state) {
  for (int s = 0; s < state.z.size(); ++s) {
    state.lambda[s] += state.rho * (static_cast<double>(state.z_b[static_cast<size_t>(s)]) - state.z[s]);
  }
  const int n_tr = static_cast<int>(state.i_dc.size());
  const VectorXd scale =
      (state.i_scale.size() == n_tr) ? state.i_scale : VectorXd::Ones(n_tr);
  state.mu.noalias() += state.rho * (state.i_dc - state.i_ac).cwiseQuotient(scale);
  state.t += 1;
}

std::pair<double, double> residuals(const AdmmState& state, const VectorXd& u_prev) {
  const int s = static_cast<int>(state.z.size());
  const int t = static_cast<int>(state.i_ac.size());
  const VectorXd scale = (state.i_scale.size() == t) ? state.i_scale : VectorXd::Ones(t);
  VectorXd u(s + t), v(s + t), w(s + t);
  u << state.z, state.i_ac.cwiseQuotient(scale);
  for (int i = 0; i < s; ++i) v[i] = static_cast<double>(state.z_b[static_cast<size_t>(i)]);
  v.segment(s, t) = state.i_dc.cwiseQuotient(scale);
  w << state.lambda, state.mu;

  const double p_num = (v - u).norm();
  const double p_den = std::max(u.norm(), v.norm());
  const double p = (p_den > 0.0) ? p_num / p_den : (p_num == 0.0 ? 0.0 : kInf);

  const double d_num = state.rho * (u - u_prev).norm();
  const double d_den = w.norm();
  const double d = (d_den > 0.0) ? d_num / d_den : (d_num == 0.0 ? 0.0 : kInf);
  return {p, d};
}

double nrb_update(double rho, double p_res, double d_res, double beta, double tau) {
  const double threshold = beta * d_res;
  if (p_res > threshold) return rho * tau;
  if (p_res < threshold) return rho / tau;
  return rho;
}

AdmmResult run_admm(const AcNetwork& ac, const DcNetwork& dc, const GmdScenario& scenario,
                    int budget, const AdmmOptions& opts) {
  if (budget < 0) throw ValidationError("run_admm: budget must be nonnegative");
  const int S = ac.substation_count();
  const int T = ac.transformer_count();
  const VectorXd xi = materialize_xi(dc, scenario);

  AdmmState st;
  st.rho = opts.rho0;
  st.lambda = (opts.lambda0.size() == S) ? opts.lambda0 : VectorXd::Zero(S);
  st.z = (opts.z0.size() == S)
             ? opts.z0
             : VectorXd::Constant(S, S > 0 ? static_cast<double>(budget) / S : 0.0);
  st.z_b.assign(static_cast<size_t>(S), 0);

  AdmmResult result;
  VectorXd warm2, warm3;
  NlpWarmStart mult2, mult3;
  bool have2 = false, have3 = false;

  // no-blocker baseline: fixes the consensus normalization, starts i_ac
  // at the physical effective GIC, and seeds mu with its marginal AC cost
  // so the DC block sees a meaningful quality signal from the first
  // iteration
  {
    const GicSolution g0 = gic::solve_gic(dc, xi, Placement(static_cast<size_t>(S), 0));
    const VectorXd theta0 = gic::all_transformer_theta(ac, dc, g0);
    VectorXd i0(T);
    st.i_scale.resize(T);
    for (int t = 0; t < T; ++t) {
      i0[t] = std::min(std::abs(theta0[t]), ac.transformer(t).i_eff_max);
      st.i_scale[t] = std::max(1.0, std::abs(theta0[t]));
    }
    const bool need_iac = opts.i_ac0.size() != T;
    const bool need_mu = opts.mu0.size() != T;
    if (need_iac || need_mu) {
      const AcOpfCoupling coupling = AcOpfCoupling::fixed(i0);
      const AcOpfModel model = acopf::build_acopf(ac, coupling);
      const NlpSolution sol =
          nlp::solve(model.problem, acopf::flat_start(ac, coupling, model.layout), opts.nlp);
      st.i_ac = need_iac ? i0 : opts.i_ac0;
      st.mu = need_mu ? VectorXd(acopf::i_eff_reduced_costs(model, sol).cwiseProduct(st.i_scale))
                      : opts.mu0;
      // the baseline solution also warm-starts the third block
      warm3 = sol.x;
      mult3 = NlpWarmStart{sol.eq_multipliers, sol.ineq_multipliers, sol.comp_multipliers,
                           std::min(sol.penalty, 1e8)};
      have3 = true;
    } else {
      st.i_ac = opts.i_ac0;
      st.mu = opts.mu0;
    }
  }
  st.i_dc = st.i_ac;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    st.z_b = knapsack_closed(st.rho, st.lambda, st.z, budget);

    VectorXd u_prev(S + T);
    u_prev << st.z, st.i_ac.cwiseQuotient(st.i_scale);

    double third_obj = 0.0;
    try {
      SecondBlockResult r2 = second_block(ac, dc, xi, st, opts.nlp, have2 ? &warm2 : nullptr,
                                          have2 ? &mult2 : nullptr);
      st.z = r2.z;
      st.i_dc = r2.i_dc;
      warm2 = r2.x;
      mult2 = NlpWarmStart{r2.nlp.eq_multipliers, r2.nlp.ineq_multipliers, r2.nlp.comp_multipliers,
                           std::min(r2.nlp.penalty, 1e8)};
      have2 = true;

      ThirdBlockResult r3 = third_block(ac, st, opts.nlp, have3 ? &warm3 : nullptr,
                                        have3 ? &mult3 : nullptr);
      st.i_ac = r3.i_ac;
      warm3 = r3.x;
      mult3 = NlpWarmStart{r3.nlp.eq_multipliers, r3.nlp.ineq_multipliers, r3.nlp.comp_multipliers,
                           std::min(r3.nlp.penalty, 1e8)};
      have3 = true;
      third_obj = r3.objective;
    } catch (const SolveError&) {
      if (opts.on_failure == SubproblemFailurePolicy::Abort) throw;
      // continue with the previous block iterates
    }

    dual_update(st);
    const auto [p, d] = residuals(st, u_prev);
    st.p_res = p;
    st.d_res = d;

    result.trace.push_back({st.t, p, d, st.rho, third_obj, st.z_b});
    result.iterations = st.t;

    if (std::max(p, d) < opts.epsilon) {
      result.converged = true;
      break;
    }

    if (opts.nrb.enabled) {
      const double rho_new = std::clamp(nrb_update(st.rho, p, d, opts.nrb.beta, opts.nrb.tau),
                                        opts.nrb.rho_min, opts.nrb.rho_max);
      if (rho_new != st.rho && opts.nrb.rescale_duals) {
        const double ratio = rho_new / st.rho;
        st.lambda *= ratio;
        st.mu *= ratio;
      }
      st.rho = rho_new;
    }
  }

  result.z_b = st.z_b;
  result.state = st;
  return result;
}

} // namespace admm
} // namespace gicshield
