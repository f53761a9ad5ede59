#include "gicshield/acopf.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "gicshield/errors.hpp"

namespace gicshield {

AcOpfCoupling AcOpfCoupling::fixed(Eigen::VectorXd i_eff) {
  AcOpfCoupling c;
  c.mode = CouplingMode::Fixed;
  c.i_eff_fixed = std::move(i_eff);
  return c;
}

AcOpfCoupling AcOpfCoupling::penalized(Eigen::VectorXd mu, double rho, Eigen::VectorXd i_dc,
                                       Eigen::VectorXd i_scale) {
  AcOpfCoupling c;
  c.mode = CouplingMode::Penalized;
  c.mu = std::move(mu);
  c.rho = rho;
  c.i_dc = std::move(i_dc);
  c.i_scale = std::move(i_scale);
  return c;
}

AcOpfCoupling AcOpfCoupling::free_coupling() {
  AcOpfCoupling c;
  c.mode = CouplingMode::Free;
  return c;
}

AcOpfCoupling AcOpfCoupling::complementarity(Eigen::VectorXd theta) {
  AcOpfCoupling c;
  c.mode = CouplingMode::Complementarity;
  c.theta = std::move(theta);
  return c;
}

namespace acopf {

namespace {

using Eigen::VectorXd;

// Keeps sqrt(w) differentiable at pathological trial points; never active
// when voltage boxes exclude the origin.
constexpr double kWFloor = 1e-12;

struct BusIncidence {
  std::vector<std::pair<int, int>> flows;  // (branch, side) side 0 = from, 1 = to
  std::vector<int> gens;
  std::vector<int> transformers;  // transformer order index, attributed to high side
};

struct ModelData {
  const AcNetwork* ac = nullptr;
  AcOpfCoupling coupling;
  AcOpfLayout L;
  std::vector<BusIncidence> bus_inc;
};

inline double w_of(const VectorXd& x, const AcOpfLayout& L, int i) {
  const double vr = x[L.vr(i)];
  const double vi = x[L.vi(i)];
  return vr * vr + vi * vi;
}

AcOpfLayout make_layout(const AcNetwork& ac, CouplingMode mode) {
  AcOpfLayout L;
  L.n_bus = ac.bus_count();
  L.n_gen = ac.generator_count();
  L.n_branch = ac.branch_count();
  L.n_tr = ac.transformer_count();
  L.has_slacks = (mode == CouplingMode::Complementarity);
  int at = 0;
  L.vr0 = at; at += L.n_bus;
  L.vi0 = at; at += L.n_bus;
  L.fp0 = at; at += L.n_gen;
  L.fq0 = at; at += L.n_gen;
  L.pfr0 = at; at += L.n_branch;
  L.pto0 = at; at += L.n_branch;
  L.qfr0 = at; at += L.n_branch;
  L.qto0 = at; at += L.n_branch;
  L.lpp0 = at; at += L.n_bus;
  L.lpm0 = at; at += L.n_bus;
  L.lqp0 = at; at += L.n_bus;
  L.lqm0 = at; at += L.n_bus;
  L.dq0 = at; at += L.n_bus;
  L.ieff0 = at; at += L.n_tr;
  if (L.has_slacks) {
    L.sp0 = at; at += L.n_tr;
    L.sm0 = at; at += L.n_tr;
  }
  L.n_vars = at;
  return L;
}

} // namespace

AcOpfModel build_acopf(const AcNetwork& ac, const AcOpfCoupling& coupling) {
  const int n_tr = ac.transformer_count();
  switch (coupling.mode) {
    case CouplingMode::Fixed:
      if (coupling.i_eff_fixed.size() != n_tr) {
        throw ValidationError("build_acopf: fixed coupling needs one i_eff per transformer");
      }
      break;
    case CouplingMode::Penalized:
      if (coupling.mu.size() != n_tr || coupling.i_dc.size() != n_tr || coupling.rho < 0.0) {
        throw ValidationError("build_acopf: penalized coupling needs mu, i_dc, rho >= 0");
      }
      if (coupling.i_scale.size() != 0 && coupling.i_scale.size() != n_tr) {
        throw ValidationError("build_acopf: i_scale must be empty or one entry per transformer");
      }
      break;
    case CouplingMode::Complementarity:
      if (coupling.theta.size() != n_tr) {
        throw ValidationError("build_acopf: complementarity coupling needs one theta per transformer");
      }
      break;
    case CouplingMode::Free:
      break;
  }

  auto data = std::make_shared<ModelData>();
  data->ac = &ac;
  data->coupling = coupling;
  data->L = make_layout(ac, coupling.mode);
  const AcOpfLayout& L = data->L;

  data->bus_inc.resize(static_cast<size_t>(L.n_bus));
  for (int e = 0; e < L.n_branch; ++e) {
    const Branch& br = ac.branches[static_cast<size_t>(e)];
    data->bus_inc[static_cast<size_t>(br.from_bus)].flows.emplace_back(e, 0);
    data->bus_inc[static_cast<size_t>(br.to_bus)].flows.emplace_back(e, 1);
  }
  for (int k = 0; k < L.n_gen; ++k) {
    data->bus_inc[static_cast<size_t>(ac.generators[static_cast<size_t>(k)].bus)].gens.push_back(k);
  }
  for (int t = 0; t < n_tr; ++t) {
    const Branch& br = ac.branches[static_cast<size_t>(ac.transformer_branches[static_cast<size_t>(t)])];
    data->bus_inc[static_cast<size_t>(br.from_bus)].transformers.push_back(t);
  }

  AcOpfModel model;
  model.layout = L;
  NlpProblem& p = model.problem;
  p.n = L.n_vars;
  p.lower = VectorXd::Constant(p.n, -kInf);
  p.upper = VectorXd::Constant(p.n, kInf);

  for (int i = 0; i < L.n_bus; ++i) {
    const Bus& b = ac.buses[static_cast<size_t>(i)];
    p.lower[L.vr(i)] = b.vr_min;
    p.upper[L.vr(i)] = b.vr_max;
    p.lower[L.vi(i)] = b.vi_min;
    p.upper[L.vi(i)] = b.vi_max;
    p.lower[L.lp_plus(i)] = p.lower[L.lp_minus(i)] = 0.0;
    p.lower[L.lq_plus(i)] = p.lower[L.lq_minus(i)] = 0.0;
    p.lower[L.dqloss(i)] = 0.0;
  }
  for (int k = 0; k < L.n_gen; ++k) {
    const Generator& g = ac.generators[static_cast<size_t>(k)];
    p.lower[L.fp(k)] = g.p_min;
    p.upper[L.fp(k)] = g.p_max;
    p.lower[L.fq(k)] = g.q_min;
    p.upper[L.fq(k)] = g.q_max;
  }
  for (int t = 0; t < n_tr; ++t) {
    if (coupling.mode == CouplingMode::Fixed) {
      // Pinned even when the value exceeds the declared ceiling: overrun is
      // reported by the GIC layer, not projected away here.
      p.lower[L.i_eff(t)] = p.upper[L.i_eff(t)] = coupling.i_eff_fixed[t];
    } else {
      p.lower[L.i_eff(t)] = 0.0;
      p.upper[L.i_eff(t)] = ac.transformer(t).i_eff_max;
    }
    if (L.has_slacks) {
      p.lower[L.s_plus(t)] = 0.0;
      p.lower[L.s_minus(t)] = 0.0;
    }
  }

  // objective
  p.objective = [data](const VectorXd& x, VectorXd* grad) {
    const AcOpfLayout& L = data->L;
    const AcNetwork& ac = *data->ac;
    const double kappa = ac.config.kappa;
    double val = 0.0;
    for (int k = 0; k < L.n_gen; ++k) {
      const Generator& g = ac.generators[static_cast<size_t>(k)];
      const double fp = x[L.fp(k)];
      val += g.c1 * fp + g.c2 * fp * fp;
      if (grad) (*grad)[L.fp(k)] += g.c1 + 2.0 * g.c2 * fp;
    }
    for (int i = 0; i < L.n_bus; ++i) {
      val += kappa * (x[L.lp_plus(i)] + x[L.lp_minus(i)] + x[L.lq_plus(i)] + x[L.lq_minus(i)]);
      if (grad) {
        (*grad)[L.lp_plus(i)] += kappa;
        (*grad)[L.lp_minus(i)] += kappa;
        (*grad)[L.lq_plus(i)] += kappa;
        (*grad)[L.lq_minus(i)] += kappa;
      }
    }
    if (data->coupling.mode == CouplingMode::Penalized) {
      const auto& c = data->coupling;
      for (int t = 0; t < L.n_tr; ++t) {
        const double s = c.i_scale.size() ? c.i_scale[t] : 1.0;
        const double ieff = x[L.i_eff(t)];
        const double d = (c.i_dc[t] - ieff) / s;
        val += -c.mu[t] * ieff / s + 0.5 * c.rho * d * d;
        if (grad) (*grad)[L.i_eff(t)] += (-c.mu[t] - c.rho * d) / s;
      }
    }
    return val;
  };

  // flow definition rows (4 per branch)
  for (int e = 0; e < L.n_branch; ++e) {
    const Branch& br = ac.branches[static_cast<size_t>(e)];
    const int i = br.from_bus, j = br.to_bus;
    const double g = br.g, b = br.b, bc = br.b_charge;
    const std::string id = std::to_string(br.id);

    p.eq.push_back({"p_fr[" + id + "]", [data, e, i, j, g, b](const VectorXd& x, VectorXd* gr) {
      const AcOpfLayout& L = data->L;
      const double vri = x[L.vr(i)], vii = x[L.vi(i)], vrj = x[L.vr(j)], vij = x[L.vi(j)];
      const double wi = vri * vri + vii * vii;
      const double wc = vri * vrj + vii * vij;
      const double ws = vrj * vii - vri * vij;
      const double val = x[L.p_fr(e)] - g * wi + g * wc + b * ws;
      if (gr) {
        (*gr)[L.p_fr(e)] = 1.0;
        (*gr)[L.vr(i)] = -2.0 * g * vri + g * vrj - b * vij;
        (*gr)[L.vi(i)] = -2.0 * g * vii + g * vij + b * vrj;
        (*gr)[L.vr(j)] = g * vri + b * vii;
        (*gr)[L.vi(j)] = g * vii - b * vri;
      }
      return val;
    }});

    p.eq.push_back({"p_to[" + id + "]", [data, e, i, j, g, b](const VectorXd& x, VectorXd* gr) {
      const AcOpfLayout& L = data->L;
      const double vri = x[L.vr(i)], vii = x[L.vi(i)], vrj = x[L.vr(j)], vij = x[L.vi(j)];
      const double wj = vrj * vrj + vij * vij;
      const double wc = vri * vrj + vii * vij;
      const double ws = vrj * vii - vri * vij;
      const double val = x[L.p_to(e)] - g * wj + g * wc - b * ws;
      if (gr) {
        (*gr)[L.p_to(e)] = 1.0;
        (*gr)[L.vr(i)] = g * vrj + b * vij;
        (*gr)[L.vi(i)] = g * vij - b * vrj;
        (*gr)[L.vr(j)] = -2.0 * g * vrj + g * vri - b * vii;
        (*gr)[L.vi(j)] = -2.0 * g * vij + g * vii + b * vri;
      }
      return val;
    }});

    p.eq.push_back({"q_fr[" + id + "]", [data, e, i, j, g, b, bc](const VectorXd& x, VectorXd* gr) {
      const AcOpfLayout& L = data->L;
      const double vri = x[L.vr(i)], vii = x[L.vi(i)], vrj = x[L.vr(j)], vij = x[L.vi(j)];
      const double wi = vri * vri + vii * vii;
      const double wc = vri * vrj + vii * vij;
      const double ws = vrj * vii - vri * vij;
      const double bt = b + bc / 2.0;
      const double val = x[L.q_fr(e)] + bt * wi - b * wc + g * ws;
      if (gr) {
        (*gr)[L.q_fr(e)] = 1.0;
        (*gr)[L.vr(i)] = 2.0 * bt * vri - b * vrj - g * vij;
        (*gr)[L.vi(i)] = 2.0 * bt * vii - b * vij + g * vrj;
        (*gr)[L.vr(j)] = -b * vri + g * vii;
        (*gr)[L.vi(j)] = -b * vii - g * vri;
      }
      return val;
    }});

    p.eq.push_back({"q_to[" + id + "]", [data, e, i, j, g, b, bc](const VectorXd& x, VectorXd* gr) {
      const AcOpfLayout& L = data->L;
      const double vri = x[L.vr(i)], vii = x[L.vi(i)], vrj = x[L.vr(j)], vij = x[L.vi(j)];
      const double wj = vrj * vrj + vij * vij;
      const double wc = vri * vrj + vii * vij;
      const double ws = vrj * vii - vri * vij;
      const double bt = b + bc / 2.0;
      const double val = x[L.q_to(e)] + bt * wj - b * wc - g * ws;
      if (gr) {
        (*gr)[L.q_to(e)] = 1.0;
        (*gr)[L.vr(i)] = -b * vrj + g * vij;
        (*gr)[L.vi(i)] = -b * vij - g * vrj;
        (*gr)[L.vr(j)] = 2.0 * bt * vrj - b * vri - g * vii;
        (*gr)[L.vi(j)] = 2.0 * bt * vij - b * vii + g * vri;
      }
      return val;
    }});

    // thermal limits, both ends
    p.ineq.push_back({"thermal_fr[" + id + "]", [data, e, s2 = br.s_max * br.s_max](
                          const VectorXd& x, VectorXd* gr) {
      const AcOpfLayout& L = data->L;
      const double pf = x[L.p_fr(e)], qf = x[L.q_fr(e)];
      if (gr) {
        (*gr)[L.p_fr(e)] = 2.0 * pf;
        (*gr)[L.q_fr(e)] = 2.0 * qf;
      }
      return pf * pf + qf * qf - s2;
    }});
    p.ineq.push_back({"thermal_to[" + id + "]", [data, e, s2 = br.s_max * br.s_max](
                          const VectorXd& x, VectorXd* gr) {
      const AcOpfLayout& L = data->L;
      const double pt = x[L.p_to(e)], qt = x[L.q_to(e)];
      if (gr) {
        (*gr)[L.p_to(e)] = 2.0 * pt;
        (*gr)[L.q_to(e)] = 2.0 * qt;
      }
      return pt * pt + qt * qt - s2;
    }});

    // angle tangent envelope: tan(lo) wc <= ws <= tan(hi) wc
    const double tlo = std::tan(br.theta_min);
    const double thi = std::tan(br.theta_max);
    p.ineq.push_back({"angle_lo[" + id + "]", [data, i, j, tlo](const VectorXd& x, VectorXd* gr) {
      const AcOpfLayout& L = data->L;
      const double vri = x[L.vr(i)], vii = x[L.vi(i)], vrj = x[L.vr(j)], vij = x[L.vi(j)];
      const double wc = vri * vrj + vii * vij;
      const double ws = vrj * vii - vri * vij;
      if (gr) {
        (*gr)[L.vr(i)] = tlo * vrj + vij;
        (*gr)[L.vi(i)] = tlo * vij - vrj;
        (*gr)[L.vr(j)] = tlo * vri - vii;
        (*gr)[L.vi(j)] = tlo * vii + vri;
      }
      return tlo * wc - ws;
    }});
    p.ineq.push_back({"angle_hi[" + id + "]", [data, i, j, thi](const VectorXd& x, VectorXd* gr) {
      const AcOpfLayout& L = data->L;
      const double vri = x[L.vr(i)], vii = x[L.vi(i)], vrj = x[L.vr(j)], vij = x[L.vi(j)];
      const double wc = vri * vrj + vii * vij;
      const double ws = vrj * vii - vri * vij;
      if (gr) {
        (*gr)[L.vr(i)] = -thi * vrj - vij;
        (*gr)[L.vi(i)] = -thi * vij + vrj;
        (*gr)[L.vr(j)] = -thi * vri + vii;
        (*gr)[L.vi(j)] = -thi * vii - vri;
      }
      return ws - thi * wc;
    }});
  }

  // balance rows (2 per bus)
  for (int i = 0; i < L.n_bus; ++i) {
    const Bus& bus = ac.buses[static_cast<size_t>(i)];
    const std::string id = std::to_string(bus.id);

    p.eq.push_back({"balance_p[" + id + "]", [data, i](const VectorXd& x, VectorXd* gr) {
      const AcOpfLayout& L = data->L;
      const Bus& bus = data->ac->buses[static_cast<size_t>(i)];
      const BusIncidence& inc = data->bus_inc[static_cast<size_t>(i)];
      const double vri = x[L.vr(i)], vii = x[L.vi(i)];
      const double wi = vri * vri + vii * vii;
      double val = bus.p_demand - x[L.lp_plus(i)] + x[L.lp_minus(i)] + bus.g_shunt * wi;
      for (const auto& [e, side] : inc.flows) {
        val += x[side == 0 ? L.p_fr(e) : L.p_to(e)];
      }
      for (int k : inc.gens) val -= x[L.fp(k)];
      if (gr) {
        (*gr)[L.lp_plus(i)] = -1.0;
        (*gr)[L.lp_minus(i)] = 1.0;
        (*gr)[L.vr(i)] = 2.0 * bus.g_shunt * vri;
        (*gr)[L.vi(i)] = 2.0 * bus.g_shunt * vii;
        for (const auto& [e, side] : inc.flows) (*gr)[side == 0 ? L.p_fr(e) : L.p_to(e)] = 1.0;
        for (int k : inc.gens) (*gr)[L.fp(k)] = -1.0;
      }
      return val;
    }});

    p.eq.push_back({"balance_q[" + id + "]", [data, i](const VectorXd& x, VectorXd* gr) {
      const AcOpfLayout& L = data->L;
      const Bus& bus = data->ac->buses[static_cast<size_t>(i)];
      const BusIncidence& inc = data->bus_inc[static_cast<size_t>(i)];
      const double vri = x[L.vr(i)], vii = x[L.vi(i)];
      const double wi = vri * vri + vii * vii;
      double val = bus.q_demand - x[L.lq_plus(i)] + x[L.lq_minus(i)] - bus.b_shunt * wi +
                   x[L.dqloss(i)];
      for (const auto& [e, side] : inc.flows) {
        val += x[side == 0 ? L.q_fr(e) : L.q_to(e)];
      }
      for (int k : inc.gens) val -= x[L.fq(k)];
      if (gr) {
        (*gr)[L.lq_plus(i)] = -1.0;
        (*gr)[L.lq_minus(i)] = 1.0;
        (*gr)[L.dqloss(i)] = 1.0;
        (*gr)[L.vr(i)] = -2.0 * bus.b_shunt * vri;
        (*gr)[L.vi(i)] = -2.0 * bus.b_shunt * vii;
        for (const auto& [e, side] : inc.flows) (*gr)[side == 0 ? L.q_fr(e) : L.q_to(e)] = 1.0;
        for (int k : inc.gens) (*gr)[L.fq(k)] = -1.0;
      }
      return val;
    }});

    // GIC reactive loss: dqloss_i = sum K_t sqrt(w_i) i_eff_t over the
    // transformers whose high side sits at this bus.
    p.eq.push_back({"qloss[" + id + "]", [data, i](const VectorXd& x, VectorXd* gr) {
      const AcOpfLayout& L = data->L;
      const BusIncidence& inc = data->bus_inc[static_cast<size_t>(i)];
      const double vri = x[L.vr(i)], vii = x[L.vi(i)];
      const double wi = std::max(vri * vri + vii * vii, kWFloor);
      const double sw = std::sqrt(wi);
      double val = x[L.dqloss(i)];
      if (gr) (*gr)[L.dqloss(i)] = 1.0;
      for (int t : inc.transformers) {
        const double k_loss = data->ac->transformer(t).k_loss;
        val -= k_loss * sw * x[L.i_eff(t)];
        if (gr) {
          (*gr)[L.i_eff(t)] = -k_loss * sw;
          (*gr)[L.vr(i)] += -k_loss * x[L.i_eff(t)] * vri / sw;
          (*gr)[L.vi(i)] += -k_loss * x[L.i_eff(t)] * vii / sw;
        }
      }
      return val;
    }});
  }

  // complementarity rows: s+ - s- = theta, i_eff = s+ + s-
  if (L.has_slacks) {
    for (int t = 0; t < n_tr; ++t) {
      const std::string id = std::to_string(
          ac.branches[static_cast<size_t>(ac.transformer_branches[static_cast<size_t>(t)])].id);
      const double theta = coupling.theta[t];
      p.eq.push_back({"slack_split[" + id + "]", [data, t, theta](const VectorXd& x, VectorXd* gr) {
        const AcOpfLayout& L = data->L;
        if (gr) {
          (*gr)[L.s_plus(t)] = 1.0;
          (*gr)[L.s_minus(t)] = -1.0;
        }
        return x[L.s_plus(t)] - x[L.s_minus(t)] - theta;
      }});
      p.eq.push_back({"i_eff_recover[" + id + "]", [data, t](const VectorXd& x, VectorXd* gr) {
        const AcOpfLayout& L = data->L;
        if (gr) {
          (*gr)[L.i_eff(t)] = 1.0;
          (*gr)[L.s_plus(t)] = -1.0;
          (*gr)[L.s_minus(t)] = -1.0;
        }
        return x[L.i_eff(t)] - x[L.s_plus(t)] - x[L.s_minus(t)];
      }});
      p.complementarity_pairs.emplace_back(L.s_plus(t), L.s_minus(t));
    }
  }

  return model;
}

Eigen::VectorXd flat_start(const AcNetwork& ac, const AcOpfCoupling& coupling,
                           const AcOpfLayout& L) {
  VectorXd x = VectorXd::Zero(L.n_vars);
  for (int i = 0; i < L.n_bus; ++i) {
    const Bus& b = ac.buses[static_cast<size_t>(i)];
    x[L.vr(i)] = std::clamp(1.0, b.vr_min, b.vr_max);
    x[L.vi(i)] = std::clamp(0.0, b.vi_min, b.vi_max);
  }
  for (int k = 0; k < L.n_gen; ++k) {
    const Generator& g = ac.generators[static_cast<size_t>(k)];
    x[L.fp(k)] = 0.5 * (g.p_min + g.p_max);
    x[L.fq(k)] = 0.5 * (g.q_min + g.q_max);
  }
  for (int t = 0; t < L.n_tr; ++t) {
    double ieff = 0.0;
    switch (coupling.mode) {
      case CouplingMode::Fixed: ieff = coupling.i_eff_fixed[t]; break;
      case CouplingMode::Penalized:
        ieff = std::clamp(coupling.i_dc[t], 0.0, ac.transformer(t).i_eff_max);
        break;
      case CouplingMode::Complementarity: ieff = std::abs(coupling.theta[t]); break;
      case CouplingMode::Free: ieff = 0.0; break;
    }
    x[L.i_eff(t)] = ieff;
    if (L.has_slacks) {
      x[L.s_plus(t)] = std::max(coupling.theta[t], 0.0);
      x[L.s_minus(t)] = std::max(-coupling.theta[t], 0.0);
    }
  }
  // consistent flows and losses at the flat voltages
  for (int e = 0; e < L.n_branch; ++e) {
    const Branch& br = ac.branches[static_cast<size_t>(e)];
    const int i = br.from_bus, j = br.to_bus;
    const double vri = x[L.vr(i)], vii = x[L.vi(i)], vrj = x[L.vr(j)], vij = x[L.vi(j)];
    const double wi = vri * vri + vii * vii;
    const double wj = vrj * vrj + vij * vij;
    const double wc = vri * vrj + vii * vij;
    const double ws = vrj * vii - vri * vij;
    const double bt = br.b + br.b_charge / 2.0;
    x[L.p_fr(e)] = br.g * wi - br.g * wc - br.b * ws;
    x[L.p_to(e)] = br.g * wj - br.g * wc + br.b * ws;
    x[L.q_fr(e)] = -bt * wi + br.b * wc - br.g * ws;
    x[L.q_to(e)] = -bt * wj + br.b * wc + br.g * ws;
  }
  for (int t = 0; t < L.n_tr; ++t) {
    const Branch& br = ac.branches[static_cast<size_t>(ac.transformer_branches[static_cast<size_t>(t)])];
    const int i = br.from_bus;
    const double sw = std::sqrt(std::max(w_of(x, L, i), kWFloor));
    x[L.dqloss(i)] += ac.transformer(t).k_loss * sw * x[L.i_eff(t)];
  }
  return x;
}

EvaluationReport summarize(const AcNetwork& ac, const AcOpfModel& model, const NlpSolution& sol) {
  const AcOpfLayout& L = model.layout;
  EvaluationReport rep;
  rep.nlp = sol;
  rep.solver_status = sol.status;
  for (int k = 0; k < L.n_gen; ++k) {
    const Generator& g = ac.generators[static_cast<size_t>(k)];
    const double fp = sol.x[L.fp(k)];
    rep.gen_cost += g.c1 * fp + g.c2 * fp * fp;
  }
  for (int i = 0; i < L.n_bus; ++i) {
    rep.shed_penalty += ac.config.kappa * (sol.x[L.lp_plus(i)] + sol.x[L.lp_minus(i)] +
                                           sol.x[L.lq_plus(i)] + sol.x[L.lq_minus(i)]);
  }
  rep.objective = rep.gen_cost + rep.shed_penalty;
  double bal = 0.0;
  for (const auto& c : model.problem.eq) {
    if (c.name.rfind("balance_", 0) == 0) {
      bal = std::max(bal, std::abs(c.fn(sol.x, nullptr)));
    }
  }
  rep.max_balance_residual = bal;
  if (L.n_tr > 0) {
    rep.i_eff.resize(L.n_tr);
    for (int t = 0; t < L.n_tr; ++t) rep.i_eff[t] = sol.x[L.i_eff(t)];
  }
  return rep;
}

Eigen::VectorXd i_eff_reduced_costs(const AcOpfModel& model, const NlpSolution& sol) {
  const NlpProblem& p = model.problem;
  VectorXd grad = VectorXd::Zero(p.n);
  VectorXd buf = VectorXd::Zero(p.n);
  p.objective(sol.x, &grad);
  for (size_t k = 0; k < p.eq.size(); ++k) {
    buf.setZero();
    p.eq[k].fn(sol.x, &buf);
    grad.noalias() += sol.eq_multipliers[static_cast<int>(k)] * buf;
  }
  for (size_t k = 0; k < p.ineq.size(); ++k) {
    buf.setZero();
    p.ineq[k].fn(sol.x, &buf);
    grad.noalias() += sol.ineq_multipliers[static_cast<int>(k)] * buf;
  }
  VectorXd out(model.layout.n_tr);
  for (int t = 0; t < model.layout.n_tr; ++t) out[t] = grad[model.layout.i_eff(t)];
  return out;
}

EvaluationReport evaluate_placement(const AcNetwork& ac, const DcNetwork& dc,
                                    const GmdScenario& scenario, const Placement& z,
                                    const EvalOptions& opts) {
  if (static_cast<int>(z.size()) != ac.substation_count()) {
    throw ValidationError("evaluate_placement: placement length must equal substation count");
  }
  for (int zi : z) {
    if (zi != 0 && zi != 1) throw ValidationError("evaluate_placement: placement must be binary");
  }
  if (opts.budget >= 0 && placement_count(z) > opts.budget) {
    throw ValidationError("evaluate_placement: placement exceeds budget V=" +
                          std::to_string(opts.budget));
  }

  const Eigen::VectorXd xi = materialize_xi(dc, scenario);
  Eigen::VectorXd theta;
  if (gic::fully_blocked(dc, z)) {
    // no grounding left: winding legs are dead and carry no current
    // (verified), so the effective GIC vanishes without a circuit solve
    gic::verify_windings_dead_when_blocked(dc);
    theta = Eigen::VectorXd::Zero(ac.transformer_count());
  } else {
    const GicSolution gsol = gic::solve_gic(dc, xi, z);
    theta = gic::all_transformer_theta(ac, dc, gsol);
  }
  const EffectiveGic eff = gic::effective_gic(theta);

  const AcOpfCoupling coupling = opts.complementarity_acopf
                                     ? AcOpfCoupling::complementarity(theta)
                                     : AcOpfCoupling::fixed(eff.i_eff);
  const AcOpfModel model = build_acopf(ac, coupling);

  NlpOptions nlp_opts = opts.nlp;
  nlp_opts.tol = std::min(nlp_opts.tol, ac.config.nlp_tol);
  nlp_opts.max_outer = std::max(nlp_opts.max_outer, ac.config.nlp_max_outer);
  nlp_opts.max_inner = std::max(nlp_opts.max_inner, ac.config.nlp_max_inner);

  const Eigen::VectorXd x0 = flat_start(ac, coupling, model.layout);
  NlpSolution best;
  bool have = false;
  for (int attempt = 0; attempt <= std::max(0, opts.restarts); ++attempt) {
    Eigen::VectorXd start = x0;
    if (attempt > 0) {
      std::mt19937_64 rng(0x9e3779b9u + static_cast<uint64_t>(attempt));
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (int i = 0; i < start.size(); ++i) start[i] += opts.restart_perturbation * u(rng);
      start = start.cwiseMax(model.problem.lower).cwiseMin(model.problem.upper);
    }
    NlpSolution sol = nlp::solve(model.problem, start, nlp_opts);
    if (!have || sol.max_residual < best.max_residual ||
        (sol.status == SolveStatus::OptimalTolerance &&
         best.status != SolveStatus::OptimalTolerance)) {
      best = std::move(sol);
      have = true;
    }
    if (best.status == SolveStatus::OptimalTolerance) break;
  }

  EvaluationReport rep = summarize(ac, model, best);
  rep.i_eff = eff.i_eff;
  return rep;
}

} // namespace acopf
} // namespace gicshield
