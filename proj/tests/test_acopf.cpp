#include <doctest.h>

#include <random>

#include "gicshield/acopf.hpp"
#include "gicshield/errors.hpp"
#include "gicshield/gic.hpp"
#include "test_support.hpp"

using namespace gicshield;
using Eigen::VectorXd;

namespace {

EvaluationReport eval_case(const AcNetwork& ac, const DcNetwork& dc, double efield,
                           const Placement& z, int budget) {
  EvalOptions opts;
  opts.budget = budget;
  return acopf::evaluate_placement(ac, dc, GmdScenario::uniform_field(efield, 45.0), z, opts);
}

} // namespace

TEST_CASE("case5 census: variable and constraint counts (frozen)") {
  const AcNetwork ac = testsupport::load_case5();
  const DcNetwork dc = derive_dc_network(ac);
  const VectorXd xi = materialize_xi(dc, GmdScenario::uniform_field(10.0, 45.0));
  const GicSolution g = gic::solve_gic(dc, xi, {0, 0, 0});
  const EffectiveGic eff = gic::effective_gic(gic::all_transformer_theta(ac, dc, g));

  const AcOpfModel model = acopf::build_acopf(ac, AcOpfCoupling::fixed(eff.i_eff));
  // census enumerated once from the layout rules and frozen:
  //   vars: 2*5 voltages + 2*2 generators + 4*6 flows + 4*5 sheds
  //         + 5 qloss + 2 i_eff = 65
  //   eq:   4*6 flow defs + 2*5 balances + 5 qloss rows = 39
  //   ineq: 2*6 thermal + 2*6 angle = 24
  CHECK(model.problem.n == 65);
  CHECK(model.problem.eq.size() == 39);
  CHECK(model.problem.ineq.size() == 24);
  CHECK(model.problem.complementarity_pairs.empty());

  // fixed coupling pins the i_eff block
  for (int t = 0; t < model.layout.n_tr; ++t) {
    CHECK(model.problem.lower[model.layout.i_eff(t)] == eff.i_eff[t]);
    CHECK(model.problem.upper[model.layout.i_eff(t)] == eff.i_eff[t]);
  }
}

TEST_CASE("gradients of every bundled AC-OPF are consistent at the flat start") {
  for (const char* name : {"case5_synth.json", "case12_synth.json"}) {
    const AcNetwork ac = load_network(testsupport::data_path(name));
    const DcNetwork dc = derive_dc_network(ac);
    const VectorXd xi = materialize_xi(dc, GmdScenario::uniform_field(15.0, 45.0));
    const GicSolution g =
        gic::solve_gic(dc, xi, Placement(static_cast<size_t>(ac.substation_count()), 0));
    const VectorXd theta = gic::all_transformer_theta(ac, dc, g);

    for (int mode = 0; mode < 3; ++mode) {
      AcOpfCoupling c;
      if (mode == 0) {
        c = AcOpfCoupling::fixed(theta.cwiseAbs());
      } else if (mode == 1) {
        c = AcOpfCoupling::penalized(VectorXd::Constant(theta.size(), 0.3), 50.0,
                                     theta.cwiseAbs());
      } else {
        c = AcOpfCoupling::complementarity(theta);
      }
      const AcOpfModel model = acopf::build_acopf(ac, c);
      const VectorXd x0 = acopf::flat_start(ac, c, model.layout);
      CHECK(nlp::check_gradients(model.problem, x0) <= 1e-5);
    }
  }
}

TEST_CASE("fixed i_eff = 0 reduces to the plain AC-OPF") {
  const AcNetwork ac = testsupport::load_case5();
  const DcNetwork dc = derive_dc_network(ac);

  // fixed-zero coupling
  const EvaluationReport at_zero_field = eval_case(ac, dc, 0.0, {0, 0, 0}, 3);
  REQUIRE(at_zero_field.solver_status == SolveStatus::OptimalTolerance);

  // free coupling lets the optimizer drop i_eff to zero on its own
  const AcOpfCoupling free_c = AcOpfCoupling::free_coupling();
  const AcOpfModel model = acopf::build_acopf(ac, free_c);
  const NlpSolution sol =
      nlp::solve(model.problem, acopf::flat_start(ac, free_c, model.layout), {});
  REQUIRE(sol.status == SolveStatus::OptimalTolerance);
  const EvaluationReport free_rep = acopf::summarize(ac, model, sol);

  CHECK(free_rep.objective == doctest::Approx(at_zero_field.objective).epsilon(1e-5));
  // no shedding in the unstressed system
  CHECK(at_zero_field.shed_penalty == doctest::Approx(0.0).scale(1.0).epsilon(1e-4));
}

TEST_CASE("penalized coupling with rho = 0, mu = 0 matches the fixed objective function") {
  const AcNetwork ac = testsupport::load_case5();
  const int n_tr = ac.transformer_count();
  VectorXd i_eff(n_tr);
  i_eff << 12.0, 140.0;

  const AcOpfModel fixed = acopf::build_acopf(ac, AcOpfCoupling::fixed(i_eff));
  const AcOpfModel pen = acopf::build_acopf(
      ac, AcOpfCoupling::penalized(VectorXd::Zero(n_tr), 0.0, VectorXd::Zero(n_tr)));
  REQUIRE(fixed.problem.n == pen.problem.n);

  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int trial = 0; trial < 5; ++trial) {
    VectorXd x(fixed.problem.n);
    for (int i = 0; i < x.size(); ++i) x[i] = 1.0 + u(rng);
    CHECK(fixed.problem.objective(x, nullptr) ==
          doctest::Approx(pen.problem.objective(x, nullptr)).epsilon(1e-12));
  }
}

TEST_CASE("zero field makes every placement equivalent") {
  const AcNetwork ac = testsupport::load_case5();
  const DcNetwork dc = derive_dc_network(ac);
  const EvaluationReport none = eval_case(ac, dc, 0.0, {0, 0, 0}, 3);
  const EvaluationReport some = eval_case(ac, dc, 0.0, {0, 1, 0}, 3);
  const EvaluationReport all = eval_case(ac, dc, 0.0, {1, 1, 1}, 3);
  CHECK(none.objective == doctest::Approx(some.objective).epsilon(1e-6));
  CHECK(none.objective == doctest::Approx(all.objective).epsilon(1e-6));
}

TEST_CASE("blockers relieve shedding under a strong field") {
  const AcNetwork ac = testsupport::load_case5();
  const DcNetwork dc = derive_dc_network(ac);
  const EvaluationReport none = eval_case(ac, dc, 20.0, {0, 0, 0}, 3);
  const EvaluationReport all = eval_case(ac, dc, 20.0, {1, 1, 1}, 3);
  REQUIRE(none.solver_status == SolveStatus::OptimalTolerance);
  REQUIRE(all.solver_status == SolveStatus::OptimalTolerance);
  CHECK(none.shed_penalty > 0.0);
  CHECK(all.shed_penalty < none.shed_penalty);
}

TEST_CASE("budget violation is a precondition error") {
  const AcNetwork ac = testsupport::load_case5();
  const DcNetwork dc = derive_dc_network(ac);
  EvalOptions opts;
  opts.budget = 1;
  CHECK_THROWS_WITH_AS(
      acopf::evaluate_placement(ac, dc, GmdScenario::uniform_field(5.0, 45.0), {1, 1, 0}, opts),
      doctest::Contains("budget"), ValidationError);
  CHECK_THROWS_AS(
      acopf::evaluate_placement(ac, dc, GmdScenario::uniform_field(5.0, 45.0), {2, 0, 0}, opts),
      ValidationError);
}

TEST_CASE("objective identity and balance residual in every report") {
  const AcNetwork ac = testsupport::load_case5();
  const DcNetwork dc = derive_dc_network(ac);
  for (double e : {0.0, 5.0, 20.0}) {
    for (const Placement& z : {Placement{0, 0, 0}, Placement{0, 1, 0}, Placement{1, 0, 1}}) {
      const EvaluationReport rep = eval_case(ac, dc, e, z, 3);
      CHECK(std::abs(rep.objective - (rep.gen_cost + rep.shed_penalty)) <=
            1e-8 * std::max(1.0, std::abs(rep.objective)));
      CHECK(rep.max_balance_residual <= 1e-6);
    }
  }
}

TEST_CASE("deterministic evaluation") {
  const AcNetwork ac = testsupport::load_case5();
  const DcNetwork dc = derive_dc_network(ac);
  const EvaluationReport a = eval_case(ac, dc, 15.0, {0, 1, 0}, 3);
  const EvaluationReport b = eval_case(ac, dc, 15.0, {0, 1, 0}, 3);
  CHECK(a.objective == b.objective);
  CHECK(a.nlp.x == b.nlp.x);
}

TEST_CASE("complementarity coupling recovers |theta| inside the NLP") {
  const AcNetwork ac = testsupport::load_case5();
  const DcNetwork dc = derive_dc_network(ac);
  const VectorXd xi = materialize_xi(dc, GmdScenario::uniform_field(10.0, 45.0));
  const GicSolution g = gic::solve_gic(dc, xi, {0, 0, 0});
  const VectorXd theta = gic::all_transformer_theta(ac, dc, g);

  const AcOpfCoupling c = AcOpfCoupling::complementarity(theta);
  const AcOpfModel model = acopf::build_acopf(ac, c);
  REQUIRE(model.layout.has_slacks);
  const NlpSolution sol = nlp::solve(model.problem, acopf::flat_start(ac, c, model.layout), {});
  REQUIRE(sol.status == SolveStatus::OptimalTolerance);

  for (int t = 0; t < model.layout.n_tr; ++t) {
    const double sp = sol.x[model.layout.s_plus(t)];
    const double sm = sol.x[model.layout.s_minus(t)];
    CHECK(sp * sm <= 1e-6);
    CHECK(std::abs(sol.x[model.layout.i_eff(t)] - std::abs(theta[t])) <= 1e-5);
  }

  // same optimum as pinning i_eff = |theta| directly
  EvalOptions fixed_opts;
  fixed_opts.budget = 3;
  const EvaluationReport fixed_rep = acopf::evaluate_placement(
      ac, dc, GmdScenario::uniform_field(10.0, 45.0), {0, 0, 0}, fixed_opts);
  const EvaluationReport comp_rep = acopf::summarize(ac, model, sol);
  CHECK(comp_rep.objective == doctest::Approx(fixed_rep.objective).epsilon(1e-4));
}

TEST_CASE("qloss rows use the substituted voltage magnitude") {
  const AcNetwork ac = testsupport::load_case5();
  const DcNetwork dc = derive_dc_network(ac);
  const EvaluationReport rep = eval_case(ac, dc, 15.0, {0, 0, 0}, 3);
  REQUIRE(rep.solver_status == SolveStatus::OptimalTolerance);

  const AcOpfModel model = acopf::build_acopf(ac, AcOpfCoupling::fixed(rep.i_eff));
  const AcOpfLayout& L = model.layout;
  // reconstruct dqloss from the solution voltages: per owning bus,
  // dqloss_i = sum K_t sqrt(vr^2 + vi^2) i_eff_t
  VectorXd expected = VectorXd::Zero(L.n_bus);
  for (int t = 0; t < ac.transformer_count(); ++t) {
    const Branch& br = ac.branches[static_cast<size_t>(ac.transformer_branches[t])];
    const double vr = rep.nlp.x[L.vr(br.from_bus)];
    const double vi = rep.nlp.x[L.vi(br.from_bus)];
    expected[br.from_bus] +=
        ac.transformer(t).k_loss * std::sqrt(vr * vr + vi * vi) * rep.nlp.x[L.i_eff(t)];
  }
  for (int i = 0; i < L.n_bus; ++i) {
    CHECK(rep.nlp.x[L.dqloss(i)] == doctest::Approx(expected[i]).epsilon(1e-6).scale(1.0));
  }
}
