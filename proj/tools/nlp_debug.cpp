// Scratch diagnostics for the AC-OPF NLP path (not installed).
#include <cstdio>

#include "gicshield/acopf.hpp"
#include "gicshield/gic.hpp"
#include "gicshield/network.hpp"

using namespace gicshield;

int main(int argc, char** argv) {
  const char* path = argc > 1 ? argv[1] : "data/case5_synth.json";
  const double efield = argc > 2 ? std::atof(argv[2]) : 10.0;
  AcNetwork ac = load_network(path);
  DcNetwork dc = derive_dc_network(ac);
  GmdScenario scenario = GmdScenario::uniform_field(efield, 45.0);
  const Eigen::VectorXd xi = materialize_xi(dc, scenario);
  Placement z(static_cast<size_t>(ac.substation_count()), 0);
  const GicSolution gsol = gic::solve_gic(dc, xi, z);
  const Eigen::VectorXd theta = gic::all_transformer_theta(ac, dc, gsol);
  const EffectiveGic eff = gic::effective_gic(theta);
  std::printf("i_eff:");
  for (int t = 0; t < eff.i_eff.size(); ++t) std::printf(" %.3f", eff.i_eff[t]);
  std::printf("\n");

  const AcOpfCoupling coupling = AcOpfCoupling::fixed(eff.i_eff);
  const AcOpfModel model = acopf::build_acopf(ac, coupling);
  std::printf("n_vars=%d n_eq=%zu n_ineq=%zu\n", model.problem.n, model.problem.eq.size(),
              model.problem.ineq.size());

  NlpOptions opts;
  opts.tol = 1e-6;
  opts.on_outer = [](int outer, int inner, double f, double res, double pg, double rho) {
    std::printf("outer %2d inner %4d f=%.8e res=%.3e pg=%.3e rho=%.1e\n", outer, inner, f, res, pg,
                rho);
  };
  const Eigen::VectorXd x0 = acopf::flat_start(ac, coupling, model.layout);
  std::printf("gradient check at x0: %.3e\n", nlp::check_gradients(model.problem, x0));
  NlpSolution sol = nlp::solve(model.problem, x0, opts);
  std::printf("status=%s outer=%d inner=%d res=%.3e pg=%.3e\n", to_string(sol.status),
              sol.outer_iterations, sol.inner_iterations, sol.max_residual, sol.projected_gradient);
  const EvaluationReport rep = acopf::summarize(ac, model, sol);
  std::printf("objective=%.6f gen=%.6f shed=%.6f\n", rep.objective, rep.gen_cost, rep.shed_penalty);
  return 0;
}
