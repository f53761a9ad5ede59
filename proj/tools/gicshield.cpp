// gicshield: solve | evaluate | gic | enumerate | benchmark
//
// Exit codes: 0 success, 2 validation/usage error, 3 solver failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gicshield/acopf.hpp"
#include "gicshield/admm.hpp"
#include "gicshield/errors.hpp"
#include "gicshield/gic.hpp"
#include "gicshield/harness.hpp"
#include "gicshield/network.hpp"
#include "gicshield/stochastic.hpp"

namespace {

using namespace gicshield;

struct ScenarioFlags {
  double efield = 0.0;
  double direction = 45.0;
  std::string xi_file;
  bool efield_set = false;
};

void add_scenario_flags(CLI::App* cmd, ScenarioFlags& s) {
  auto* e = cmd->add_option("--efield", s.efield, "E-field magnitude (V/km)");
  cmd->add_option("--direction", s.direction, "E-field direction (deg, clockwise from north)")
      ->default_val(45.0);
  auto* x = cmd->add_option("--xi-file", s.xi_file, "JSON map of dc_edge label -> xi (V)");
  e->excludes(x);
  cmd->callback([&s, e]() { s.efield_set = e->count() > 0; });
}

GmdScenario make_scenario(const ScenarioFlags& s) {
  if (!s.xi_file.empty()) {
    std::ifstream in(s.xi_file);
    if (!in) throw ParseError("cannot open xi file '" + s.xi_file + "'");
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("xi file is not valid JSON: " + std::string(e.what()));
    }
    if (!doc.is_object()) throw ParseError("xi file: top level must be an object");
    GmdScenario sc;
    sc.explicit_xi.emplace();
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      if (!it.value().is_number()) throw ParseError("xi file: values must be numbers");
      (*sc.explicit_xi)[std::stoi(it.key())] = it.value().get<double>();
    }
    return sc;
  }
  if (!s.efield_set) throw ValidationError("scenario: provide --efield or --xi-file");
  return GmdScenario::uniform_field(s.efield, s.direction);
}

Placement parse_placement(const AcNetwork& ac, const std::string& spec) {
  Placement z(static_cast<size_t>(ac.substation_count()), 0);
  if (spec.empty()) return z;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    const int label = std::stoi(tok);
    auto it = ac.substation_index_of_label.find(label);
    if (it == ac.substation_index_of_label.end()) {
      throw ValidationError("placement references unknown substation " + std::to_string(label));
    }
    z[static_cast<size_t>(it->second)] = 1;
  }
  return z;
}

void apply_config_file(AcNetwork& ac, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config file is not valid JSON: " + std::string(e.what()));
  }
  if (doc.contains("kappa")) ac.config.kappa = doc["kappa"].get<double>();
  if (doc.contains("nlp_tol")) ac.config.nlp_tol = doc["nlp_tol"].get<double>();
  if (doc.contains("nlp_max_outer")) ac.config.nlp_max_outer = doc["nlp_max_outer"].get<int>();
  if (doc.contains("nlp_max_inner")) ac.config.nlp_max_inner = doc["nlp_max_inner"].get<int>();
}

std::vector<double> parse_list(const std::string& spec) {
  std::vector<double> out;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

std::vector<std::string> split(const std::string& spec) {
  std::vector<std::string> out;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

std::ostream& open_out(std::ofstream& file, const std::string& path) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw ValidationError("cannot open output file '" + path + "'");
  return file;
}

void write_admm_trace(const std::string& path, const AdmmResult& result) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open trace file '" + path + "'");
  out << "t,p_res,d_res,rho,third_block_objective,z_b\n";
  char buf[256];
  for (const auto& row : result.trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g,%s\n", row.t, row.p_res, row.d_res,
                  row.rho, row.third_objective, placement_bits(row.z_b).c_str());
    out << buf;
  }
}

void write_sl_trace(const std::string& path, const SlResult& result) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open trace file '" + path + "'");
  out << "t,grad_norm,batch_best_F";
  const int s = result.trace.empty() ? 0 : static_cast<int>(result.trace.front().p.size());
  for (int i = 1; i <= s; ++i) out << ",p_" << i;
  out << "\n";
  for (const auto& row : result.trace) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g", row.t, row.grad_norm, row.batch_best_f);
    out << buf;
    for (int i = 0; i < row.p.size(); ++i) {
      std::snprintf(buf, sizeof(buf), ",%.10g", row.p[i]);
      out << buf;
    }
    out << "\n";
  }
}

void print_report_csv(std::ostream& os, const AcNetwork& ac, const ScenarioFlags& sf, int budget,
                      const Placement& z, const EvaluationReport& rep) {
  os << "instance,efield,direction,budget,placement,objective,gen_cost,shed_penalty,"
        "max_balance_residual,status\n";
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%.6g,%.6g,%d,%s,%.10g,%.10g,%.10g,%.3e,%s\n",
                ac.name.c_str(), sf.efield, sf.direction, budget,
                harness::placement_labels(ac, z).c_str(), rep.objective, rep.gen_cost,
                rep.shed_penalty, rep.max_balance_residual, to_string(rep.solver_status));
  os << buf;
}

void print_report_json(std::ostream& os, const AcNetwork& ac, const ScenarioFlags& sf, int budget,
                       const Placement& z, const EvaluationReport& rep) {
  nlohmann::json doc;
  doc["instance"] = ac.name;
  doc["efield"] = sf.efield;
  doc["direction"] = sf.direction;
  doc["budget"] = budget;
  doc["placement"] = harness::placement_labels(ac, z);
  doc["objective"] = rep.objective;
  doc["gen_cost"] = rep.gen_cost;
  doc["shed_penalty"] = rep.shed_penalty;
  doc["max_balance_residual"] = rep.max_balance_residual;
  doc["status"] = to_string(rep.solver_status);
  os << doc.dump(2) << "\n";
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"GIC blocking-device placement toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON file overriding network config defaults")
      ->configurable(false);

  // ---- gic ----
  auto* cmd_gic = app.add_subcommand("gic", "Solve the DC GIC circuit at a fixed placement");
  std::string gic_network, gic_placement, gic_out;
  ScenarioFlags gic_scenario;
  cmd_gic->add_option("--network", gic_network, "network file")->required();
  add_scenario_flags(cmd_gic, gic_scenario);
  cmd_gic->add_option("--placement", gic_placement, "substation labels, comma separated");
  cmd_gic->add_option("--out", gic_out, "output CSV path (default stdout)");

  // ---- evaluate ----
  auto* cmd_eval = app.add_subcommand("evaluate", "Evaluate F(z) for a placement");
  std::string eval_network, eval_placement, eval_out;
  ScenarioFlags eval_scenario;
  int eval_budget = -1;
  bool eval_json = false;
  double eval_nlp_tol = 1e-6;
  int eval_nlp_iters = 500;
  cmd_eval->add_option("--network", eval_network, "network file")->required();
  add_scenario_flags(cmd_eval, eval_scenario);
  cmd_eval->add_option("--budget", eval_budget, "budget V")->required();
  cmd_eval->add_option("--placement", eval_placement, "substation labels, comma separated");
  cmd_eval->add_flag("--json", eval_json, "emit a structured record instead of CSV");
  cmd_eval->add_option("--nlp-tol", eval_nlp_tol, "NLP tolerance")->default_val(1e-6);
  cmd_eval->add_option("--nlp-max-iters", eval_nlp_iters, "NLP inner iteration cap")
      ->default_val(500);
  cmd_eval->add_option("--out", eval_out, "output path (default stdout)");

  // ---- solve ----
  auto* cmd_solve = app.add_subcommand("solve", "Run a placement heuristic");
  std::string solve_network, solve_algorithm, solve_trace, solve_out;
  ScenarioFlags solve_scenario;
  int solve_budget = 0;
  double rho0 = 1e2, beta = 2.0, tau = 10.0, eps = 1e-4;
  int solve_max_iters = 200;
  bool no_nrb = false;
  int sl_samples = 8;
  double sl_step_a = 1.0, sl_eps = 1e-3;
  std::uint64_t solve_seed = 0;
  int solve_jobs = 0;
  cmd_solve->add_option("--algorithm", solve_algorithm, "admm | sl")->required();
  cmd_solve->add_option("--network", solve_network, "network file")->required();
  add_scenario_flags(cmd_solve, solve_scenario);
  cmd_solve->add_option("--budget", solve_budget, "budget V")->required();
  cmd_solve->add_option("--rho0", rho0, "initial ADMM penalty")->default_val(1e2);
  cmd_solve->add_option("--beta", beta, "NRB balance factor")->default_val(2.0);
  cmd_solve->add_option("--tau", tau, "NRB scaling factor")->default_val(10.0);
  cmd_solve->add_option("--eps", eps, "ADMM residual tolerance")->default_val(1e-4);
  cmd_solve->add_option("--max-iters", solve_max_iters, "iteration cap")->default_val(200);
  cmd_solve->add_flag("--no-nrb", no_nrb, "disable normalized residual balancing");
  cmd_solve->add_option("--samples", sl_samples, "SL sample count per iteration")->default_val(8);
  cmd_solve->add_option("--step-a", sl_step_a, "SL step-size constant (eta_t = a/t)")
      ->default_val(1.0);
  cmd_solve->add_option("--sl-eps", sl_eps, "SL gradient-norm tolerance")->default_val(1e-3);
  cmd_solve->add_option("--seed", solve_seed, "RNG seed (SL)")->default_val(0);
  cmd_solve->add_option("--jobs", solve_jobs, "concurrent evaluations (SL)")->default_val(0);
  cmd_solve->add_option("--trace", solve_trace, "trace CSV path");
  cmd_solve->add_option("--out", solve_out, "output path (default stdout)");

  // ---- enumerate ----
  auto* cmd_enum = app.add_subcommand("enumerate", "Brute-force oracle over all placements");
  std::string enum_network, enum_out;
  ScenarioFlags enum_scenario;
  int enum_budget = 0, enum_jobs = 1;
  bool enum_force = false;
  cmd_enum->add_option("--network", enum_network, "network file")->required();
  add_scenario_flags(cmd_enum, enum_scenario);
  cmd_enum->add_option("--budget", enum_budget, "budget V")->required();
  cmd_enum->add_flag("--force", enum_force, "bypass the enumeration guard");
  cmd_enum->add_option("--jobs", enum_jobs, "concurrent evaluations")->default_val(1);
  cmd_enum->add_option("--out", enum_out, "output CSV path (default stdout)");

  // ---- benchmark ----
  auto* cmd_bench = app.add_subcommand("benchmark", "Compare algorithms across instances");
  std::string bench_networks, bench_efields = "5,10,15,20", bench_algorithms = "admm,sl,enumerate";
  std::string bench_out;
  int bench_budget = 1, bench_jobs = 1;
  double bench_direction = 45.0;
  std::uint64_t bench_seed = 0;
  bool bench_no_timing = false, bench_force = false;
  cmd_bench->add_option("--networks", bench_networks, "network files, comma separated")->required();
  cmd_bench->add_option("--efields", bench_efields, "E magnitudes (V/km), comma separated")
      ->default_val("5,10,15,20");
  cmd_bench->add_option("--direction", bench_direction, "E direction (deg)")->default_val(45.0);
  cmd_bench->add_option("--budget", bench_budget, "budget V")->required();
  cmd_bench->add_option("--algorithms", bench_algorithms, "of admm,sl,enumerate")
      ->default_val("admm,sl,enumerate");
  cmd_bench->add_option("--jobs", bench_jobs, "concurrent benchmark cells")->default_val(1);
  cmd_bench->add_option("--seed", bench_seed, "RNG seed")->default_val(0);
  cmd_bench->add_flag("--no-timing", bench_no_timing,
                      "write 0 in the wall_time column (byte-reproducible output)");
  cmd_bench->add_flag("--force", bench_force, "bypass the enumeration guard");
  cmd_bench->add_option("--out", bench_out, "output CSV path (default stdout)");

  try {
    app.parse(argc, argv);

    if (cmd_gic->parsed()) {
      AcNetwork ac = load_network(gic_network);
      apply_config_file(ac, config_path);
      const DcNetwork dc = derive_dc_network(ac);
      const GmdScenario scenario = make_scenario(gic_scenario);
      const Eigen::VectorXd xi = materialize_xi(dc, scenario);
      const Placement z = parse_placement(ac, gic_placement);
      const GicSolution sol = gic::solve_gic(dc, xi, z);
      const Eigen::VectorXd theta = gic::all_transformer_theta(ac, dc, sol);

      std::ofstream file;
      std::ostream& os = open_out(file, gic_out);
      os << "kind,id,value,aux\n";
      char buf[160];
      for (int m = 0; m < dc.node_count(); ++m) {
        std::snprintf(buf, sizeof(buf), "node,%d,%.10g,\n", dc.nodes[static_cast<size_t>(m)].id,
                      sol.vd[m]);
        os << buf;
      }
      for (int k = 0; k < dc.edge_count(); ++k) {
        std::snprintf(buf, sizeof(buf), "edge,%d,%.10g,\n", dc.edges[static_cast<size_t>(k)].id,
                      sol.id_flow[k]);
        os << buf;
      }
      for (int t = 0; t < ac.transformer_count(); ++t) {
        const int branch_label =
            ac.branches[static_cast<size_t>(ac.transformer_branches[static_cast<size_t>(t)])].id;
        std::snprintf(buf, sizeof(buf), "transformer,%d,%.10g,%.10g\n", branch_label, theta[t],
                      std::abs(theta[t]));
        os << buf;
      }
      return 0;
    }

    if (cmd_eval->parsed()) {
      AcNetwork ac = load_network(eval_network);
      apply_config_file(ac, config_path);
      const DcNetwork dc = derive_dc_network(ac);
      const GmdScenario scenario = make_scenario(eval_scenario);
      const Placement z = parse_placement(ac, eval_placement);
      EvalOptions opts;
      opts.budget = eval_budget;
      opts.nlp.tol = eval_nlp_tol;
      opts.nlp.max_inner = eval_nlp_iters;
      const EvaluationReport rep = acopf::evaluate_placement(ac, dc, scenario, z, opts);

      std::ofstream file;
      std::ostream& os = open_out(file, eval_out);
      if (eval_json) {
        print_report_json(os, ac, eval_scenario, eval_budget, z, rep);
      } else {
        print_report_csv(os, ac, eval_scenario, eval_budget, z, rep);
      }
      return 0;
    }

    if (cmd_solve->parsed()) {
      AcNetwork ac = load_network(solve_network);
      apply_config_file(ac, config_path);
      const DcNetwork dc = derive_dc_network(ac);
      const GmdScenario scenario = make_scenario(solve_scenario);

      Placement z;
      int iterations = 0;
      bool converged = false;
      if (solve_algorithm == "admm") {
        AdmmOptions opts;
        opts.rho0 = rho0;
        opts.epsilon = eps;
        opts.max_iters = solve_max_iters;
        opts.nrb.enabled = !no_nrb;
        opts.nrb.beta = beta;
        opts.nrb.tau = tau;
        const AdmmResult result = admm::run_admm(ac, dc, scenario, solve_budget, opts);
        write_admm_trace(solve_trace, result);
        z = result.z_b;
        iterations = result.iterations;
        converged = result.converged;
      } else if (solve_algorithm == "sl") {
        SlOptions opts;
        opts.samples = sl_samples;
        opts.step_a = sl_step_a;
        opts.epsilon = sl_eps;
        opts.max_iters = solve_max_iters;
        opts.seed = solve_seed;
        opts.jobs = solve_jobs;
        const SlResult result = sl::run_sl(ac, dc, scenario, solve_budget, opts);
        write_sl_trace(solve_trace, result);
        z = result.best_z;
        iterations = result.iterations;
        converged = result.converged;
      } else {
        throw ValidationError("unknown algorithm '" + solve_algorithm + "' (use admm or sl)");
      }

      EvalOptions eval;
      eval.budget = solve_budget;
      const EvaluationReport rep = acopf::evaluate_placement(ac, dc, scenario, z, eval);
      std::ofstream file;
      std::ostream& os = open_out(file, solve_out);
      os << "algorithm,instance,efield,direction,budget,placement,objective,gen_cost,"
            "shed_penalty,iterations,converged\n";
      char buf[512];
      std::snprintf(buf, sizeof(buf), "%s,%s,%.6g,%.6g,%d,%s,%.10g,%.10g,%.10g,%d,%s\n",
                    solve_algorithm.c_str(), ac.name.c_str(), solve_scenario.efield,
                    solve_scenario.direction, solve_budget,
                    harness::placement_labels(ac, z).c_str(), rep.objective, rep.gen_cost,
                    rep.shed_penalty, iterations, converged ? "yes" : "no");
      os << buf;
      return 0;
    }

    if (cmd_enum->parsed()) {
      AcNetwork ac = load_network(enum_network);
      apply_config_file(ac, config_path);
      const DcNetwork dc = derive_dc_network(ac);
      const GmdScenario scenario = make_scenario(enum_scenario);
      EvalOptions eval;
      const BruteForceResult result =
          harness::brute_force(ac, dc, scenario, enum_budget, eval, enum_force, 4096, enum_jobs);

      std::ofstream file;
      std::ostream& os = open_out(file, enum_out);
      os << "placement,objective,gen_cost,shed_penalty,is_best\n";
      char buf[512];
      for (const auto& entry : result.table) {
        std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g,%.10g,%d\n",
                      harness::placement_labels(ac, entry.z).c_str(), entry.objective,
                      entry.gen_cost, entry.shed_penalty, entry.z == result.best ? 1 : 0);
        os << buf;
      }
      return 0;
    }

    if (cmd_bench->parsed()) {
      BenchmarkOptions opts;
      opts.efields = parse_list(bench_efields);
      opts.direction = bench_direction;
      opts.budget = bench_budget;
      opts.algorithms = split(bench_algorithms);
      opts.jobs = bench_jobs;
      opts.seed = bench_seed;
      opts.sl.seed = bench_seed;
      opts.timing = !bench_no_timing;
      opts.force_enumeration = bench_force;
      const std::vector<BenchmarkRow> rows =
          harness::run_benchmark(split(bench_networks), opts);

      std::ofstream file;
      std::ostream& os = open_out(file, bench_out);
      harness::write_benchmark_csv(os, rows);
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SolveError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
