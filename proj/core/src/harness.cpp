#include "gicshield/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <thread>

#include "gicshield/errors.hpp"

namespace gicshield {
namespace harness {

namespace {

std::size_t feasible_count(int s, int budget) {
  // sum_{k<=V} C(S,k), saturating
  long double total = 0.0L;
  long double binom = 1.0L;
  for (int k = 0; k <= std::min(s, budget); ++k) {
    if (k > 0) binom = binom * static_cast<long double>(s - k + 1) / static_cast<long double>(k);
    total += binom;
    if (total > 1e18L) return static_cast<std::size_t>(-1);
  }
  return static_cast<std::size_t>(total);
}

// Lexicographic enumeration of binary vectors (z_0 most significant).
std::vector<Placement> feasible_placements(int s, int budget) {
  std::vector<Placement> out;
  const std::uint64_t total = 1ull << s;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    Placement z(static_cast<size_t>(s), 0);
    int count = 0;
    for (int i = 0; i < s; ++i) {
      if (mask & (1ull << (s - 1 - i))) {
        z[static_cast<size_t>(i)] = 1;
        ++count;
      }
    }
    if (count <= budget) out.push_back(std::move(z));
  }
  return out;
}

} // namespace

BruteForceResult brute_force(const AcNetwork& ac, const DcNetwork& dc, const GmdScenario& scenario,
                             int budget, const EvalOptions& opts, bool force, std::size_t guard,
                             int jobs) {
  if (budget < 0) throw ValidationError("brute_force: budget must be nonnegative");
  const int s = ac.substation_count();
  if (s > 62) throw ValidationError("brute_force: too many substations to enumerate");
  const std::size_t count = feasible_count(s, budget);
  if (count > guard && !force) {
    throw ValidationError("brute_force: " + std::to_string(count) +
                          " evaluations exceed the guard of " + std::to_string(guard) +
                          " (pass --force to override)");
  }

  EvalOptions eval = opts;
  eval.budget = budget;
  const std::vector<Placement> placements = feasible_placements(s, budget);

  BruteForceResult result;
  result.table.resize(placements.size());

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= placements.size()) break;
      const EvaluationReport rep = acopf::evaluate_placement(ac, dc, scenario, placements[i], eval);
      result.table[i] = {placements[i], rep.objective, rep.gen_cost, rep.shed_penalty};
    }
  };
  const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(placements.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (const auto& entry : result.table) {
    if (entry.objective < result.best_objective) {
      result.best_objective = entry.objective;
      result.best = entry.z;  // lexicographic order makes first win the tiebreak
    }
  }
  return result;
}

std::string placement_labels(const AcNetwork& ac, const Placement& z) {
  std::string out;
  for (size_t i = 0; i < z.size(); ++i) {
    if (!z[i]) continue;
    if (!out.empty()) out.push_back(';');
    out += std::to_string(ac.substations[i].id);
  }
  return out;
}

namespace {

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

BenchmarkRow run_cell(const AcNetwork& ac, const DcNetwork& dc, double efield,
                      const std::string& algorithm, const BenchmarkOptions& opts) {
  BenchmarkRow row;
  row.instance = ac.name;
  row.efield = efield;
  row.direction = opts.direction;
  row.budget = opts.budget;
  row.algorithm = algorithm;
  row.status = "ok";

  const GmdScenario scenario = GmdScenario::uniform_field(efield, opts.direction);
  const auto start = std::chrono::steady_clock::now();
  try {
    Placement z;
    if (algorithm == "admm") {
      AdmmResult r = admm::run_admm(ac, dc, scenario, opts.budget, opts.admm);
      z = r.z_b;
      row.iterations = r.iterations;
    } else if (algorithm == "sl") {
      SlOptions sl_opts = opts.sl;
      sl_opts.seed = opts.seed;
      SlResult r = sl::run_sl(ac, dc, scenario, opts.budget, sl_opts);
      z = r.best_z;
      row.iterations = r.iterations;
    } else if (algorithm == "enumerate") {
      BruteForceResult r = brute_force(ac, dc, scenario, opts.budget, opts.eval,
                                       opts.force_enumeration, opts.enumeration_guard);
      z = r.best;
      row.iterations = static_cast<int>(r.table.size());
    } else {
      throw ValidationError("unknown algorithm '" + algorithm + "'");
    }

    // quality-assessment protocol: re-evaluate the reported placement
    EvalOptions eval = opts.eval;
    eval.budget = opts.budget;
    const EvaluationReport rep = acopf::evaluate_placement(ac, dc, scenario, z, eval);
    row.objective = rep.objective;
    row.gen_cost = rep.gen_cost;
    row.shed_penalty = rep.shed_penalty;
    row.placement = placement_labels(ac, z);
    if (rep.solver_status != SolveStatus::OptimalTolerance) {
      row.status = std::string("ok (nlp: ") + to_string(rep.solver_status) + ")";
    }
  } catch (const std::exception& e) {
    row.status = sanitize(std::string("error: ") + e.what());
  }
  const auto stop = std::chrono::steady_clock::now();
  row.wall_time = opts.timing ? std::chrono::duration<double>(stop - start).count() : 0.0;
  return row;
}

} // namespace

std::vector<BenchmarkRow> run_benchmark(const std::vector<std::string>& network_paths,
                                        const BenchmarkOptions& opts) {
  struct Instance {
    AcNetwork ac;
    DcNetwork dc;
  };
  std::vector<Instance> instances;
  instances.reserve(network_paths.size());
  for (const auto& path : network_paths) {
    Instance inst;
    inst.ac = load_network(path);
    inst.dc = derive_dc_network(inst.ac);
    instances.push_back(std::move(inst));
  }

  struct Cell {
    const Instance* inst;
    double efield;
    std::string algorithm;
  };
  std::vector<Cell> cells;
  for (const auto& inst : instances) {
    for (double e : opts.efields) {
      for (const auto& alg : opts.algorithms) {
        cells.push_back({&inst, e, alg});
      }
    }
  }

  std::vector<BenchmarkRow> rows(cells.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= cells.size()) break;
      rows[i] = run_cell(cells[i].inst->ac, cells[i].inst->dc, cells[i].efield,
                         cells[i].algorithm, opts);
    }
  };
  const int n_workers = std::max(1, std::min<int>(opts.jobs, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return rows;
}

void write_benchmark_csv(std::ostream& os, const std::vector<BenchmarkRow>& rows) {
  os << "instance,efield,direction,budget,algorithm,objective,gen_cost,shed_penalty,"
        "placement,wall_time,iterations,status\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.6g,%.6g,%d,%s,%.10g,%.10g,%.10g,%s,%.3f,%d,%s\n",
                  r.instance.c_str(), r.efield, r.direction, r.budget, r.algorithm.c_str(),
                  r.objective, r.gen_cost, r.shed_penalty, r.placement.c_str(), r.wall_time,
                  r.iterations, r.status.c_str());
    os << buf;
  }
}

} // namespace harness
} // namespace gicshield
