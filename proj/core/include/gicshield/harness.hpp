#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gicshield/acopf.hpp"
#include "gicshield/admm.hpp"
#include "gicshield/common.hpp"
#include "gicshield/network.hpp"
#include "gicshield/stochastic.hpp"

namespace gicshield {

struct BruteForceEntry {
  Placement z;
  double objective = 0.0;
  double gen_cost = 0.0;
  double shed_penalty = 0.0;
};

struct BruteForceResult {
  Placement best;
  double best_objective = kInf;
  std::vector<BruteForceEntry> table;  // lexicographic placement order
};

struct BenchmarkRow {
  std::string instance;
  double efield = 0.0;     // V/km
  double direction = 0.0;  // degrees
  int budget = 0;
  std::string algorithm;
  double objective = 0.0;
  double gen_cost = 0.0;
  double shed_penalty = 0.0;
  std::string placement;  // substation labels joined by ';'
  double wall_time = 0.0; // seconds
  int iterations = 0;
  std::string status;  // "ok" or "error: ..."
};

struct BenchmarkOptions {
  std::vector<double> efields;
  double direction = 45.0;
  int budget = 1;
  std::vector<std::string> algorithms;  // of {"admm", "sl", "enumerate"}
  int jobs = 1;
  bool timing = true;  // false -> wall_time column written as 0
  std::uint64_t seed = 0;
  AdmmOptions admm;
  SlOptions sl;
  EvalOptions eval;
  bool force_enumeration = false;
  std::size_t enumeration_guard = 4096;
};

namespace harness {

/// Evaluate F(z) for every z with sum(z) <= budget; the argmin breaks
/// ties by lexicographically smallest placement. Refuses to enumerate
/// more than `guard` placements unless force is set.
BruteForceResult brute_force(const AcNetwork& ac, const DcNetwork& dc, const GmdScenario& scenario,
                             int budget, const EvalOptions& opts, bool force = false,
                             std::size_t guard = 4096, int jobs = 1);

/// One row per (network, efield, algorithm): run the algorithm, then
/// re-evaluate its placement from scratch (the quality-assessment
/// protocol). Failures are recorded in the row's status; the run
/// continues. Rows come back in deterministic input order.
std::vector<BenchmarkRow> run_benchmark(const std::vector<std::string>& network_paths,
                                        const BenchmarkOptions& opts);

std::string placement_labels(const AcNetwork& ac, const Placement& z);

void write_benchmark_csv(std::ostream& os, const std::vector<BenchmarkRow>& rows);

} // namespace harness
} // namespace gicshield
