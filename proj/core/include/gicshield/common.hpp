#pragma once

#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace gicshield {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Binary placement of blocking devices, one entry per substation in
/// dense substation order (0 = no device, 1 = device installed).
using Placement = std::vector<int>;

inline int placement_count(const Placement& z) {
  return std::accumulate(z.begin(), z.end(), 0);
}

inline std::string placement_bits(const Placement& z) {
  std::string s;
  s.reserve(z.size());
  for (int v : z) s.push_back(v ? '1' : '0');
  return s;
}

enum class SolveStatus {
  OptimalTolerance,
  IterationLimit,
  Infeasible,
};

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::OptimalTolerance: return "optimal-tolerance";
    case SolveStatus::IterationLimit: return "iteration-limit";
    case SolveStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

} // namespace gicshield
