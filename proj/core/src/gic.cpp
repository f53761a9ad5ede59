#include "gicshield/gic.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "gicshield/errors.hpp"

namespace gicshield {
namespace gic {

GicSolution solve_gic(const DcNetwork& dc, const Eigen::VectorXd& xi, const Placement& z) {
  const int n = dc.node_count();
  const int m = dc.edge_count();
  if (xi.size() != m) throw SolveError("solve_gic: xi dimension mismatch");
  if (static_cast<int>(z.size()) != dc.substation_count()) {
    throw SolveError("solve_gic: placement dimension mismatch");
  }
  for (int zi : z) {
    if (zi != 0 && zi != 1) throw SolveError("solve_gic: placement must be binary");
  }

  // effective grounding per node
  Eigen::VectorXd a_eff = Eigen::VectorXd::Zero(n);
  for (int s = 0; s < dc.substation_count(); ++s) {
    const int node = dc.substation_nodes[static_cast<size_t>(s)];
    a_eff[node] = dc.nodes[static_cast<size_t>(node)].a_ground * (1 - z[static_cast<size_t>(s)]);
  }
  if (a_eff.sum() <= 0.0) {
    throw SolveError("floating network: every grounding path is blocked");
  }

  // (L + diag(a_eff)) v = b, with b_k = sum_{l into k} gamma*xi - sum_{l out of k} gamma*xi
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(4 * m + n));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < m; ++k) {
    const DcEdge& e = dc.edges[static_cast<size_t>(k)];
    trip.emplace_back(e.from_node, e.from_node, e.gamma);
    trip.emplace_back(e.to_node, e.to_node, e.gamma);
    trip.emplace_back(e.from_node, e.to_node, -e.gamma);
    trip.emplace_back(e.to_node, e.from_node, -e.gamma);
    b[e.from_node] -= e.gamma * xi[k];
    b[e.to_node] += e.gamma * xi[k];
  }
  for (int i = 0; i < n; ++i) {
    if (a_eff[i] > 0.0) trip.emplace_back(i, i, a_eff[i]);
  }
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());

  GicSolution sol;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() == Eigen::Success) {
    sol.vd = ldlt.solve(b);
  }
  if (ldlt.info() != Eigen::Success || !sol.vd.allFinite()) {
    // dense fallback
    Eigen::MatrixXd Ad(A);
    Eigen::LDLT<Eigen::MatrixXd> dense(Ad);
    sol.vd = dense.solve(b);
    if (!sol.vd.allFinite()) throw SolveError("solve_gic: factorization failed");
  }

  sol.id_flow.resize(m);
  for (int k = 0; k < m; ++k) {
    const DcEdge& e = dc.edges[static_cast<size_t>(k)];
    sol.id_flow[k] = e.gamma * (sol.vd[e.from_node] - sol.vd[e.to_node] + xi[k]);
  }
  sol.ground_current = a_eff.cwiseProduct(sol.vd);

  // KCL: incoming minus outgoing equals ground current at every node
  Eigen::VectorXd res = -sol.ground_current;
  for (int k = 0; k < m; ++k) {
    const DcEdge& e = dc.edges[static_cast<size_t>(k)];
    res[e.to_node] += sol.id_flow[k];
    res[e.from_node] -= sol.id_flow[k];
  }
  const double scale = std::max(1.0, sol.id_flow.lpNorm<Eigen::Infinity>());
  sol.kcl_residual = res.lpNorm<Eigen::Infinity>() / scale;
  if (sol.kcl_residual > 1e-9) {
    throw SolveError("solve_gic: KCL residual " + std::to_string(sol.kcl_residual) +
                     " exceeds tolerance");
  }
  return sol;
}

double transformer_theta(const TransformerSpec& spec,
                         const std::map<WindingRole, int>& winding_edges,
                         const GicSolution& sol) {
  auto current = [&](WindingRole r) {
    auto it = winding_edges.find(r);
    if (it == winding_edges.end()) {
      throw SolveError(std::string("transformer_theta: missing winding role '") + to_string(r) +
                       "'");
    }
    return sol.id_flow[it->second];
  };
  switch (spec.topology) {
    case TransformerTopology::GWyeGWye:
      return (spec.n_high * current(WindingRole::High) + spec.n_low * current(WindingRole::Low)) /
             spec.n_high;
    case TransformerTopology::GWyeGWyeAuto:
      return (spec.n_series * current(WindingRole::Series) +
              spec.n_common * current(WindingRole::Common)) /
             (spec.n_series + spec.n_common);
    case TransformerTopology::GWyeDeltaGSU:
      return current(WindingRole::High);
  }
  return 0.0;
}

Eigen::VectorXd all_transformer_theta(const AcNetwork& ac, const DcNetwork& dc,
                                      const GicSolution& sol) {
  Eigen::VectorXd theta(ac.transformer_count());
  for (int t = 0; t < ac.transformer_count(); ++t) {
    theta[t] = transformer_theta(ac.transformer(t),
                                 dc.transformer_winding_edges[static_cast<size_t>(t)], sol);
  }
  return theta;
}

EffectiveGic effective_gic(const Eigen::VectorXd& theta) {
  EffectiveGic eff;
  eff.theta = theta;
  eff.i_eff = theta.cwiseAbs();
  return eff;
}

bool fully_blocked(const DcNetwork& dc, const Placement& z) {
  if (static_cast<int>(z.size()) != dc.substation_count()) {
    throw SolveError("fully_blocked: placement dimension mismatch");
  }
  for (int s = 0; s < dc.substation_count(); ++s) {
    const int node = dc.substation_nodes[static_cast<size_t>(s)];
    if (dc.nodes[static_cast<size_t>(node)].a_ground * (1 - z[static_cast<size_t>(s)]) > 0.0) {
      return false;
    }
  }
  return true;
}

void verify_windings_dead_when_blocked(const DcNetwork& dc) {
  // peel degree-1 nodes; edges removed this way carry no current in the
  // ungrounded circuit
  std::vector<int> degree(static_cast<size_t>(dc.node_count()), 0);
  std::vector<char> edge_alive(static_cast<size_t>(dc.edge_count()), 1);
  for (const auto& e : dc.edges) {
    ++degree[static_cast<size_t>(e.from_node)];
    ++degree[static_cast<size_t>(e.to_node)];
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (int k = 0; k < dc.edge_count(); ++k) {
      if (!edge_alive[static_cast<size_t>(k)]) continue;
      const DcEdge& e = dc.edges[static_cast<size_t>(k)];
      if (degree[static_cast<size_t>(e.from_node)] == 1 ||
          degree[static_cast<size_t>(e.to_node)] == 1) {
        edge_alive[static_cast<size_t>(k)] = 0;
        --degree[static_cast<size_t>(e.from_node)];
        --degree[static_cast<size_t>(e.to_node)];
        changed = true;
      }
    }
  }
  for (int k = 0; k < dc.edge_count(); ++k) {
    if (edge_alive[static_cast<size_t>(k)] &&
        dc.edges[static_cast<size_t>(k)].is_transformer_winding) {
      throw SolveError(
          "floating network: every grounding path is blocked and transformer winding edge " +
          std::to_string(dc.edges[static_cast<size_t>(k)].id) +
          " sits in a circulating loop");
    }
  }
}

} // namespace gic
} // namespace gicshield
