#pragma once

#include <map>

#include <Eigen/Core>

#include "gicshield/common.hpp"
#include "gicshield/network.hpp"

namespace gicshield {

/// Solution of the DC GIC circuit at a fixed binary placement.
struct GicSolution {
  Eigen::VectorXd vd;              // node voltages (V), dense node order
  Eigen::VectorXd id_flow;         // edge currents (A), positive from->to
  Eigen::VectorXd ground_current;  // a_m * vd_m * (1 - z_m) per node (A)
  double kcl_residual = 0.0;       // max relative KCL residual
};

/// Signed turns-combined winding current and its magnitude, per
/// transformer in AcNetwork::transformer_branches order.
struct EffectiveGic {
  Eigen::VectorXd theta;  // A, signed
  Eigen::VectorXd i_eff;  // A, |theta|
};

namespace gic {

/// Solve the grounded-Laplacian system (L + diag(a_m(1-z_m))) v = b assembled
/// from edge conductances and induced sources. z is indexed by substation
/// (dense substation order). Throws SolveError("floating network") when every
/// grounding path is blocked; throws on non-binary z.
GicSolution solve_gic(const DcNetwork& dc, const Eigen::VectorXd& xi, const Placement& z);

/// Turns-weighted combination of winding currents for one transformer.
/// `winding_edges` maps role -> dense DC edge index
/// (DcNetwork::transformer_winding_edges entry).
double transformer_theta(const TransformerSpec& spec,
                         const std::map<WindingRole, int>& winding_edges,
                         const GicSolution& sol);

/// Theta for every transformer of the network, in transformer order.
Eigen::VectorXd all_transformer_theta(const AcNetwork& ac, const DcNetwork& dc,
                                      const GicSolution& sol);

EffectiveGic effective_gic(const Eigen::VectorXd& theta);

/// True when the placement removes every grounding path.
bool fully_blocked(const DcNetwork& dc, const Placement& z);

/// For a fully blocked network, winding currents vanish exactly when every
/// winding edge hangs off the cycle space of the ungrounded graph
/// (degree-1 peeling leaves no winding behind). Throws
/// SolveError("floating network...") when a winding survives in a loop,
/// since the circulating GIC would then depend on an arbitrary reference.
void verify_windings_dead_when_blocked(const DcNetwork& dc);

} // namespace gic
} // namespace gicshield
