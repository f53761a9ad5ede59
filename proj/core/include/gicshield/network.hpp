#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "gicshield/common.hpp"

namespace gicshield {

struct Bus {
  int id = 0;  // file label
  double vr_min = 0.0, vr_max = 0.0;  // per-unit real voltage bounds
  double vi_min = 0.0, vi_max = 0.0;  // per-unit imaginary voltage bounds
  double g_shunt = 0.0, b_shunt = 0.0;
  double p_demand = 0.0, q_demand = 0.0;
  bool has_coords = false;
  double latitude = 0.0, longitude = 0.0;  // degrees
};

struct Generator {
  int id = 0;
  int bus = -1;  // dense bus index after load
  double c1 = 0.0, c2 = 0.0;  // $/pu, $/pu^2
  double p_min = 0.0, p_max = 0.0;
  double q_min = 0.0, q_max = 0.0;
};

enum class TransformerTopology { GWyeGWye, GWyeGWyeAuto, GWyeDeltaGSU };

enum class WindingRole { High, Low, Series, Common };

const char* to_string(TransformerTopology t);
const char* to_string(WindingRole r);

struct TransformerSpec {
  TransformerTopology topology = TransformerTopology::GWyeGWye;
  // Winding turn counts; only the roles the topology demands are meaningful.
  double n_high = 0.0, n_low = 0.0, n_series = 0.0, n_common = 0.0;
  double k_loss = 0.0;     // pu reactive per (pu voltage * ampere)
  double i_eff_max = 0.0;  // amperes
  // Winding role -> DC edge label as declared in the file. Dense indices
  // live in DcNetwork::transformer_winding_edges after derivation.
  std::map<WindingRole, int> winding_edges;
};

enum class BranchKind { Line, Transformer };

struct Branch {
  int id = 0;
  int from_bus = -1, to_bus = -1;  // dense bus indices
  double g = 0.0, b = 0.0;         // series admittance (pu)
  double b_charge = 0.0;           // line charging (pu)
  double s_max = 0.0;              // apparent power limit (pu)
  double theta_min = 0.0, theta_max = 0.0;  // radians, inside (-pi/2, pi/2)
  BranchKind kind = BranchKind::Line;
  std::optional<TransformerSpec> transformer;
};

struct Substation {
  int id = 0;        // file label; placement vectors follow label order
  int dc_node = -1;  // dense DC node index after derive (label in the file)
  double a_ground = 0.0;  // inverse ground resistance (siemens)
  bool has_coords = false;
  double latitude = 0.0, longitude = 0.0;
};

struct DcNode {
  int id = 0;  // file label (bus label for neutral nodes)
  double a_ground = 0.0;  // 0 on non-substation nodes
  bool is_substation = false;
  bool has_coords = false;
  double latitude = 0.0, longitude = 0.0;
};

struct DcEdge {
  int id = 0;
  int from_node = -1, to_node = -1;  // dense node indices
  double gamma = 0.0;                // siemens
  int source_ac_branch = -1;         // dense branch index
  bool is_transformer_winding = false;
};

/// DC companion circuit: one node per AC bus neutral plus one per
/// substation, one edge per transmission line and per declared
/// transformer winding. Immutable after derivation.
struct DcNetwork {
  std::vector<DcNode> nodes;  // sorted by label
  std::vector<DcEdge> edges;  // sorted by label
  std::vector<int> substation_nodes;  // dense node index per substation, in substation order
  // Per transformer (in AcNetwork::transformer_branches order):
  // winding role -> dense edge index.
  std::vector<std::map<WindingRole, int>> transformer_winding_edges;
  std::unordered_map<int, int> node_index_of_label;
  std::unordered_map<int, int> edge_index_of_label;

  int node_count() const { return static_cast<int>(nodes.size()); }
  int edge_count() const { return static_cast<int>(edges.size()); }
  int substation_count() const { return static_cast<int>(substation_nodes.size()); }
};

struct NetworkConfig {
  double kappa = 1e5;  // $/pu penalty on load shedding
  double nlp_tol = 1e-6;
  int nlp_max_outer = 50;
  int nlp_max_inner = 500;
};

/// Raw DC edge declaration from the network file (label space).
struct DcEdgeDecl {
  int id = 0;
  int from_node = 0, to_node = 0;  // bus label or substation dc_node label
  double gamma = 0.0;
  int source_branch = 0;  // branch label
  bool winding = false;
};

/// Immutable AC grid model plus the declarations needed to derive the
/// DC companion network. Indices are dense and 0-based after load;
/// label<->index maps are retained for reporting.
struct AcNetwork {
  std::string name;
  double mva_base = 100.0;
  NetworkConfig config;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Branch> branches;
  std::vector<Substation> substations;
  std::vector<DcEdgeDecl> dc_edge_decls;
  std::vector<int> transformer_branches;  // dense branch indices, ascending

  std::unordered_map<int, int> bus_index_of_label;
  std::unordered_map<int, int> branch_index_of_label;
  std::unordered_map<int, int> substation_index_of_label;

  int bus_count() const { return static_cast<int>(buses.size()); }
  int branch_count() const { return static_cast<int>(branches.size()); }
  int generator_count() const { return static_cast<int>(generators.size()); }
  int substation_count() const { return static_cast<int>(substations.size()); }
  int transformer_count() const { return static_cast<int>(transformer_branches.size()); }

  const TransformerSpec& transformer(int t) const {
    return *branches[static_cast<size_t>(transformer_branches[static_cast<size_t>(t)])].transformer;
  }
};

/// GMD scenario: either explicit per-edge induced voltages (keyed by DC
/// edge label, volts) or a uniform E-field to project onto line geometry.
struct GmdScenario {
  struct Field {
    double magnitude = 0.0;      // V/km
    double direction_deg = 0.0;  // compass degrees, clockwise from north
  };
  std::optional<std::map<int, double>> explicit_xi;
  std::optional<Field> field;

  static GmdScenario uniform_field(double magnitude_vpkm, double direction_deg) {
    GmdScenario s;
    s.field = Field{magnitude_vpkm, direction_deg};
    return s;
  }
};

/// Parse and validate a network file. Throws ParseError on malformed
/// input, ValidationError naming the first violated invariant.
AcNetwork load_network(const std::string& path);

/// Parse a network from an already-read document (used by load_network
/// and by tests that synthesize fixtures in memory).
AcNetwork load_network_from_string(const std::string& text, const std::string& name_hint = "");

/// Assemble the DC companion network from the AC model, substation
/// grounding data, and the declared DC edges.
DcNetwork derive_dc_network(const AcNetwork& ac);

/// Materialize per-edge induced voltage sources (volts, dense edge order).
/// Field scenarios project E onto each line's equirectangular displacement;
/// transformer-winding edges carry exactly zero.
Eigen::VectorXd materialize_xi(const DcNetwork& dc, const GmdScenario& scenario);

} // namespace gicshield
