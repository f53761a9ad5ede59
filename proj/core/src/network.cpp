#include "gicshield/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gicshield/errors.hpp"

namespace gicshield {

namespace {

using nlohmann::json;

constexpr double kPi = 3.14159265358979323846;
constexpr double kEarthRadiusKm = 6371.0;

double get_num(const json& rec, const char* key, const std::string& ctx) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_number()) {
    throw ParseError(ctx + ": missing or non-numeric field '" + key + "'");
  }
  return it->get<double>();
}

double get_num_or(const json& rec, const char* key, double fallback, const std::string& ctx) {
  auto it = rec.find(key);
  if (it == rec.end()) return fallback;
  if (!it->is_number()) throw ParseError(ctx + ": non-numeric field '" + key + "'");
  return it->get<double>();
}

int get_int(const json& rec, const char* key, const std::string& ctx) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_number_integer()) {
    throw ParseError(ctx + ": missing or non-integer field '" + key + "'");
  }
  return it->get<int>();
}

std::string get_str(const json& rec, const char* key, const std::string& ctx) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_string()) {
    throw ParseError(ctx + ": missing or non-string field '" + key + "'");
  }
  return it->get<std::string>();
}

const json& get_array(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end() || !it->is_array()) {
    throw ParseError(std::string("network file: missing or non-array section '") + key + "'");
  }
  return *it;
}

TransformerTopology parse_topology(const std::string& s, const std::string& ctx) {
  if (s == "gwye_gwye") return TransformerTopology::GWyeGWye;
  if (s == "gwye_gwye_auto") return TransformerTopology::GWyeGWyeAuto;
  if (s == "gwye_delta_gsu") return TransformerTopology::GWyeDeltaGSU;
  throw ParseError(ctx + ": unknown transformer topology '" + s + "'");
}

std::vector<WindingRole> required_roles(TransformerTopology t) {
  switch (t) {
    case TransformerTopology::GWyeGWye: return {WindingRole::High, WindingRole::Low};
    case TransformerTopology::GWyeGWyeAuto: return {WindingRole::Series, WindingRole::Common};
    case TransformerTopology::GWyeDeltaGSU: return {WindingRole::High};
  }
  return {};
}

WindingRole parse_role(const std::string& s, const std::string& ctx) {
  if (s == "high") return WindingRole::High;
  if (s == "low") return WindingRole::Low;
  if (s == "series") return WindingRole::Series;
  if (s == "common") return WindingRole::Common;
  throw ParseError(ctx + ": unknown winding role '" + s + "'");
}

template <typename T>
void sort_by_id(std::vector<T>& v) {
  std::sort(v.begin(), v.end(), [](const T& a, const T& b) { return a.id < b.id; });
}

} // namespace

const char* to_string(TransformerTopology t) {
  switch (t) {
    case TransformerTopology::GWyeGWye: return "gwye_gwye";
    case TransformerTopology::GWyeGWyeAuto: return "gwye_gwye_auto";
    case TransformerTopology::GWyeDeltaGSU: return "gwye_delta_gsu";
  }
  return "unknown";
}

const char* to_string(WindingRole r) {
  switch (r) {
    case WindingRole::High: return "high";
    case WindingRole::Low: return "low";
    case WindingRole::Series: return "series";
    case WindingRole::Common: return "common";
  }
  return "unknown";
}

AcNetwork load_network_from_string(const std::string& text, const std::string& name_hint) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError("network file is not valid JSON: " + std::string(e.what()));
  }
  if (!doc.is_object()) throw ParseError("network file: top level must be an object");

  AcNetwork net;
  net.name = doc.value("name", name_hint);
  net.mva_base = get_num_or(doc, "mva_base", 100.0, "network file");
  if (!(net.mva_base > 0.0)) throw ValidationError("mva_base must be positive");

  if (doc.contains("config")) {
    const json& cfg = doc["config"];
    if (!cfg.is_object()) throw ParseError("config: must be an object");
    net.config.kappa = get_num_or(cfg, "kappa", net.config.kappa, "config");
    net.config.nlp_tol = get_num_or(cfg, "nlp_tol", net.config.nlp_tol, "config");
    net.config.nlp_max_outer =
        static_cast<int>(get_num_or(cfg, "nlp_max_outer", net.config.nlp_max_outer, "config"));
    net.config.nlp_max_inner =
        static_cast<int>(get_num_or(cfg, "nlp_max_inner", net.config.nlp_max_inner, "config"));
    if (!(net.config.kappa >= 0.0)) throw ValidationError("config: kappa must be nonnegative");
  }

  // --- buses ---
  for (const json& rec : get_array(doc, "buses")) {
    Bus b;
    b.id = get_int(rec, "id", "bus");
    const std::string ctx = "bus " + std::to_string(b.id);
    b.vr_min = get_num(rec, "vr_min", ctx);
    b.vr_max = get_num(rec, "vr_max", ctx);
    b.vi_min = get_num(rec, "vi_min", ctx);
    b.vi_max = get_num(rec, "vi_max", ctx);
    b.g_shunt = get_num_or(rec, "g_shunt", 0.0, ctx);
    b.b_shunt = get_num_or(rec, "b_shunt", 0.0, ctx);
    b.p_demand = get_num_or(rec, "p_demand", 0.0, ctx);
    b.q_demand = get_num_or(rec, "q_demand", 0.0, ctx);
    if (rec.contains("latitude") || rec.contains("longitude")) {
      b.latitude = get_num(rec, "latitude", ctx);
      b.longitude = get_num(rec, "longitude", ctx);
      b.has_coords = true;
    }
    if (b.vr_min > b.vr_max) throw ValidationError(ctx + ": vr_min > vr_max");
    if (b.vi_min > b.vi_max) throw ValidationError(ctx + ": vi_min > vi_max");
    if (!std::isfinite(b.p_demand) || !std::isfinite(b.q_demand)) {
      throw ValidationError(ctx + ": non-finite demand");
    }
    net.buses.push_back(b);
  }
  sort_by_id(net.buses);
  for (int i = 0; i < net.bus_count(); ++i) {
    if (!net.bus_index_of_label.emplace(net.buses[static_cast<size_t>(i)].id, i).second) {
      throw ValidationError("duplicate bus id " + std::to_string(net.buses[static_cast<size_t>(i)].id));
    }
  }

  auto bus_index = [&](int label, const std::string& ctx) {
    auto it = net.bus_index_of_label.find(label);
    if (it == net.bus_index_of_label.end()) {
      throw ValidationError(ctx + ": references unknown bus " + std::to_string(label));
    }
    return it->second;
  };

  // --- generators ---
  for (const json& rec : get_array(doc, "generators")) {
    Generator g;
    g.id = get_int(rec, "id", "generator");
    const std::string ctx = "generator " + std::to_string(g.id);
    g.bus = bus_index(get_int(rec, "bus", ctx), ctx);
    g.c1 = get_num(rec, "c1", ctx);
    g.c2 = get_num(rec, "c2", ctx);
    g.p_min = get_num(rec, "p_min", ctx);
    g.p_max = get_num(rec, "p_max", ctx);
    g.q_min = get_num(rec, "q_min", ctx);
    g.q_max = get_num(rec, "q_max", ctx);
    if (g.p_min > g.p_max) throw ValidationError(ctx + ": p_min > p_max");
    if (g.q_min > g.q_max) throw ValidationError(ctx + ": q_min > q_max");
    if (g.c2 < 0.0) throw ValidationError(ctx + ": c2 must be nonnegative");
    net.generators.push_back(g);
  }
  sort_by_id(net.generators);
  {
    std::set<int> ids;
    for (const auto& g : net.generators) {
      if (!ids.insert(g.id).second) {
        throw ValidationError("duplicate generator id " + std::to_string(g.id));
      }
    }
  }

  // --- branches ---
  for (const json& rec : get_array(doc, "branches")) {
    Branch br;
    br.id = get_int(rec, "id", "branch");
    const std::string ctx = "branch " + std::to_string(br.id);
    br.from_bus = bus_index(get_int(rec, "from", ctx), ctx);
    br.to_bus = bus_index(get_int(rec, "to", ctx), ctx);
    br.g = get_num(rec, "g", ctx);
    br.b = get_num(rec, "b", ctx);
    br.b_charge = get_num_or(rec, "b_charge", 0.0, ctx);
    br.s_max = get_num(rec, "s_max", ctx);
    br.theta_min = get_num(rec, "theta_min_deg", ctx) * kPi / 180.0;
    br.theta_max = get_num(rec, "theta_max_deg", ctx) * kPi / 180.0;
    const std::string kind = get_str(rec, "kind", ctx);
    if (kind == "line") {
      br.kind = BranchKind::Line;
    } else if (kind == "transformer") {
      br.kind = BranchKind::Transformer;
    } else {
      throw ParseError(ctx + ": unknown kind '" + kind + "'");
    }
    if (br.theta_min > br.theta_max) throw ValidationError(ctx + ": theta_min > theta_max");
    if (br.theta_min <= -kPi / 2 || br.theta_max >= kPi / 2) {
      throw ValidationError(ctx + ": angle bounds must lie strictly inside (-90, 90) degrees");
    }
    if (!(br.s_max > 0.0)) throw ValidationError(ctx + ": s_max must be positive");
    if (br.from_bus == br.to_bus) throw ValidationError(ctx + ": self-loop");
    net.branches.push_back(br);
  }
  sort_by_id(net.branches);
  for (int i = 0; i < net.branch_count(); ++i) {
    if (!net.branch_index_of_label.emplace(net.branches[static_cast<size_t>(i)].id, i).second) {
      throw ValidationError("duplicate branch id " +
                            std::to_string(net.branches[static_cast<size_t>(i)].id));
    }
  }

  // --- transformers ---
  for (const json& rec : get_array(doc, "transformers")) {
    const int branch_label = get_int(rec, "branch", "transformer");
    const std::string ctx = "transformer at branch " + std::to_string(branch_label);
    auto it = net.branch_index_of_label.find(branch_label);
    if (it == net.branch_index_of_label.end()) {
      throw ValidationError(ctx + ": references unknown branch");
    }
    Branch& br = net.branches[static_cast<size_t>(it->second)];
    if (br.kind != BranchKind::Transformer) {
      throw ValidationError(ctx + ": branch is not of kind transformer");
    }
    if (br.transformer.has_value()) throw ValidationError(ctx + ": duplicate transformer record");

    TransformerSpec spec;
    spec.topology = parse_topology(get_str(rec, "topology", ctx), ctx);
    if (rec.contains("turns")) {
      const json& turns = rec["turns"];
      if (!turns.is_object()) throw ParseError(ctx + ": 'turns' must be an object");
      spec.n_high = get_num_or(turns, "high", 0.0, ctx);
      spec.n_low = get_num_or(turns, "low", 0.0, ctx);
      spec.n_series = get_num_or(turns, "series", 0.0, ctx);
      spec.n_common = get_num_or(turns, "common", 0.0, ctx);
    }
    spec.k_loss = get_num(rec, "k_loss", ctx);
    spec.i_eff_max = get_num(rec, "i_eff_max", ctx);
    if (rec.contains("winding_edges")) {
      const json& we = rec["winding_edges"];
      if (!we.is_object()) throw ParseError(ctx + ": 'winding_edges' must be an object");
      for (auto el = we.begin(); el != we.end(); ++el) {
        if (!el.value().is_number_integer()) {
          throw ParseError(ctx + ": winding edge labels must be integers");
        }
        spec.winding_edges[parse_role(el.key(), ctx)] = el.value().get<int>();
      }
    }

    // invariants
    if (spec.k_loss < 0.0) throw ValidationError(ctx + ": k_loss must be nonnegative");
    if (!(spec.i_eff_max > 0.0)) throw ValidationError(ctx + ": i_eff_max must be positive");
    const auto roles = required_roles(spec.topology);
    for (WindingRole r : roles) {
      if (!spec.winding_edges.count(r)) {
        throw ValidationError(ctx + ": winding_edges missing role '" + to_string(r) + "'");
      }
    }
    if (spec.winding_edges.size() != roles.size()) {
      throw ValidationError(ctx + ": winding_edges declares roles the topology does not use");
    }
    auto turns_of = [&](WindingRole r) {
      switch (r) {
        case WindingRole::High: return spec.n_high;
        case WindingRole::Low: return spec.n_low;
        case WindingRole::Series: return spec.n_series;
        case WindingRole::Common: return spec.n_common;
      }
      return 0.0;
    };
    for (WindingRole r : roles) {
      if (!(turns_of(r) > 0.0)) {
        throw ValidationError(ctx + ": turn count for role '" + std::string(to_string(r)) +
                              "' must be positive");
      }
    }
    br.transformer = spec;
  }
  for (int i = 0; i < net.branch_count(); ++i) {
    const Branch& br = net.branches[static_cast<size_t>(i)];
    if (br.kind == BranchKind::Transformer && !br.transformer.has_value()) {
      throw ValidationError("branch " + std::to_string(br.id) +
                            " has kind transformer but no transformer record");
    }
    if (br.kind == BranchKind::Transformer) net.transformer_branches.push_back(i);
  }

  // --- substations ---
  for (const json& rec : get_array(doc, "substations")) {
    Substation s;
    s.id = get_int(rec, "id", "substation");
    const std::string ctx = "substation " + std::to_string(s.id);
    s.dc_node = get_int(rec, "dc_node", ctx);  // label until derive
    s.a_ground = get_num(rec, "a_ground", ctx);
    if (rec.contains("latitude") || rec.contains("longitude")) {
      s.latitude = get_num(rec, "latitude", ctx);
      s.longitude = get_num(rec, "longitude", ctx);
      s.has_coords = true;
    }
    if (!(s.a_ground > 0.0)) throw ValidationError(ctx + ": a_ground must be positive");
    net.substations.push_back(s);
  }
  sort_by_id(net.substations);
  {
    std::set<int> ids, dc_labels;
    for (int i = 0; i < net.substation_count(); ++i) {
      const Substation& s = net.substations[static_cast<size_t>(i)];
      if (!ids.insert(s.id).second) {
        throw ValidationError("duplicate substation id " + std::to_string(s.id));
      }
      if (net.bus_index_of_label.count(s.dc_node)) {
        throw ValidationError("substation " + std::to_string(s.id) +
                              ": dc_node label collides with bus " + std::to_string(s.dc_node));
      }
      if (!dc_labels.insert(s.dc_node).second) {
        throw ValidationError("substation " + std::to_string(s.id) + ": duplicate dc_node label");
      }
      net.substation_index_of_label.emplace(s.id, i);
    }
  }

  // --- dc edges ---
  std::set<int> node_labels;
  for (const auto& b : net.buses) node_labels.insert(b.id);
  for (const auto& s : net.substations) node_labels.insert(s.dc_node);

  for (const json& rec : get_array(doc, "dc_edges")) {
    DcEdgeDecl d;
    d.id = get_int(rec, "id", "dc_edge");
    const std::string ctx = "dc_edge " + std::to_string(d.id);
    d.from_node = get_int(rec, "from_node", ctx);
    d.to_node = get_int(rec, "to_node", ctx);
    d.gamma = get_num(rec, "gamma", ctx);
    d.source_branch = get_int(rec, "source_branch", ctx);
    auto w = rec.find("winding");
    if (w == rec.end() || !w->is_boolean()) {
      throw ParseError(ctx + ": missing or non-boolean field 'winding'");
    }
    d.winding = w->get<bool>();
    if (!(d.gamma > 0.0)) throw ValidationError(ctx + ": gamma must be positive");
    if (!node_labels.count(d.from_node)) {
      throw ValidationError(ctx + ": unknown from_node " + std::to_string(d.from_node));
    }
    if (!node_labels.count(d.to_node)) {
      throw ValidationError(ctx + ": unknown to_node " + std::to_string(d.to_node));
    }
    if (d.from_node == d.to_node) throw ValidationError(ctx + ": self-loop");
    auto bit = net.branch_index_of_label.find(d.source_branch);
    if (bit == net.branch_index_of_label.end()) {
      throw ValidationError(ctx + ": unknown source_branch " + std::to_string(d.source_branch));
    }
    const Branch& src = net.branches[static_cast<size_t>(bit->second)];
    if (!d.winding) {
      if (src.kind != BranchKind::Line) {
        throw ValidationError(ctx + ": non-winding edge must come from a line branch");
      }
      const int from_label = net.buses[static_cast<size_t>(src.from_bus)].id;
      const int to_label = net.buses[static_cast<size_t>(src.to_bus)].id;
      if (d.from_node != from_label || d.to_node != to_label) {
        throw ValidationError(ctx + ": endpoints must match source line orientation (" +
                              std::to_string(from_label) + " -> " + std::to_string(to_label) + ")");
      }
    } else if (src.kind != BranchKind::Transformer) {
      throw ValidationError(ctx + ": winding edge must come from a transformer branch");
    }
    net.dc_edge_decls.push_back(d);
  }
  sort_by_id(net.dc_edge_decls);
  {
    std::set<int> ids;
    std::set<int> line_branches_seen;
    for (const auto& d : net.dc_edge_decls) {
      if (!ids.insert(d.id).second) {
        throw ValidationError("duplicate dc_edge id " + std::to_string(d.id));
      }
      if (!d.winding && !line_branches_seen.insert(d.source_branch).second) {
        throw ValidationError("line branch " + std::to_string(d.source_branch) +
                              " has more than one dc_edge");
      }
    }
    for (const auto& br : net.branches) {
      if (br.kind == BranchKind::Line && !line_branches_seen.count(br.id)) {
        throw ValidationError("line branch " + std::to_string(br.id) + " has no dc_edge");
      }
    }
    // Every declared winding label must exist and be a winding edge sourced
    // from the owning transformer branch.
    for (int t = 0; t < net.transformer_count(); ++t) {
      const int bidx = net.transformer_branches[static_cast<size_t>(t)];
      const Branch& br = net.branches[static_cast<size_t>(bidx)];
      for (const auto& [role, label] : br.transformer->winding_edges) {
        auto found = std::find_if(net.dc_edge_decls.begin(), net.dc_edge_decls.end(),
                                  [&](const DcEdgeDecl& d) { return d.id == label; });
        if (found == net.dc_edge_decls.end()) {
          throw ValidationError("transformer at branch " + std::to_string(br.id) +
                                ": winding role '" + to_string(role) +
                                "' references unknown dc_edge " + std::to_string(label));
        }
        if (!found->winding || found->source_branch != br.id) {
          throw ValidationError("transformer at branch " + std::to_string(br.id) +
                                ": winding role '" + to_string(role) + "' must reference a winding " +
                                "dc_edge sourced from this branch");
        }
      }
    }
  }

  return net;
}

AcNetwork load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open network file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string fallback = path;
  const auto slash = fallback.find_last_of('/');
  if (slash != std::string::npos) fallback = fallback.substr(slash + 1);
  const auto dot = fallback.find_last_of('.');
  if (dot != std::string::npos) fallback = fallback.substr(0, dot);
  return load_network_from_string(buf.str(), fallback);
}

DcNetwork derive_dc_network(const AcNetwork& ac) {
  DcNetwork dc;

  for (const auto& b : ac.buses) {
    DcNode n;
    n.id = b.id;
    n.a_ground = 0.0;
    n.is_substation = false;
    n.has_coords = b.has_coords;
    n.latitude = b.latitude;
    n.longitude = b.longitude;
    dc.nodes.push_back(n);
  }
  for (const auto& s : ac.substations) {
    DcNode n;
    n.id = s.dc_node;
    n.a_ground = s.a_ground;
    n.is_substation = true;
    n.has_coords = s.has_coords;
    n.latitude = s.latitude;
    n.longitude = s.longitude;
    dc.nodes.push_back(n);
  }
  std::sort(dc.nodes.begin(), dc.nodes.end(),
            [](const DcNode& a, const DcNode& b) { return a.id < b.id; });
  for (int i = 0; i < dc.node_count(); ++i) {
    dc.node_index_of_label.emplace(dc.nodes[static_cast<size_t>(i)].id, i);
  }

  dc.substation_nodes.reserve(ac.substations.size());
  for (const auto& s : ac.substations) {
    auto it = dc.node_index_of_label.find(s.dc_node);
    if (it == dc.node_index_of_label.end()) {
      throw ValidationError("substation " + std::to_string(s.id) + ": missing grounding node");
    }
    dc.substation_nodes.push_back(it->second);
  }

  for (const auto& d : ac.dc_edge_decls) {
    DcEdge e;
    e.id = d.id;
    e.from_node = dc.node_index_of_label.at(d.from_node);
    e.to_node = dc.node_index_of_label.at(d.to_node);
    e.gamma = d.gamma;
    e.source_ac_branch = ac.branch_index_of_label.at(d.source_branch);
    e.is_transformer_winding = d.winding;
    dc.edges.push_back(e);
  }
  // decls arrive sorted by label from load; keep that order
  for (int i = 0; i < dc.edge_count(); ++i) {
    dc.edge_index_of_label.emplace(dc.edges[static_cast<size_t>(i)].id, i);
  }

  dc.transformer_winding_edges.resize(static_cast<size_t>(ac.transformer_count()));
  for (int t = 0; t < ac.transformer_count(); ++t) {
    const TransformerSpec& spec = ac.transformer(t);
    for (const auto& [role, label] : spec.winding_edges) {
      auto it = dc.edge_index_of_label.find(label);
      if (it == dc.edge_index_of_label.end()) {
        throw ValidationError("transformer winding edge label " + std::to_string(label) +
                              " does not resolve to a DC edge");
      }
      dc.transformer_winding_edges[static_cast<size_t>(t)][role] = it->second;
    }
  }

  // connectivity over the full node set
  if (dc.node_count() > 0) {
    std::vector<int> parent(static_cast<size_t>(dc.node_count()));
    for (size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
    std::function<int(int)> find = [&](int a) {
      while (parent[static_cast<size_t>(a)] != a) {
        parent[static_cast<size_t>(a)] = parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
        a = parent[static_cast<size_t>(a)];
      }
      return a;
    };
    for (const auto& e : dc.edges) {
      parent[static_cast<size_t>(find(e.from_node))] = find(e.to_node);
    }
    const int root = find(0);
    for (int i = 1; i < dc.node_count(); ++i) {
      if (find(i) != root) {
        throw ValidationError("DC network is disconnected (node " +
                              std::to_string(dc.nodes[static_cast<size_t>(i)].id) +
                              " unreachable)");
      }
    }
  }

  return dc;
}

Eigen::VectorXd materialize_xi(const DcNetwork& dc, const GmdScenario& scenario) {
  const bool has_explicit = scenario.explicit_xi.has_value();
  const bool has_field = scenario.field.has_value();
  if (has_explicit == has_field) {
    throw ValidationError("scenario must specify exactly one of explicit_xi or field");
  }

  Eigen::VectorXd xi = Eigen::VectorXd::Zero(dc.edge_count());

  if (has_explicit) {
    for (const auto& [label, value] : *scenario.explicit_xi) {
      auto it = dc.edge_index_of_label.find(label);
      if (it == dc.edge_index_of_label.end()) {
        throw ValidationError("explicit xi references unknown dc_edge " + std::to_string(label));
      }
      const DcEdge& e = dc.edges[static_cast<size_t>(it->second)];
      if (e.is_transformer_winding && value != 0.0) {
        throw ValidationError("explicit xi must be zero on transformer winding edge " +
                              std::to_string(label));
      }
      xi[it->second] = value;
    }
    return xi;
  }

  const double e_mag = scenario.field->magnitude;       // V/km
  const double dir = scenario.field->direction_deg * kPi / 180.0;
  const double e_north = e_mag * std::cos(dir);
  const double e_east = e_mag * std::sin(dir);

  for (int k = 0; k < dc.edge_count(); ++k) {
    const DcEdge& e = dc.edges[static_cast<size_t>(k)];
    if (e.is_transformer_winding) continue;
    const DcNode& a = dc.nodes[static_cast<size_t>(e.from_node)];
    const DcNode& b = dc.nodes[static_cast<size_t>(e.to_node)];
    if (!a.has_coords || !b.has_coords) {
      throw ValidationError("field scenario: dc_edge " + std::to_string(e.id) +
                            " endpoint lacks coordinates");
    }
    const double mean_lat = 0.5 * (a.latitude + b.latitude) * kPi / 180.0;
    const double d_north_km = (b.latitude - a.latitude) * kPi / 180.0 * kEarthRadiusKm;
    const double d_east_km =
        (b.longitude - a.longitude) * kPi / 180.0 * kEarthRadiusKm * std::cos(mean_lat);
    xi[k] = e_east * d_east_km + e_north * d_north_km;
  }
  return xi;
}

} // namespace gicshield
