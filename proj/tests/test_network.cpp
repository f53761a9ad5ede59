#include <doctest.h>

#include <cmath>

#include "gicshield/errors.hpp"
#include "gicshield/network.hpp"
#include "test_support.hpp"

using namespace gicshield;

TEST_CASE("case5_synth loads with the documented shape") {
  const AcNetwork ac = testsupport::load_case5();
  CHECK(ac.name == "case5_synth");
  CHECK(ac.bus_count() == 5);
  CHECK(ac.substation_count() == 3);
  CHECK(ac.transformer_count() == 2);
  CHECK(ac.generator_count() == 2);
  CHECK(ac.config.kappa == doctest::Approx(1e5));

  // cross-references resolved to dense indices
  for (const auto& g : ac.generators) {
    CHECK(g.bus >= 0);
    CHECK(g.bus < ac.bus_count());
  }
  for (const auto& br : ac.branches) {
    CHECK(br.from_bus >= 0);
    CHECK(br.to_bus < ac.bus_count());
    CHECK((br.kind == BranchKind::Transformer) == br.transformer.has_value());
  }
}

TEST_CASE("repeated load yields identical structures") {
  const AcNetwork a = testsupport::load_case5();
  const AcNetwork b = testsupport::load_case5();
  REQUIRE(a.bus_count() == b.bus_count());
  for (int i = 0; i < a.bus_count(); ++i) {
    CHECK(a.buses[i].id == b.buses[i].id);
    CHECK(a.buses[i].p_demand == b.buses[i].p_demand);
  }
  REQUIRE(a.branch_count() == b.branch_count());
  for (int i = 0; i < a.branch_count(); ++i) {
    CHECK(a.branches[i].id == b.branches[i].id);
    CHECK(a.branches[i].g == b.branches[i].g);
  }
  const DcNetwork da = derive_dc_network(a);
  const DcNetwork db = derive_dc_network(b);
  REQUIRE(da.node_count() == db.node_count());
  for (int i = 0; i < da.node_count(); ++i) CHECK(da.nodes[i].id == db.nodes[i].id);
  for (int i = 0; i < da.edge_count(); ++i) CHECK(da.edges[i].id == db.edges[i].id);
}

TEST_CASE("transformer lacking winding_edges is rejected by name") {
  std::string text = testsupport::two_bus_json();
  // turn the branch into a transformer with an incomplete record
  auto pos = text.find("\"kind\": \"line\"");
  text.replace(pos, 14, "\"kind\": \"transformer\"");
  pos = text.find("\"transformers\": []");
  text.replace(pos, 18, R"("transformers": [
    { "branch": 1, "topology": "gwye_gwye", "turns": { "high": 500, "low": 230 },
      "k_loss": 1e-3, "i_eff_max": 100.0 }
  ])");
  CHECK_THROWS_WITH_AS(load_network_from_string(text),
                       doctest::Contains("transformer at branch 1"), ValidationError);
}

TEST_CASE("empty file is a parse error") {
  CHECK_THROWS_AS(load_network_from_string(""), ParseError);
}

TEST_CASE("dangling references are named") {
  const std::string text = testsupport::two_bus_json();
  const auto pos = text.find("\"bus\": 1");
  std::string broken = text;
  broken.replace(pos, 8, "\"bus\": 9");
  CHECK_THROWS_WITH_AS(load_network_from_string(broken), doctest::Contains("unknown bus"),
                       ValidationError);

  std::string negative = text;
  const auto gpos = negative.find("\"gamma\": 1.0");
  negative.replace(gpos, 12, "\"gamma\": -1.0");
  CHECK_THROWS_WITH_AS(load_network_from_string(negative), doctest::Contains("gamma"),
                       ValidationError);
}

TEST_CASE("derive_dc_network: node and edge census") {
  const AcNetwork ac = testsupport::load_case5();
  const DcNetwork dc = derive_dc_network(ac);
  CHECK(dc.node_count() == ac.bus_count() + ac.substation_count());
  int lines = 0;
  for (const auto& br : ac.branches) {
    if (br.kind == BranchKind::Line) ++lines;
  }
  int windings = 0;
  for (int t = 0; t < ac.transformer_count(); ++t) {
    windings += static_cast<int>(ac.transformer(t).winding_edges.size());
  }
  CHECK(dc.edge_count() == lines + windings);

  // grounding only at substations, and one grounded node per substation
  int grounded = 0;
  for (const auto& n : dc.nodes) {
    if (n.a_ground > 0.0) {
      ++grounded;
      CHECK(n.is_substation);
    } else {
      CHECK_FALSE(n.is_substation);
    }
  }
  CHECK(grounded == ac.substation_count());

  // every transformer's winding edges resolve
  REQUIRE(static_cast<int>(dc.transformer_winding_edges.size()) == ac.transformer_count());
  for (int t = 0; t < ac.transformer_count(); ++t) {
    for (const auto& [role, edge] : dc.transformer_winding_edges[t]) {
      CHECK(dc.edges[edge].is_transformer_winding);
    }
  }
}

TEST_CASE("zero transformers: DC edges are exactly the transmission lines") {
  const AcNetwork ac = load_network_from_string(testsupport::two_bus_json());
  const DcNetwork dc = derive_dc_network(ac);
  CHECK(dc.edge_count() == 1);
  CHECK_FALSE(dc.edges[0].is_transformer_winding);
  CHECK(dc.node_count() == 2);
}

TEST_CASE("one GWyeGWye transformer contributes exactly two winding edges") {
  const AcNetwork ac = testsupport::load_case5();
  const DcNetwork dc = derive_dc_network(ac);
  const int t = 0;  // branch 5, gwye_gwye
  CHECK(ac.transformer(t).topology == TransformerTopology::GWyeGWye);
  CHECK(dc.transformer_winding_edges[t].size() == 2);
  CHECK(dc.transformer_winding_edges[t].count(WindingRole::High) == 1);
  CHECK(dc.transformer_winding_edges[t].count(WindingRole::Low) == 1);
}

TEST_CASE("materialize_xi: zero field gives zero everywhere") {
  const AcNetwork ac = testsupport::load_case5();
  const DcNetwork dc = derive_dc_network(ac);
  const Eigen::VectorXd xi = materialize_xi(dc, GmdScenario::uniform_field(0.0, 45.0));
  CHECK(xi.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("materialize_xi: explicit nonzero entry on a winding edge is rejected") {
  const AcNetwork ac = testsupport::load_case5();
  const DcNetwork dc = derive_dc_network(ac);
  GmdScenario s;
  s.explicit_xi.emplace();
  (*s.explicit_xi)[105] = 1.0;  // winding edge of branch 5
  CHECK_THROWS_WITH_AS(materialize_xi(dc, s), doctest::Contains("winding"), ValidationError);

  GmdScenario ok;
  ok.explicit_xi.emplace();
  (*ok.explicit_xi)[101] = 12.5;
  (*ok.explicit_xi)[105] = 0.0;  // zero on a winding is allowed
  const Eigen::VectorXd xi = materialize_xi(dc, ok);
  CHECK(xi[dc.edge_index_of_label.at(101)] == 12.5);
}

TEST_CASE("materialize_xi: 10 V/km at 45 degrees on a 100 km due-east line") {
  const AcNetwork ac = load_network_from_string(testsupport::two_bus_json());
  const DcNetwork dc = derive_dc_network(ac);
  const Eigen::VectorXd xi = materialize_xi(dc, GmdScenario::uniform_field(10.0, 45.0));
  CHECK(xi[0] == doctest::Approx(10.0 * 100.0 * std::cos(M_PI / 4)).epsilon(1e-6));
}

TEST_CASE("materialize_xi is linear in the field magnitude") {
  const AcNetwork ac = testsupport::load_case12();
  const DcNetwork dc = derive_dc_network(ac);
  const Eigen::VectorXd x1 = materialize_xi(dc, GmdScenario::uniform_field(7.0, 120.0));
  const Eigen::VectorXd x2 = materialize_xi(dc, GmdScenario::uniform_field(14.0, 120.0));
  CHECK((x2 - 2.0 * x1).lpNorm<Eigen::Infinity>() <= 1e-12 * x2.lpNorm<Eigen::Infinity>());
}

TEST_CASE("winding edges carry zero xi under any field") {
  const AcNetwork ac = testsupport::load_case12();
  const DcNetwork dc = derive_dc_network(ac);
  const Eigen::VectorXd xi = materialize_xi(dc, GmdScenario::uniform_field(20.0, 45.0));
  for (int k = 0; k < dc.edge_count(); ++k) {
    if (dc.edges[k].is_transformer_winding) CHECK(xi[k] == 0.0);
  }
}

TEST_CASE("field scenario without coordinates is rejected") {
  const std::string needle = R"("latitude": 0.0, "longitude": 0.0 })";
  std::string broken = testsupport::two_bus_json();
  broken.replace(broken.find(needle), needle.size(), "\"g_shunt\": 0.0 }");
  const AcNetwork ac = load_network_from_string(broken);
  const DcNetwork dc = derive_dc_network(ac);
  CHECK_THROWS_WITH_AS(materialize_xi(dc, GmdScenario::uniform_field(5.0, 45.0)),
                       doctest::Contains("coordinates"), ValidationError);
}
