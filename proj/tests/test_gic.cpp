#include <doctest.h>

#include <random>

#include <Eigen/Dense>

#include "gicshield/errors.hpp"
#include "gicshield/gic.hpp"
#include "gicshield/nlp.hpp"
#include "test_support.hpp"

using namespace gicshield;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Hand-built two-node circuit from the worked example: two grounded nodes
// (a = 1 S each), one line (gamma = 1 S).
DcNetwork two_node_circuit() {
  DcNetwork dc;
  dc.nodes.push_back({1, 1.0, true, false, 0.0, 0.0});
  dc.nodes.push_back({2, 1.0, true, false, 0.0, 0.0});
  dc.edges.push_back({10, 0, 1, 1.0, 0, false});
  dc.substation_nodes = {0, 1};
  dc.node_index_of_label = {{1, 0}, {2, 1}};
  dc.edge_index_of_label = {{10, 0}};
  return dc;
}

struct RandomCircuit {
  DcNetwork dc;
  VectorXd xi;
};

// Random connected DC network with ns grounded substation nodes.
RandomCircuit random_circuit(std::mt19937& rng, int n_nodes, int n_sub) {
  std::uniform_real_distribution<double> gamma_dist(0.5, 5.0);
  std::uniform_real_distribution<double> ground_dist(0.5, 4.0);
  std::uniform_real_distribution<double> xi_dist(-50.0, 50.0);

  RandomCircuit rc;
  for (int i = 0; i < n_nodes; ++i) {
    rc.dc.nodes.push_back({i + 1, 0.0, false, false, 0.0, 0.0});
    rc.dc.node_index_of_label.emplace(i + 1, i);
  }
  std::vector<int> subs(static_cast<size_t>(n_nodes));
  std::iota(subs.begin(), subs.end(), 0);
  std::shuffle(subs.begin(), subs.end(), rng);
  subs.resize(static_cast<size_t>(n_sub));
  std::sort(subs.begin(), subs.end());
  for (int s : subs) {
    rc.dc.nodes[static_cast<size_t>(s)].a_ground = ground_dist(rng);
    rc.dc.nodes[static_cast<size_t>(s)].is_substation = true;
    rc.dc.substation_nodes.push_back(s);
  }

  int edge_id = 100;
  auto add_edge = [&](int u, int v) {
    rc.dc.edges.push_back({edge_id, u, v, gamma_dist(rng), 0, false});
    rc.dc.edge_index_of_label.emplace(edge_id, static_cast<int>(rc.dc.edges.size()) - 1);
    ++edge_id;
  };
  for (int i = 1; i < n_nodes; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    add_edge(pick(rng), i);
  }
  const int extra = n_nodes / 2;
  for (int k = 0; k < extra; ++k) {
    std::uniform_int_distribution<int> pick(0, n_nodes - 1);
    const int u = pick(rng), v = pick(rng);
    if (u != v) add_edge(u, v);
  }

  rc.xi.resize(rc.dc.edge_count());
  for (int k = 0; k < rc.dc.edge_count(); ++k) rc.xi[k] = xi_dist(rng);
  return rc;
}

// Independent oracle: dense assembly, full-pivot LU.
VectorXd dense_oracle_vd(const DcNetwork& dc, const VectorXd& xi, const Placement& z) {
  const int n = dc.node_count();
  MatrixXd A = MatrixXd::Zero(n, n);
  VectorXd b = VectorXd::Zero(n);
  for (int k = 0; k < dc.edge_count(); ++k) {
    const DcEdge& e = dc.edges[k];
    A(e.from_node, e.from_node) += e.gamma;
    A(e.to_node, e.to_node) += e.gamma;
    A(e.from_node, e.to_node) -= e.gamma;
    A(e.to_node, e.from_node) -= e.gamma;
    b[e.from_node] -= e.gamma * xi[k];
    b[e.to_node] += e.gamma * xi[k];
  }
  for (int s = 0; s < dc.substation_count(); ++s) {
    const int node = dc.substation_nodes[s];
    A(node, node) += dc.nodes[node].a_ground * (1 - z[static_cast<size_t>(s)]);
  }
  return A.fullPivLu().solve(b);
}

} // namespace

TEST_CASE("worked two-node example") {
  const DcNetwork dc = two_node_circuit();
  VectorXd xi(1);
  xi << 1.0;

  SUBCASE("both grounded") {
    const GicSolution sol = gic::solve_gic(dc, xi, {0, 0});
    CHECK(sol.id_flow[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(sol.vd[0] == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
    CHECK(sol.vd[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("first grounding blocked") {
    const GicSolution sol = gic::solve_gic(dc, xi, {1, 0});
    CHECK(sol.id_flow[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(sol.vd[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(sol.vd[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(sol.ground_current[0] == 0.0);  // blocker zeroes the ground path exactly
  }
  SUBCASE("all grounding blocked raises floating-network error") {
    CHECK_THROWS_WITH_AS(gic::solve_gic(dc, xi, {1, 1}), doctest::Contains("floating"),
                         SolveError);
  }
  SUBCASE("non-binary placement is rejected") {
    CHECK_THROWS_AS(gic::solve_gic(dc, xi, {2, 0}), SolveError);
  }
}

TEST_CASE("zero sources give a dead circuit") {
  const DcNetwork dc = two_node_circuit();
  const GicSolution sol = gic::solve_gic(dc, VectorXd::Zero(1), {0, 0});
  CHECK(sol.vd.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(sol.id_flow.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("randomized physics suite: superposition, conservation, blockers, oracle") {
  std::mt19937 rng(20240117);
  std::uniform_int_distribution<int> node_dist(4, 12);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = node_dist(rng);
    std::uniform_int_distribution<int> sub_dist(1, std::max(1, n / 2));
    const int ns = sub_dist(rng);
    RandomCircuit rc = random_circuit(rng, n, ns);

    Placement z(static_cast<size_t>(ns), 0);
    // block a strict subset so at least one grounding survives
    for (int s = 0; s < ns - 1; ++s) z[static_cast<size_t>(s)] = (rng() & 1) ? 1 : 0;

    const GicSolution sol = gic::solve_gic(rc.dc, rc.xi, z);

    // dense oracle equivalence
    const VectorXd vd_oracle = dense_oracle_vd(rc.dc, rc.xi, z);
    const double scale = std::max(1.0, vd_oracle.lpNorm<Eigen::Infinity>());
    CHECK((sol.vd - vd_oracle).lpNorm<Eigen::Infinity>() / scale <= 1e-10);

    // conservation: ground currents sum to zero
    CHECK(std::abs(sol.ground_current.sum()) <=
          1e-8 * std::max(1.0, sol.ground_current.lpNorm<1>()));

    // blocker effect: exact zero at blocked substations
    for (int s = 0; s < ns; ++s) {
      if (z[static_cast<size_t>(s)]) {
        CHECK(sol.ground_current[rc.dc.substation_nodes[s]] == 0.0);
      }
    }

    // superposition in the sources
    VectorXd xi2 = VectorXd::Zero(rc.xi.size());
    for (int k = 0; k < xi2.size(); ++k) xi2[k] = 10.0 * std::sin(0.7 * k + trial);
    const GicSolution a = gic::solve_gic(rc.dc, rc.xi, z);
    const GicSolution b = gic::solve_gic(rc.dc, xi2, z);
    const GicSolution ab = gic::solve_gic(rc.dc, 0.5 * rc.xi + 2.0 * xi2, z);
    const VectorXd expect = 0.5 * a.vd + 2.0 * b.vd;
    CHECK((ab.vd - expect).lpNorm<Eigen::Infinity>() <=
          1e-8 * std::max(1.0, expect.lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("transformer theta formulas") {
  GicSolution sol;
  sol.id_flow.resize(2);

  SUBCASE("GSU is the high-winding current") {
    sol.id_flow << -3.2, 0.0;
    TransformerSpec spec;
    spec.topology = TransformerTopology::GWyeDeltaGSU;
    spec.n_high = 345;
    CHECK(gic::transformer_theta(spec, {{WindingRole::High, 0}}, sol) == doctest::Approx(-3.2));
  }
  SUBCASE("GWye-GWye turns weighting") {
    sol.id_flow << 1.0, -2.0;
    TransformerSpec spec;
    spec.topology = TransformerTopology::GWyeGWye;
    spec.n_high = 2;
    spec.n_low = 1;
    CHECK(gic::transformer_theta(spec, {{WindingRole::High, 0}, {WindingRole::Low, 1}}, sol) ==
          doctest::Approx(0.0));
  }
  SUBCASE("autotransformer series/common weighting") {
    sol.id_flow << 2.0, 4.0;
    TransformerSpec spec;
    spec.topology = TransformerTopology::GWyeGWyeAuto;
    spec.n_series = 1;
    spec.n_common = 1;
    CHECK(gic::transformer_theta(spec, {{WindingRole::Series, 0}, {WindingRole::Common, 1}},
                                 sol) == doctest::Approx(3.0));
  }
}

TEST_CASE("effective_gic equals |theta|, cross-checked by the complementarity system") {
  VectorXd theta(5);
  theta << -3.2, 0.0, 17.5, -0.004, 250.0;
  const EffectiveGic eff = gic::effective_gic(theta);
  CHECK(eff.i_eff[0] == doctest::Approx(3.2));
  CHECK(eff.i_eff[1] == 0.0);

  // solve the smooth reformulation per component: s+ - s- = theta,
  // i_eff = s+ + s-, s+ s- complementarity
  for (int k = 0; k < theta.size(); ++k) {
    NlpProblem p;
    p.n = 2;
    p.lower = VectorXd::Zero(2);
    p.upper = VectorXd::Constant(2, kInf);
    p.objective = [](const VectorXd& x, VectorXd* g) {
      if (g) g->setOnes();
      return x[0] + x[1];
    };
    const double th = theta[k];
    p.eq.push_back({"split", [th](const VectorXd& x, VectorXd* g) {
      if (g) {
        (*g)[0] = 1.0;
        (*g)[1] = -1.0;
      }
      return x[0] - x[1] - th;
    }});
    p.complementarity_pairs.emplace_back(0, 1);
    const NlpSolution sol = nlp::solve(p, VectorXd::Constant(2, 1.0), {});
    REQUIRE(sol.status == SolveStatus::OptimalTolerance);
    CHECK(sol.x[0] * sol.x[1] <= 1e-10);
    CHECK(sol.x[0] + sol.x[1] ==
          doctest::Approx(eff.i_eff[k]).epsilon(1e-5).scale(1.0 + std::abs(th)));
  }
}

TEST_CASE("bundled case5: KCL residual and label bookkeeping") {
  const AcNetwork ac = testsupport::load_case5();
  const DcNetwork dc = derive_dc_network(ac);
  const VectorXd xi = materialize_xi(dc, GmdScenario::uniform_field(10.0, 45.0));
  const GicSolution sol = gic::solve_gic(dc, xi, {0, 0, 0});
  CHECK(sol.kcl_residual <= 1e-9);
  CHECK(sol.vd.size() == dc.node_count());
  CHECK(sol.id_flow.size() == dc.edge_count());

  const VectorXd theta = gic::all_transformer_theta(ac, dc, sol);
  CHECK(theta.size() == ac.transformer_count());
  for (int t = 0; t < theta.size(); ++t) CHECK(std::isfinite(theta[t]));
}

TEST_CASE("fully blocked bundled networks have provably dead windings") {
  for (const char* name : {"case5_synth.json", "case12_synth.json"}) {
    const AcNetwork ac = load_network(testsupport::data_path(name));
    const DcNetwork dc = derive_dc_network(ac);
    const Placement all_ones(static_cast<size_t>(ac.substation_count()), 1);
    CHECK(gic::fully_blocked(dc, all_ones));
    CHECK_NOTHROW(gic::verify_windings_dead_when_blocked(dc));
  }
}
