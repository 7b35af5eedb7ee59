#include <gtest/gtest.h>

#include <json.hpp>

#include "gasflow/generators.hpp"
#include "gasflow/misocp.hpp"
#include "gasflow/network_io.hpp"
#include "gasflow/oracles.hpp"
#include "test_util.hpp"

using namespace gasflow;
using namespace gasflow::testing;

TEST(SingleCycleOracle, TriangleGolden) {
  GasNetwork net = load_network(data_path("triangle.json"));
  Injections q = load_scenario(data_path("triangle_scenario.json"), net);
  OracleSolution s = brute_force_single_cycle(net, q);
  EXPECT_LE(s.residuals.max(), tol::kOracle);

  // Loop closure l^2 + (l - 1)^2 = (3 - l)^2 gives l = 2 sqrt(3) - 2.
  const double lam = 2.0 * std::sqrt(3.0) - 2.0;
  EXPECT_NEAR(s.state.phi[0], lam, 1e-10);
  EXPECT_NEAR(s.state.phi[1], lam - 1.0, 1e-10);
  EXPECT_NEAR(s.state.phi[2], 3.0 - lam, 1e-10);

  const auto golden = nlohmann::json::parse(read_text_file("tests/golden/triangle_oracle.json"));
  for (NodeId v = 0; v < net.num_nodes(); ++v)
    EXPECT_NEAR(s.state.psi[v], golden["psi"][net.node_name(v)].get<double>(), 1e-12);
  for (EdgeId e = 0; e < net.num_edges(); ++e)
    EXPECT_NEAR(s.state.phi[e], golden["phi"][net.edge(e).name].get<double>(), 1e-12);
}

TEST(SingleCycleOracle, SymmetricSquare) {
  GasNetwork net;
  for (const char* n : {"1", "2", "3", "4"}) net.add_node(n);
  net.add_pipe("12", 0, 1, 0.5);
  net.add_pipe("23", 1, 2, 0.5);
  net.add_pipe("34", 2, 3, 0.5);
  net.add_pipe("41", 3, 0, 0.5);
  net.set_reference(0, 50.0);
  OracleSolution s = brute_force_single_cycle(net, inj({2, -2, 2, -2}));
  // No circulation: the flow has zero component along the loop.
  double circulation = 0.0;
  for (EdgeId e = 0; e < 4; ++e) circulation += s.cycle[e] * s.state.phi[e];
  EXPECT_NEAR(circulation, 0.0, 1e-10);
  for (double f : s.state.phi) EXPECT_NEAR(std::abs(f), 1.0, 1e-10);
  EXPECT_DOUBLE_EQ(residuals(net, inj({2, -2, 2, -2}), s.state).mass, 0.0);
}

TEST(SingleCycleOracle, ZeroInjections) {
  GasNetwork net = triangle();
  net.add_node("4");
  net.add_compressor("c", 2, 3, 1.4);
  OracleSolution s = brute_force_single_cycle(net, inj({0, 0, 0, 0}));
  for (double f : s.state.phi) EXPECT_NEAR(f, 0.0, 1e-12);
  EXPECT_NEAR(s.state.psi[1], 100.0, 1e-9);
  EXPECT_NEAR(s.state.psi[3], 140.0, 1e-9);
}

TEST(SingleCycleOracle, Errors) {
  auto code = [](const GasNetwork& net, const Injections& q) {
    try {
      brute_force_single_cycle(net, q);
    } catch (const GasFlowError& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code(two_node_pipe(), inj({2, -2})), ErrorCode::NoCycle);
  GasNetwork two = triangle();
  two.add_pipe("12b", 0, 1, 1.0);
  EXPECT_EQ(code(two, inj({3, -1, -2})), ErrorCode::MultiCycle);
  GasNetwork comp;
  for (const char* n : {"1", "2", "3"}) comp.add_node(n);
  comp.add_pipe("12", 0, 1, 1.0);
  comp.add_pipe("23", 1, 2, 1.0);
  comp.add_compressor("13", 0, 2, 1.2);
  comp.set_reference(0, 100.0);
  EXPECT_EQ(code(comp, inj({3, -1, -2})), ErrorCode::CompressorOnCycle);
  EXPECT_EQ(code(triangle(1.0, 1.0), inj({3, -1, -2})), ErrorCode::InfeasiblePressure);
}

TEST(SingleCycleOracle, AgreesWithSolveGf) {
  Rng rng(21);
  GeneratorOptions o;
  o.compressor_prob = 0.3;
  for (int i = 0; i < 25; ++i) {
    Instance in = random_single_cycle(rng, 3 + rng.index(8), rng.index(5), o);
    OracleSolution s = brute_force_single_cycle(in.net, in.q);
    EXPECT_LE(s.residuals.max(), tol::kOracle * std::max(1.0, in.net.reference_psi()));
    SolveResult r = solve_gf(in.net, in.q);
    ASSERT_EQ(r.status, SolveStatus::Solved) << i;
    EXPECT_LE(max_abs_diff(r.state.psi, s.state.psi), tol::kAgree) << i;
  }
}

TEST(Multistart, TreeCactusInfeasible) {
  Rng rng(13);
  Instance t = random_tree(rng, 12);
  UniquenessReport tr = multistart_uniqueness(t.net, t.q, 20, 1);
  EXPECT_EQ(tr.starts, 20);
  EXPECT_GT(tr.converged, 0);
  EXPECT_TRUE(tr.misocp_solved);
  EXPECT_LE(tr.max_spread, tol::kAgree);

  Instance c = random_cactus(rng, 2, 3, 5);
  UniquenessReport cr = multistart_uniqueness(c.net, c.q, 20, 2);
  EXPECT_TRUE(cr.misocp_solved);
  EXPECT_LE(cr.max_spread, tol::kAgree);

  UniquenessReport inf = multistart_uniqueness(two_node_pipe(4.0, 10.0), inj({2, -2}), 20, 3);
  EXPECT_EQ(inf.converged, 0);
  EXPECT_FALSE(inf.misocp_solved);
  EXPECT_EQ(inf.misocp_status, "infeasible");
  EXPECT_EQ(inf.max_spread, 0.0);
}

TEST(ScenarioCheck, SameStateAndRandomPairs) {
  GasNetwork net = triangle();
  OracleSolution a = brute_force_single_cycle(net, inj({3, -1, -2}));
  EXPECT_EQ(lemma2_scenario_check(net, a.state, a.state), std::optional<bool>(true));

  // A loop flow that does not close the cycle fails the precondition.
  FlowState off = a.state;
  for (EdgeId e = 0; e < 3; ++e) off.phi[e] += 0.1 * a.cycle[e];
  EXPECT_EQ(lemma2_scenario_check(net, a.state, off), std::nullopt);

  Rng rng(15);
  int checked = 0;
  for (int i = 0; i < 60; ++i) {
    Instance in = random_single_cycle(rng, 3 + rng.index(6), rng.index(4));
    Injections q2 = in.q;
    for (std::size_t v = 0; v + 1 < q2.q.size(); ++v) q2.q[v] += 0.2 * rng.normal();
    q2.q.back() = 0.0;
    double s = 0;
    for (double v : q2.q) s += v;
    q2.q.back() = -s;
    OracleSolution x = brute_force_single_cycle(in.net, in.q);
    OracleSolution y;
    try {
      y = brute_force_single_cycle(in.net, q2);
    } catch (const GasFlowError&) {
      continue;
    }
    auto res = lemma2_scenario_check(in.net, x.state, y.state);
    ASSERT_TRUE(res.has_value()) << i;
    EXPECT_TRUE(*res) << i;
    ++checked;
  }
  EXPECT_GT(checked, 30);
}

TEST(SingleCycleIndicator, Triangle) {
  std::vector<int> c = single_cycle_indicator(triangle());
  EXPECT_EQ(c, (std::vector<int>{1, 1, -1}));
}
