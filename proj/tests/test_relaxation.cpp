#include <gtest/gtest.h>

#include "gasflow/generators.hpp"
#include "gasflow/misocp.hpp"
#include "gasflow/oracles.hpp"
#include "gasflow/relaxation.hpp"
#include "gasflow/tree_solver.hpp"
#include "test_util.hpp"

using namespace gasflow;
using namespace gasflow::testing;

namespace {

using Status = PrimalSolution::Status;

std::vector<Fixing> all(std::size_t n, Fixing f) { return std::vector<Fixing>(n, f); }

// Program point for a G1 state: t = |drop|, x from the flow sign.
std::vector<double> lift(const ConicProgram& prog, const FlowState& s) {
  std::vector<double> v(prog.num_vars(), 0.0);
  for (EdgeId e = 0; e < prog.num_edges; ++e) v[prog.phi(e)] = s.phi[e];
  for (NodeId n = 0; n < prog.num_nodes; ++n) v[prog.psi(n)] = s.psi[n];
  for (std::size_t k = 0; k < prog.lossy.size(); ++k) {
    v[prog.t(k)] = std::abs(s.psi[prog.from[k]] - s.psi[prog.to[k]]);
    v[prog.x(k)] = s.phi[prog.lossy[k]] >= 0.0 ? 1.0 : 0.0;
  }
  return v;
}

std::vector<Fixing> fixing_of(const ConicProgram& prog, const FlowState& s) {
  std::vector<Fixing> f;
  for (EdgeId e : prog.lossy) f.push_back(s.phi[e] >= 0.0 ? Fixing::One : Fixing::Zero);
  return f;
}

}  // namespace

TEST(Relaxation, FixedOneLeavesForwardWeymouth) {
  GasNetwork net = two_node_pipe();
  ConicProgram prog = build_relaxation(net, inj({2, -2}), all(1, Fixing::One));
  EXPECT_EQ(prog.lower[prog.x(0)], 1.0);
  EXPECT_EQ(prog.upper[prog.x(0)], 1.0);
  auto point = [&](double phi, double psi2) {
    FlowState s{{phi}, {100.0, psi2}};
    std::vector<double> v = lift(prog, s);
    v[prog.x(0)] = 1.0;
    return prog.max_violation(v);
  };
  EXPECT_LE(point(2.0, 84.0), 1e-12);
  EXPECT_LE(point(2.0, 80.0), 1e-12);   // slack side of the relaxed Weymouth row
  EXPECT_GT(point(2.0, 90.0), 1.0);     // a phi^2 > psi_m - psi_n
  EXPECT_GT(point(-1.0, 100.0), 0.5);   // backward flow
}

TEST(Relaxation, FixedZeroLeavesBackwardWeymouth) {
  GasNetwork net = two_node_pipe();
  ConicProgram prog = build_relaxation(net, inj({-2, 2}), all(1, Fixing::Zero));
  auto point = [&](double phi, double psi2) {
    std::vector<double> v = lift(prog, FlowState{{phi}, {100.0, psi2}});
    v[prog.x(0)] = 0.0;
    return prog.max_violation(v);
  };
  EXPECT_LE(point(-2.0, 116.0), 1e-12);
  EXPECT_GT(point(-2.0, 110.0), 1.0);
  EXPECT_GT(point(1.0, 99.0), 0.5);
}

TEST(Relaxation, TwoNodeExamples) {
  GasNetwork net = two_node_pipe();
  PrimalSolution one = solve_conic(build_relaxation(net, inj({2, -2}), all(1, Fixing::One)));
  ASSERT_EQ(one.status, Status::Optimal) << one.message;
  EXPECT_NEAR(one.objective, 16.0, 1e-6);
  EXPECT_NEAR(one.values[0], 2.0, 1e-6);
  EXPECT_NEAR(one.values[2], 84.0, 1e-6);
  EXPECT_LE(one.feasibility, tol::kConicFeasible * 10);
  EXPECT_LE(one.relative_gap, tol::kConicGap);

  PrimalSolution zero_q = solve_conic(build_relaxation(net, inj({0, 0}), all(1, Fixing::One)));
  ASSERT_EQ(zero_q.status, Status::Optimal);
  EXPECT_NEAR(zero_q.objective, 0.0, 1e-6);
  EXPECT_NEAR(zero_q.values[0], 0.0, 1e-6);
  EXPECT_NEAR(zero_q.values[2], 100.0, 1e-6);

  ConicProgram wrong = build_relaxation(net, inj({2, -2}), all(1, Fixing::Zero));
  PrimalSolution inf = solve_conic(wrong);
  ASSERT_EQ(inf.status, Status::Infeasible);
  ASSERT_TRUE(inf.certificate.has_value());
  EXPECT_TRUE(verify_certificate(wrong, *inf.certificate));
}

TEST(Relaxation, DumpListsRows) {
  ConicProgram prog = build_relaxation(two_node_pipe(), inj({2, -2}), all(1, Fixing::Free));
  const std::string d = prog.dump();
  EXPECT_NE(d.find("minimize"), std::string::npos);
  for (const LinearRow& r : prog.rows) EXPECT_NE(d.find(r.name), std::string::npos);
}

TEST(Relaxation, SoundnessOnTreeAndOracleStates) {
  Rng rng(31);
  GeneratorOptions o;
  o.compressor_prob = 0.3;
  for (int i = 0; i < 40; ++i) {
    Instance in = i % 2 ? random_tree(rng, 3 + rng.index(15), o)
                        : random_single_cycle(rng, 3 + rng.index(6), rng.index(5), o);
    FlowState s = i % 2 ? solve_tree(in.net, in.q) : brute_force_single_cycle(in.net, in.q).state;
    ConicProgram prog = build_relaxation(in.net, in.q, std::vector<Fixing>(in.net.lossy_pipes().size(), Fixing::Free));
    std::vector<Fixing> f = fixing_of(prog, s);
    ConicProgram fixed = build_relaxation(in.net, in.q, f);
    const double scale = std::max(1.0, in.net.reference_psi());
    EXPECT_LE(fixed.max_violation(lift(fixed, s)), 1e-7 * scale) << i;
    EXPECT_LE(prog.max_violation(lift(prog, s)), 1e-7 * scale) << i;
  }
}

TEST(Relaxation, EpigraphAndMonotoneBound) {
  Rng rng(12);
  for (int i = 0; i < 8; ++i) {
    Instance in = random_single_cycle(rng, 3 + rng.index(3), rng.index(3));
    const std::size_t L = in.net.lossy_pipes().size();
    ConicProgram root = build_relaxation(in.net, in.q, all(L, Fixing::Free));
    PrimalSolution r = solve_conic(root);
    ASSERT_EQ(r.status, Status::Optimal);
    const double scale = std::max(1.0, in.net.reference_psi());
    for (std::size_t k = 0; k < L; ++k) {
      const double drop = std::abs(r.values[root.psi(root.from[k])] - r.values[root.psi(root.to[k])]);
      EXPECT_NEAR(r.values[root.t(k)], drop, 1e-6 * scale);
    }
    for (unsigned m = 0; m < (1u << L); ++m) {
      std::vector<Fixing> f(L);
      for (std::size_t k = 0; k < L; ++k) f[k] = (m >> k & 1) ? Fixing::One : Fixing::Zero;
      PrimalSolution s = solve_conic(build_relaxation(in.net, in.q, f));
      if (s.status == Status::Optimal) EXPECT_LE(r.objective, s.objective + 1e-7 * scale);
    }
  }
}

TEST(Relaxation, ScalesWithFrictionAndPressure) {
  Rng rng(41);
  for (int i = 0; i < 6; ++i) {
    Instance in = random_single_cycle(rng, 3 + rng.index(4), rng.index(4));
    const double c = 3.0;
    GasNetwork scaled;
    for (NodeId v = 0; v < in.net.num_nodes(); ++v) scaled.add_node(in.net.node_name(v));
    for (const Edge& e : in.net.edges()) scaled.add_pipe(e.name, e.from, e.to, c * e.friction);
    scaled.set_reference(in.net.reference_node(), c * in.net.reference_psi());
    const std::size_t L = in.net.lossy_pipes().size();
    PrimalSolution a = solve_conic(build_relaxation(in.net, in.q, all(L, Fixing::Free)));
    PrimalSolution b = solve_conic(build_relaxation(scaled, in.q, all(L, Fixing::Free)));
    ASSERT_EQ(a.status, Status::Optimal);
    ASSERT_EQ(b.status, Status::Optimal);
    EXPECT_NEAR(b.objective, c * a.objective, 1e-6 * std::max(1.0, b.objective));
  }
}

TEST(Relaxation, BigMWarning) {
  // Pressure drop of 2 * 50^2 = 5000 > 0.1 M.
  GasNetwork net = two_node_pipe(2.0, 1e4);
  PrimalSolution s = solve_conic(build_relaxation(net, inj({50, -50}), all(1, Fixing::One)));
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_TRUE(s.big_m_warning);
  PrimalSolution quiet = solve_conic(build_relaxation(two_node_pipe(), inj({2, -2}), all(1, Fixing::One)));
  EXPECT_FALSE(quiet.big_m_warning);
}

TEST(Relaxation, SetFixing) {
  ConicProgram prog = build_relaxation(two_node_pipe(), inj({2, -2}), all(1, Fixing::Free));
  EXPECT_EQ(prog.lower[prog.x(0)], 0.0);
  EXPECT_EQ(prog.upper[prog.x(0)], 1.0);
  set_fixing(prog, 0, Fixing::Zero);
  EXPECT_EQ(prog.upper[prog.x(0)], 0.0);
  EXPECT_EQ(solve_conic(prog).status, Status::Infeasible);
}
