#include <gtest/gtest.h>

#include "gasflow/generators.hpp"
#include "gasflow/network_io.hpp"
#include "test_util.hpp"

using namespace gasflow;
using namespace gasflow::testing;

namespace {

const char* kTwoNode = R"({"format_version": 1,
  "nodes": ["1", "2"],
  "edges": [{"id": "p", "from": "1", "to": "2", "type": "pipe", "a": 4.0}],
  "reference": {"node": "1", "psi": 100}})";

ErrorCode parse_error(const std::string& text) {
  try {
    parse_network(text);
  } catch (const GasFlowError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for " << text;
  return ErrorCode::Io;
}

}  // namespace

TEST(Parse, TwoNodeFile) {
  GasNetwork net = parse_network(kTwoNode);
  EXPECT_EQ(net.num_nodes(), 2u);
  EXPECT_EQ(net.num_edges(), 1u);
  EXPECT_EQ(net.edge(0).kind, EdgeKind::Pipe);
  EXPECT_DOUBLE_EQ(net.edge(0).friction, 4.0);
  EXPECT_EQ(net.reference_node(), 0u);
  EXPECT_DOUBLE_EQ(net.reference_psi(), 100.0);
  EXPECT_EQ(*net.find_node("2"), 1u);
}

TEST(Parse, Errors) {
  std::string dangling = kTwoNode;
  dangling.replace(dangling.find("\"to\": \"2\""), 9, "\"to\": \"99\"");
  EXPECT_EQ(parse_error(dangling), ErrorCode::DanglingEndpoint);
  try {
    parse_network(dangling);
  } catch (const GasFlowError& e) {
    EXPECT_NE(std::string(e.what()).find("dangling endpoint"), std::string::npos);
  }

  std::string dup = kTwoNode;
  dup.replace(dup.find("[\"1\", \"2\"]"), 10, "[\"1\", \"2\", \"2\"]");
  EXPECT_EQ(parse_error(dup), ErrorCode::DuplicateId);

  EXPECT_EQ(parse_error("{\"nodes\": [1,"), ErrorCode::Parse);
  try {
    parse_network("{\"nodes\": [1,");
  } catch (const GasFlowError& e) {
    EXPECT_NE(std::string(e.what()).find("byte"), std::string::npos);
  }
  EXPECT_EQ(parse_error(R"({"format_version": 1, "nodes": ["1"], "edges": []})"), ErrorCode::Schema);
  EXPECT_EQ(parse_error(R"({"format_version": 2, "nodes": ["1"], "edges": [],
                            "reference": {"node": "1", "psi": 1}})"),
            ErrorCode::Schema);

  std::string zero_a = kTwoNode;
  zero_a.replace(zero_a.find("4.0"), 3, "0.0");
  EXPECT_EQ(parse_error(zero_a), ErrorCode::InvalidNetwork);
}

TEST(Parse, BelgianTopology) {
  GasNetwork net = load_network(data_path("belgian_meshed.json"));
  EXPECT_EQ(net.num_nodes(), 20u);
  EXPECT_EQ(net.num_edges(), 22u);
  GasNetwork split = load_network(data_path("belgian_noideal.json"));
  EXPECT_EQ(split.num_nodes(), 21u);
  EXPECT_EQ(split.num_edges(), 23u);
}

TEST(Parse, RoundTripIsIdentityOnCanonicalForm) {
  for (const char* f : {"two_node.json", "triangle.json", "fig1.json", "belgian_meshed.json",
                        "belgian_noideal.json", "belgian_tree.json"}) {
    const std::string once = serialize_network(load_network(data_path(f)));
    const std::string twice = serialize_network(parse_network(once));
    EXPECT_EQ(once, twice) << f;
  }
  Rng rng(3);
  GeneratorOptions o;
  o.compressor_prob = 0.4;
  for (int i = 0; i < 20; ++i) {
    Instance in = random_meshed(rng, 8, 3, o);
    const std::string s = serialize_network(in.net);
    EXPECT_EQ(serialize_network(parse_network(s)), s);
    const std::string qs = serialize_scenario(in.net, in.q);
    Injections back = parse_scenario(qs, in.net);
    EXPECT_EQ(back.q, in.q.q);
  }
}

TEST(Scenario, DefaultsAndBalance) {
  GasNetwork net = parse_network(kTwoNode);
  Injections q = parse_scenario(R"({"injections": {"1": 2.0, "2": -2.0}})", net);
  EXPECT_EQ(q.q, (std::vector<double>{2.0, -2.0}));
  EXPECT_THROW(parse_scenario(R"({"injections": {"1": 2.0}})", net), GasFlowError);
  Injections loose = parse_scenario(R"({"injections": {"1": 2.0}})", net, false);
  EXPECT_EQ(loose.q[1], 0.0);
  EXPECT_THROW(parse_scenario(R"({"injections": {"7": 1}})", net, false), GasFlowError);
  EXPECT_TRUE(q.balanced(tol::kBalance));
}

TEST(Validate, Findings) {
  EXPECT_TRUE(validate(two_node_pipe()).ok());

  GasNetwork zero = two_node_pipe(0.0);
  ValidationReport r = validate(zero);
  EXPECT_TRUE(r.has(Violation::NonpositiveFriction));

  GasNetwork split;
  for (const char* n : {"1", "2", "3", "4"}) split.add_node(n);
  split.add_pipe("a", 0, 1, 1.0);
  split.add_pipe("b", 2, 3, 1.0);
  split.set_reference(0, 10.0);
  EXPECT_TRUE(validate(split).has(Violation::Disconnected));
  EXPECT_FALSE(is_connected(split));

  GasNetwork noref;
  noref.add_node("1");
  noref.add_node("2");
  noref.add_pipe("p", 0, 1, 1.0);
  EXPECT_TRUE(validate(noref).has(Violation::MissingReference));

  GasNetwork loop = two_node_pipe();
  loop.add_pipe("self", 1, 1, 1.0);
  EXPECT_TRUE(validate(loop).has(Violation::SelfLoop));

  GasNetwork badratio = two_node_compressor(0.0);
  EXPECT_TRUE(validate(badratio).has(Violation::NonpositiveRatio));

  GasNetwork badref = two_node_pipe(4.0, -1.0);
  EXPECT_TRUE(validate(badref).has(Violation::NonpositiveReferencePressure));
}

TEST(Incidence, Definition) {
  Eigen::MatrixXi a = incidence_matrix(two_node_pipe());
  EXPECT_EQ(a, (Eigen::MatrixXi(1, 2) << 1, -1).finished());

  Eigen::MatrixXi t = incidence_matrix(triangle());
  Eigen::MatrixXi want(3, 3);
  want << 1, -1, 0, 0, 1, -1, 1, 0, -1;
  EXPECT_EQ(t, want);
}

TEST(Incidence, RowsSumToZero) {
  Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    Instance in = random_meshed(rng, 3 + rng.index(15), rng.index(6));
    Eigen::MatrixXi a = incidence_matrix(in.net);
    EXPECT_EQ((a * Eigen::VectorXi::Ones(a.cols())).cwiseAbs().sum(), 0);
  }
}

TEST(Split, NonidealCompressor) {
  GasNetwork net;
  net.add_node("1");
  net.add_node("2");
  EdgeId e = net.add_nonideal_compressor("c", 0, 1, 0.5, 1.3);
  net.set_reference(0, 100.0);
  SplitResult r = split_nonideal_compressor(net, e, 0.5, 1.3);
  ASSERT_TRUE(r.applied);
  EXPECT_EQ(r.network.num_nodes(), 3u);
  ASSERT_EQ(r.network.num_edges(), 2u);
  EXPECT_EQ(r.network.edge(0).kind, EdgeKind::Compressor);
  EXPECT_EQ(r.network.edge(1).kind, EdgeKind::Pipe);
  EXPECT_EQ(r.network.edge(0).from, 0u);
  EXPECT_EQ(r.network.edge(1).to, 1u);
  EXPECT_EQ(r.network.edge(0).to, r.network.edge(1).from);
  EXPECT_DOUBLE_EQ(r.network.edge(0).ratio, 1.3);
  EXPECT_DOUBLE_EQ(r.network.edge(1).friction, 0.5);
  EXPECT_TRUE(validate(r.network).ok());

  GasNetwork ideal = two_node_compressor();
  SplitResult same = split_nonideal_compressor(ideal, 0, 0.5, 1.3);
  EXPECT_FALSE(same.applied);
  EXPECT_EQ(serialize_network(same.network), serialize_network(ideal));
}

TEST(Residuals, Examples) {
  GasNetwork net = two_node_pipe();
  Injections q = inj({2, -2});
  ResidualReport r = residuals(net, q, FlowState{{2.0}, {100.0, 84.0}});
  EXPECT_EQ(r.max(), 0.0);
  ResidualReport off = residuals(net, q, FlowState{{2.0}, {100.0, 80.0}});
  EXPECT_DOUBLE_EQ(off.weymouth[0], 4.0);
  EXPECT_DOUBLE_EQ(off.mass, 0.0);

  GasNetwork comp = two_node_compressor(1.5);
  ResidualReport c = residuals(comp, q, FlowState{{-1.0}, {100.0, 150.0}});
  EXPECT_DOUBLE_EQ(c.compressor_ratio[0], 0.0);
  EXPECT_DOUBLE_EQ(c.compressor_direction[0], 1.0);

  ResidualReport ref = residuals(net, q, FlowState{{2.0}, {90.0, 74.0}});
  EXPECT_DOUBLE_EQ(ref.reference, 10.0);
  EXPECT_THROW(residuals(net, q, FlowState{{2.0, 1.0}, {100.0, 84.0}}), GasFlowError);
}

TEST(Injections, Balance) {
  EXPECT_DOUBLE_EQ(inj({1, 2, -3}).imbalance(), 0.0);
  EXPECT_FALSE(inj({1, 2, -2}).balanced(tol::kBalance));
}
