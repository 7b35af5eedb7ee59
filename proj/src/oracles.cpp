#include "gasflow/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gasflow/misocp.hpp"
#include "gasflow/newton.hpp"
#include "gasflow/rng.hpp"
#include "gasflow/tolerances.hpp"

namespace gasflow {

namespace {

std::vector<std::vector<EdgeId>> adjacency(const GasNetwork& net) {
  std::vector<std::vector<EdgeId>> adj(net.num_nodes());
  for (EdgeId e = 0; e < net.num_edges(); ++e) {
    adj[net.edge(e).from].push_back(e);
    adj[net.edge(e).to].push_back(e);
  }
  return adj;
}

bool connected(const GasNetwork& net, const std::vector<std::vector<EdgeId>>& adj) {
  std::vector<char> seen(net.num_nodes(), 0);
  std::vector<NodeId> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    NodeId u = stack.back();
    stack.pop_back();
    for (EdgeId e : adj[u]) {
      NodeId v = net.edge(e).other(u);
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == net.num_nodes();
}

double loop_sum(const GasNetwork& net, const std::vector<int>& cycle,
                const std::vector<double>& phi0, double lambda) {
  double r = 0.0;
  for (EdgeId e = 0; e < cycle.size(); ++e) {
    if (!cycle[e]) continue;
    const double f = phi0[e] + lambda * cycle[e];
    r += cycle[e] * net.edge(e).friction * f * std::abs(f);
  }
  return r;
}

}  // namespace

std::vector<int> single_cycle_indicator(const GasNetwork& net) {
  const std::size_t n = net.num_nodes(), p = net.num_edges();
  auto adj = adjacency(net);
  if (n == 0 || !connected(net, adj))
    throw GasFlowError(ErrorCode::Disconnected, "oracle: network is not connected");
  if (p + 1 == n) throw GasFlowError(ErrorCode::NoCycle, "oracle: network has no cycle");
  if (p != n) throw GasFlowError(ErrorCode::MultiCycle, "oracle: network has more than one cycle");

  // Strip degree-1 nodes; what remains of a unicyclic graph is its cycle.
  std::vector<std::size_t> deg(n);
  std::vector<char> gone_edge(p, 0);
  for (NodeId v = 0; v < n; ++v) deg[v] = adj[v].size();
  std::vector<NodeId> leaves;
  for (NodeId v = 0; v < n; ++v)
    if (deg[v] == 1) leaves.push_back(v);
  while (!leaves.empty()) {
    NodeId v = leaves.back();
    leaves.pop_back();
    for (EdgeId e : adj[v]) {
      if (gone_edge[e]) continue;
      gone_edge[e] = 1;
      NodeId u = net.edge(e).other(v);
      if (--deg[u] == 1) leaves.push_back(u);
    }
    deg[v] = 0;
  }

  std::vector<int> ind(p, 0);
  EdgeId first = p;
  for (EdgeId e = 0; e < p && first == p; ++e)
    if (!gone_edge[e]) first = e;
  // Walk the cycle starting along the first edge's own direction.
  ind[first] = 1;
  NodeId start = net.edge(first).from, at = net.edge(first).to;
  EdgeId came = first;
  while (at != start) {
    EdgeId next = p;
    for (EdgeId e : adj[at])
      if (!gone_edge[e] && e != came) next = e;
    const Edge& ed = net.edge(next);
    ind[next] = ed.from == at ? 1 : -1;
    at = ed.other(at);
    came = next;
  }
  return ind;
}

OracleSolution brute_force_single_cycle(const GasNetwork& net, const Injections& q) {
  const std::size_t n = net.num_nodes(), p = net.num_edges();
  if (q.q.size() != n) throw GasFlowError(ErrorCode::DimensionMismatch, "oracle: injection size");
  std::vector<int> cycle = single_cycle_indicator(net);
  for (EdgeId e = 0; e < p; ++e)
    if (cycle[e] && !net.edge(e).is_pipe())
      throw GasFlowError(ErrorCode::CompressorOnCycle,
                         "oracle: edge '" + net.edge(e).name + "' on the cycle is not a pipe");

  // Particular solution: cut the first cycle edge, eliminate leaves of the tree.
  EdgeId cut = 0;
  while (!cycle[cut]) ++cut;
  auto adj = adjacency(net);
  std::vector<double> phi0(p, 0.0), excess(q.q.begin(), q.q.end());
  std::vector<std::size_t> deg(n, 0);
  std::vector<char> used(p, 0);
  used[cut] = 1;
  for (EdgeId e = 0; e < p; ++e)
    if (!used[e]) {
      ++deg[net.edge(e).from];
      ++deg[net.edge(e).to];
    }
  const NodeId root = net.reference_node();
  std::vector<NodeId> leaves;
  for (NodeId v = 0; v < n; ++v)
    if (deg[v] == 1 && v != root) leaves.push_back(v);
  while (!leaves.empty()) {
    NodeId v = leaves.back();
    leaves.pop_back();
    for (EdgeId e : adj[v]) {
      if (used[e]) continue;
      used[e] = 1;
      const Edge& ed = net.edge(e);
      NodeId u = ed.other(v);
      // Node v must export excess[v] through e.
      phi0[e] = ed.from == v ? excess[v] : -excess[v];
      excess[u] += excess[v];
      excess[v] = 0.0;
      if (--deg[u] == 1 && u != root) leaves.push_back(u);
    }
  }

  double bound = 0.0;
  for (double v : q.q) bound += std::abs(v);

  OracleSolution out;
  out.method = "single_cycle_bisection";
  out.cycle = cycle;

  // Monotonicity on a grid before trusting the bracket.
  if (bound > 0.0) {
    double prev = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 64; ++i) {
      const double lam = -bound + 2.0 * bound * i / 64.0;
      const double r = loop_sum(net, cycle, phi0, lam);
      if (!(r > prev)) {
        std::ostringstream os;
        os << "oracle: loop pressure sum not increasing at lambda " << lam;
        throw GasFlowError(ErrorCode::InvalidNetwork, os.str());
      }
      prev = r;
    }
  }

  double lo = -bound, hi = bound, lam = 0.0;
  double scale = 1.0;
  for (EdgeId e = 0; e < p; ++e)
    if (cycle[e]) scale = std::max(scale, net.edge(e).friction * bound * bound);
  for (int it = 0; it < 400; ++it) {
    lam = 0.5 * (lo + hi);
    const double r = loop_sum(net, cycle, phi0, lam);
    out.bisection_steps = it + 1;
    if (std::abs(r) <= 1e-12 * scale || hi - lo <= 0.0 || lam == lo || lam == hi) break;
    (r > 0.0 ? hi : lo) = lam;
  }
  out.loop_flow = lam;

  FlowState& s = out.state;
  s.phi.resize(p);
  for (EdgeId e = 0; e < p; ++e) s.phi[e] = phi0[e] + lam * cycle[e];
  for (EdgeId e = 0; e < p; ++e)
    if (net.edge(e).is_compressor() && s.phi[e] < -1e-12 * std::max(1.0, bound))
      throw GasFlowError(ErrorCode::InfeasibleCompressorDirection,
                         "oracle: compressor '" + net.edge(e).name + "' runs backwards");

  // Pressures over the tree without the cut edge.
  s.psi.assign(n, 0.0);
  std::vector<char> known(n, 0);
  std::vector<NodeId> stack{root};
  s.psi[root] = net.reference_psi();
  known[root] = 1;
  while (!stack.empty()) {
    NodeId u = stack.back();
    stack.pop_back();
    for (EdgeId e : adj[u]) {
      if (e == cut) continue;
      const Edge& ed = net.edge(e);
      NodeId v = ed.other(u);
      if (known[v]) continue;
      const bool fwd = ed.from == u;
      if (ed.is_pipe()) {
        const double drop = ed.friction * s.phi[e] * std::abs(s.phi[e]);
        s.psi[v] = fwd ? s.psi[u] - drop : s.psi[u] + drop;
      } else {
        s.psi[v] = fwd ? s.psi[u] * ed.ratio : s.psi[u] / ed.ratio;
      }
      known[v] = 1;
      stack.push_back(v);
    }
  }
  for (NodeId v = 0; v < n; ++v)
    if (s.psi[v] < 0.0)
      throw GasFlowError(ErrorCode::InfeasiblePressure,
                         "oracle: squared pressure at '" + net.node_name(v) + "' is negative");
  out.residuals = residuals(net, q, s);
  return out;
}

UniquenessReport multistart_uniqueness(const GasNetwork& net, const Injections& q, int n_starts,
                                       std::uint64_t seed) {
  UniquenessReport rep;
  rep.starts = n_starts;
  Rng rng(seed);
  std::vector<std::vector<double>> sols;
  for (int k = 0; k < n_starts; ++k) {
    std::vector<double> init(net.num_nodes());
    for (double& v : init) v = net.reference_psi() * rng.uniform(0.1, 2.0);
    NrResult r = nr_solve(net, q, init);
    rep.nr_statuses.emplace_back(to_string(r.status));
    if (r.converged() && residuals(net, q, r.state).max() <= tol::kFeasible) {
      ++rep.converged;
      sols.push_back(r.state.psi);
    }
  }
  SolveResult g = solve_gf(net, q);
  rep.misocp_status = to_string(g.status);
  rep.misocp_solved = g.status == SolveStatus::Solved;
  if (rep.misocp_solved) sols.push_back(g.state.psi);
  for (NodeId v = 0; v < net.num_nodes() && sols.size() > 1; ++v) {
    double lo = sols[0][v], hi = sols[0][v];
    for (const auto& s : sols) {
      lo = std::min(lo, s[v]);
      hi = std::max(hi, s[v]);
    }
    rep.max_spread = std::max(rep.max_spread, hi - lo);
  }
  return rep;
}

std::optional<bool> lemma2_scenario_check(const GasNetwork& net, const FlowState& a,
                                          const FlowState& b) {
  const std::size_t n = net.num_nodes(), p = net.num_edges();
  if (a.phi.size() != p || b.phi.size() != p || a.psi.size() != n || b.psi.size() != n)
    throw GasFlowError(ErrorCode::DimensionMismatch, "scenario check: state size");
  const double scale = std::max(1.0, net.reference_psi());
  auto laws_hold = [&](const FlowState& s) {
    for (EdgeId e = 0; e < p; ++e) {
      const Edge& ed = net.edge(e);
      const double pm = s.psi[ed.from], pn = s.psi[ed.to];
      double r = ed.is_pipe() ? pm - pn - ed.friction * s.phi[e] * std::abs(s.phi[e])
                              : pn - ed.ratio * pm;
      if (std::abs(r) > tol::kOracle * scale) return false;
      if (ed.is_compressor() && s.phi[e] < -tol::kOracle) return false;
    }
    return true;
  };
  const NodeId ref = net.reference_node();
  if (!laws_hold(a) || !laws_hold(b) || std::abs(a.psi[ref] - b.psi[ref]) > tol::kOracle * scale)
    return std::nullopt;

  const std::vector<int> cycle = single_cycle_indicator(net);
  bool all_pos = true, all_neg = true;
  for (EdgeId e = 0; e < p; ++e) {
    if (!cycle[e]) continue;
    const double d = (b.phi[e] - a.phi[e]) * cycle[e];
    if (!(d > 0.0)) all_pos = false;
    if (!(d < 0.0)) all_neg = false;
  }
  return !(all_pos || all_neg);
}

}  // namespace gasflow
