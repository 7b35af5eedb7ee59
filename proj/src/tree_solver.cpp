#include "gasflow/tree_solver.hpp"

#include <queue>
#include <sstream>

namespace gasflow {

FlowState solve_tree(const GasNetwork& net, const Injections& q) {
  const std::size_t n = net.num_nodes();
  const std::size_t p = net.num_edges();
  if (q.q.size() != n) throw GasFlowError(ErrorCode::DimensionMismatch, "solve_tree: q size");
  if (p + 1 != n || !is_connected(net))
    throw GasFlowError(ErrorCode::NotATree, "solve_tree: network is not a tree");

  const NodeId ref = net.reference_node();
  auto adj = net.incidence_lists();
  std::vector<std::size_t> degree(n);
  for (NodeId v = 0; v < n; ++v) degree[v] = adj[v].size();

  FlowState state;
  state.phi.assign(p, 0.0);
  state.psi.assign(n, 0.0);

  // Leaf elimination; the reference is stripped last and absorbs 1'q.
  std::vector<double> rest(q.q.begin(), q.q.end());
  std::vector<char> removed_edge(p, 0), removed_node(n, 0);
  std::queue<NodeId> leaves;
  for (NodeId v = 0; v < n; ++v)
    if (degree[v] == 1 && v != ref) leaves.push(v);
  while (!leaves.empty()) {
    NodeId v = leaves.front();
    leaves.pop();
    EdgeId e = p;
    for (EdgeId f : adj[v])
      if (!removed_edge[f]) e = f;
    const Edge& ed = net.edge(e);
    NodeId u = ed.other(v);
    if (ed.from == v) {
      state.phi[e] = rest[v];
      rest[u] += state.phi[e];
    } else {
      state.phi[e] = -rest[v];
      rest[u] -= state.phi[e];
    }
    removed_edge[e] = 1;
    removed_node[v] = 1;
    if (--degree[u] == 1 && u != ref) leaves.push(u);
  }

  for (EdgeId e = 0; e < p; ++e) {
    if (net.edge(e).is_compressor() && state.phi[e] < 0.0) {
      std::ostringstream os;
      os << "solve_tree: compressor '" << net.edge(e).name << "' would carry flow "
         << state.phi[e];
      throw GasFlowError(ErrorCode::InfeasibleCompressorDirection, os.str());
    }
  }

  // Pressures outward from the reference.
  std::vector<char> known(n, 0);
  state.psi[ref] = net.reference_psi();
  known[ref] = 1;
  std::queue<NodeId> todo;
  todo.push(ref);
  while (!todo.empty()) {
    NodeId u = todo.front();
    todo.pop();
    for (EdgeId e : adj[u]) {
      const Edge& ed = net.edge(e);
      NodeId v = ed.other(u);
      if (known[v]) continue;
      if (ed.is_pipe()) {
        double drop = pipe_pressure_drop(ed.friction, state.phi[e]);
        state.psi[v] = (ed.from == u) ? state.psi[u] - drop : state.psi[u] + drop;
      } else {
        state.psi[v] = (ed.from == u) ? ed.ratio * state.psi[u] : state.psi[u] / ed.ratio;
      }
      if (state.psi[v] < 0.0) {
        std::ostringstream os;
        os << "solve_tree: squared pressure at '" << net.node_name(v) << "' would be "
           << state.psi[v];
        throw GasFlowError(ErrorCode::InfeasiblePressure, os.str());
      }
      known[v] = 1;
      todo.push(v);
    }
  }
  return state;
}

}  // namespace gasflow
