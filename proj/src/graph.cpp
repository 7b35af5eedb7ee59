#include "gasflow/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <set>

#include "gasflow/tolerances.hpp"

namespace gasflow {

std::vector<EdgeId> CycleIndicator::support() const {
  std::vector<EdgeId> out;
  for (EdgeId e = 0; e < entries.size(); ++e)
    if (entries[e] != 0) out.push_back(e);
  return out;
}

void CycleIndicator::normalize_orientation() {
  for (int v : entries) {
    if (v == 0) continue;
    if (v < 0)
      for (int& x : entries) x = -x;
    return;
  }
}

std::vector<double> CycleDecomposition::reconstruct(std::size_t num_edges) const {
  std::vector<double> out(num_edges, 0.0);
  for (const CycleTerm& t : terms)
    for (EdgeId e = 0; e < num_edges && e < t.cycle.entries.size(); ++e)
      out[e] += t.lambda * t.cycle.entries[e];
  return out;
}

SpanningTree spanning_tree(const GasNetwork& net) {
  const std::size_t n = net.num_nodes();
  SpanningTree tree;
  tree.root = net.reference_node();
  tree.parent_edge.assign(n, std::nullopt);
  tree.depth.assign(n, 0);

  auto adj = net.incidence_lists();
  std::vector<char> seen(n, 0), is_tree(net.num_edges(), 0);
  std::queue<NodeId> todo;
  todo.push(tree.root);
  seen[tree.root] = 1;
  std::size_t visited = 1;
  while (!todo.empty()) {
    NodeId u = todo.front();
    todo.pop();
    for (EdgeId e : adj[u]) {
      NodeId v = net.edge(e).other(u);
      if (seen[v]) continue;
      seen[v] = 1;
      ++visited;
      tree.parent_edge[v] = e;
      tree.depth[v] = tree.depth[u] + 1;
      is_tree[e] = 1;
      todo.push(v);
    }
  }
  if (visited != n) throw GasFlowError(ErrorCode::Disconnected, "spanning_tree: disconnected network");
  for (EdgeId e = 0; e < net.num_edges(); ++e)
    (is_tree[e] ? tree.tree_edges : tree.link_edges).push_back(e);
  return tree;
}

SpanningTree spanning_tree_from_edges(const GasNetwork& net, std::span<const EdgeId> edges) {
  const std::size_t n = net.num_nodes();
  if (edges.size() + 1 != n)
    throw GasFlowError(ErrorCode::NotATree, "spanning_tree_from_edges: wrong edge count");
  SpanningTree tree;
  tree.root = net.reference_node();
  tree.parent_edge.assign(n, std::nullopt);
  tree.depth.assign(n, 0);
  std::vector<char> chosen(net.num_edges(), 0);
  for (EdgeId e : edges) chosen.at(e) = 1;

  auto adj = net.incidence_lists();
  std::vector<char> seen(n, 0);
  std::queue<NodeId> todo;
  todo.push(tree.root);
  seen[tree.root] = 1;
  std::size_t visited = 1;
  while (!todo.empty()) {
    NodeId u = todo.front();
    todo.pop();
    for (EdgeId e : adj[u]) {
      if (!chosen[e]) continue;
      NodeId v = net.edge(e).other(u);
      if (seen[v]) continue;
      seen[v] = 1;
      ++visited;
      tree.parent_edge[v] = e;
      tree.depth[v] = tree.depth[u] + 1;
      todo.push(v);
    }
  }
  if (visited != n)
    throw GasFlowError(ErrorCode::NotATree, "spanning_tree_from_edges: edges do not span");
  for (EdgeId e = 0; e < net.num_edges(); ++e)
    (chosen[e] ? tree.tree_edges : tree.link_edges).push_back(e);
  return tree;
}

CycleBasis fundamental_cycles(const GasNetwork& net, const SpanningTree& tree) {
  CycleBasis basis;
  const std::size_t p = net.num_edges();
  for (EdgeId link : tree.link_edges) {
    const Edge& le = net.edge(link);
    CycleIndicator c;
    c.entries.assign(p, 0);
    c.entries[link] = 1;  // traverse the link from -> to
    // Close the loop: climb from the link head and the link tail to their
    // common ancestor. Edges on the head side are traversed upwards, those on
    // the tail side downwards.
    NodeId up = le.to, down = le.from;
    auto climb = [&](NodeId& w, bool upward) {
      EdgeId e = *tree.parent_edge[w];
      const Edge& ed = net.edge(e);
      NodeId parent = ed.other(w);
      bool agrees = upward ? (ed.from == w) : (ed.to == w);
      c.entries[e] += agrees ? 1 : -1;
      w = parent;
    };
    while (tree.depth[up] > tree.depth[down]) climb(up, true);
    while (tree.depth[down] > tree.depth[up]) climb(down, false);
    while (up != down) {
      climb(up, true);
      climb(down, false);
    }
    c.normalize_orientation();
    basis.cycles.push_back(std::move(c));
    basis.links.push_back(link);
  }
  return basis;
}

std::vector<bool> find_bridges(const GasNetwork& net) {
  const std::size_t n = net.num_nodes();
  auto adj = net.incidence_lists();
  std::vector<int> disc(n, -1), low(n, 0);
  std::vector<bool> bridge(net.num_edges(), false);
  int timer = 0;

  std::function<void(NodeId, std::optional<EdgeId>)> dfs = [&](NodeId u,
                                                               std::optional<EdgeId> via) {
    disc[u] = low[u] = timer++;
    for (EdgeId e : adj[u]) {
      if (via && e == *via) continue;
      NodeId v = net.edge(e).other(u);
      if (disc[v] < 0) {
        dfs(v, e);
        low[u] = std::min(low[u], low[v]);
        if (low[v] > disc[u]) bridge[e] = true;
      } else {
        low[u] = std::min(low[u], disc[v]);
      }
    }
  };
  for (NodeId s = 0; s < n; ++s)
    if (disc[s] < 0) dfs(s, std::nullopt);
  return bridge;
}

std::vector<std::vector<EdgeId>> biconnected_blocks(const GasNetwork& net) {
  const std::size_t n = net.num_nodes();
  auto adj = net.incidence_lists();
  std::vector<int> disc(n, -1), low(n, 0);
  std::vector<EdgeId> stack;
  std::vector<std::vector<EdgeId>> blocks;
  int timer = 0;

  std::function<void(NodeId, std::optional<EdgeId>)> dfs = [&](NodeId u,
                                                               std::optional<EdgeId> via) {
    disc[u] = low[u] = timer++;
    for (EdgeId e : adj[u]) {
      if (via && e == *via) continue;
      NodeId v = net.edge(e).other(u);
      if (disc[v] < 0) {
        stack.push_back(e);
        dfs(v, e);
        low[u] = std::min(low[u], low[v]);
        if (low[v] >= disc[u]) {
          std::vector<EdgeId> block;
          for (;;) {
            EdgeId top = stack.back();
            stack.pop_back();
            block.push_back(top);
            if (top == e) break;
          }
          std::sort(block.begin(), block.end());
          blocks.push_back(std::move(block));
        }
      } else if (disc[v] < disc[u]) {
        stack.push_back(e);  // back edge
        low[u] = std::min(low[u], disc[v]);
      }
    }
  };
  for (NodeId s = 0; s < n; ++s)
    if (disc[s] < 0) dfs(s, std::nullopt);
  return blocks;
}

AssumptionReport check_assumptions(const GasNetwork& net) {
  AssumptionReport report;
  for (const auto& block : biconnected_blocks(net)) {
    std::set<NodeId> nodes;
    for (EdgeId e : block) {
      nodes.insert(net.edge(e).from);
      nodes.insert(net.edge(e).to);
    }
    const long rank = static_cast<long>(block.size()) - static_cast<long>(nodes.size()) + 1;
    if (rank >= 1) {
      for (EdgeId e : block)
        if (net.edge(e).is_compressor()) report.compressors_on_cycles.push_back(e);
    }
    if (rank >= 2) report.overlapping_blocks.push_back(block);
  }
  std::sort(report.compressors_on_cycles.begin(), report.compressors_on_cycles.end());
  report.a1_holds = report.compressors_on_cycles.empty();
  report.a2_holds = report.overlapping_blocks.empty();
  return report;
}

std::vector<double> node_divergence(const GasNetwork& net, std::span<const double> v) {
  std::vector<double> div(net.num_nodes(), 0.0);
  for (EdgeId e = 0; e < net.num_edges(); ++e) {
    div[net.edge(e).from] += v[e];
    div[net.edge(e).to] -= v[e];
  }
  return div;
}

CycleDecomposition cycle_decompose(const GasNetwork& net, std::span<const double> v) {
  const std::size_t p = net.num_edges();
  if (v.size() != p) throw GasFlowError(ErrorCode::DimensionMismatch, "cycle_decompose: size");
  for (double d : node_divergence(net, v))
    if (std::abs(d) > tol::kDecompose)
      throw GasFlowError(ErrorCode::NotInNullSpace, "cycle_decompose: input not in null(A')");

  double scale = 1.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  const double floor = 1e-13 * scale;

  std::vector<double> r(v.begin(), v.end());
  for (double& x : r)
    if (std::abs(x) <= floor) x = 0.0;
  auto adj = net.incidence_lists();

  // Residual arc leaving node u along edge e, if any.
  auto leaves = [&](EdgeId e, NodeId u) {
    const Edge& ed = net.edge(e);
    return (r[e] > 0.0 && ed.from == u) || (r[e] < 0.0 && ed.to == u);
  };
  auto head = [&](EdgeId e) { return r[e] > 0.0 ? net.edge(e).to : net.edge(e).from; };

  CycleDecomposition out;
  for (std::size_t iter = 0; iter <= p; ++iter) {
    EdgeId start = p;
    double best = 0.0;
    for (EdgeId e = 0; e < p; ++e)
      if (std::abs(r[e]) > best) best = std::abs(r[e]), start = e;
    if (start == p) break;

    std::vector<NodeId> path_nodes{r[start] > 0.0 ? net.edge(start).from : net.edge(start).to};
    std::vector<EdgeId> path_edges{start};
    std::vector<long> position(net.num_nodes(), -1);
    position[path_nodes[0]] = 0;
    NodeId cur = head(start);
    bool stuck = false;
    while (position[cur] < 0) {
      position[cur] = static_cast<long>(path_nodes.size());
      path_nodes.push_back(cur);
      EdgeId next = p;
      double w = 0.0;
      for (EdgeId e : adj[cur])
        if (leaves(e, cur) && std::abs(r[e]) > w) w = std::abs(r[e]), next = e;
      if (next == p) {
        stuck = true;
        break;
      }
      path_edges.push_back(next);
      cur = head(next);
    }
    if (stuck) break;

    std::vector<EdgeId> cycle(path_edges.begin() + position[cur], path_edges.end());
    double lambda = std::abs(r[cycle.front()]);
    for (EdgeId e : cycle) lambda = std::min(lambda, std::abs(r[e]));
    CycleTerm term;
    term.lambda = lambda;
    term.cycle.entries.assign(p, 0);
    for (EdgeId e : cycle) term.cycle.entries[e] = r[e] > 0.0 ? 1 : -1;
    for (EdgeId e : cycle) {
      r[e] -= lambda * term.cycle.entries[e];
      if (std::abs(r[e]) <= floor) r[e] = 0.0;
    }
    out.terms.push_back(std::move(term));
  }
  return out;
}

}  // namespace gasflow
