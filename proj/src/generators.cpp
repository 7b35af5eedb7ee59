#include "gasflow/generators.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "gasflow/graph.hpp"

namespace gasflow {

namespace {

struct DraftEdge {
  NodeId u, v;
  bool compressor = false;
  double a = 0.0, alpha = 1.0;
};

struct Draft {
  std::size_t nodes = 0;
  std::vector<DraftEdge> edges;

  NodeId add_node() { return nodes++; }
  void add_pipe(Rng& rng, NodeId u, NodeId v, const GeneratorOptions& o) {
    if (rng.bernoulli(0.5)) std::swap(u, v);
    edges.push_back({u, v, false, rng.uniform(o.a_min, o.a_max), 1.0});
  }
};

GasNetwork build(const Draft& d, double psi_r) {
  GasNetwork net;
  for (std::size_t i = 0; i < d.nodes; ++i) net.add_node("n" + std::to_string(i));
  for (std::size_t k = 0; k < d.edges.size(); ++k) {
    const DraftEdge& e = d.edges[k];
    const std::string name = "e" + std::to_string(k);
    if (e.compressor)
      net.add_compressor(name, e.u, e.v, e.alpha);
    else
      net.add_pipe(name, e.u, e.v, e.a);
  }
  net.set_reference(0, psi_r);
  return net;
}

// Flow from u to v forced on bridge k by the injections.
double forced_flow(const Draft& d, std::size_t k, const std::vector<double>& q) {
  std::vector<std::vector<std::pair<NodeId, std::size_t>>> adj(d.nodes);
  for (std::size_t j = 0; j < d.edges.size(); ++j) {
    adj[d.edges[j].u].push_back({d.edges[j].v, j});
    adj[d.edges[j].v].push_back({d.edges[j].u, j});
  }
  std::vector<char> seen(d.nodes, 0);
  std::vector<NodeId> stack{d.edges[k].v};
  seen[d.edges[k].v] = 1;
  double side = 0.0;
  while (!stack.empty()) {
    NodeId x = stack.back();
    stack.pop_back();
    side += q[x];
    for (auto [y, j] : adj[x])
      if (j != k && !seen[y]) {
        seen[y] = 1;
        stack.push_back(y);
      }
  }
  return -side;
}

Instance finish(Draft d, Rng& rng, const GeneratorOptions& o) {
  // Compressors go on bridges only.
  GasNetwork probe = build(d, 1.0);
  const std::vector<bool> bridge = find_bridges(probe);
  for (std::size_t k = 0; k < d.edges.size(); ++k)
    if (bridge[k] && o.compressor_prob > 0.0 && rng.bernoulli(o.compressor_prob)) {
      d.edges[k].compressor = true;
      d.edges[k].alpha = rng.uniform(o.alpha_min, o.alpha_max);
    }

  Injections q = random_injections(probe, rng, o);
  for (std::size_t k = 0; k < d.edges.size(); ++k)
    if (d.edges[k].compressor && forced_flow(d, k, q.q) < 0.0) std::swap(d.edges[k].u, d.edges[k].v);

  // Any GF flow is acyclic, so no edge carries more than the total supply F
  // and no pipe drops more than a F^2. Along a path from the reference the
  // squared pressure is at least psi_r / prod(alpha) - sum(drops).
  double supply = 0.0;
  for (double v : q.q) supply += std::max(0.0, v);
  double drops = 0.0, ratio = 1.0;
  for (const DraftEdge& e : d.edges) {
    if (e.compressor)
      ratio *= e.alpha;
    else
      drops += e.a * supply * supply;
  }
  const double psi_r = std::max(1.0, o.pressure_margin * ratio * drops);
  return Instance{build(d, psi_r), std::move(q)};
}

void attach_tree(Draft& d, Rng& rng, std::size_t extra, const GeneratorOptions& o) {
  for (std::size_t i = 0; i < extra; ++i) {
    NodeId u = NodeId(rng.index(d.nodes));
    NodeId v = d.add_node();
    d.add_pipe(rng, u, v, o);
  }
}

void attach_cycle(Draft& d, Rng& rng, NodeId at, std::size_t length, const GeneratorOptions& o) {
  NodeId prev = at;
  for (std::size_t i = 1; i < length; ++i) {
    NodeId v = d.add_node();
    d.add_pipe(rng, prev, v, o);
    prev = v;
  }
  d.add_pipe(rng, prev, at, o);
}

}  // namespace

Injections random_injections(const GasNetwork& net, Rng& rng, const GeneratorOptions& opts) {
  const std::size_t n = net.num_nodes();
  Injections q;
  q.q.assign(n, 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double z = rng.normal();
    if (rng.bernoulli(opts.junction_prob)) continue;
    q.q[i] = opts.q_scale * z;
    sum += q.q[i];
  }
  if (n > 0) q.q[n - 1] = -sum;
  return q;
}

Instance random_tree(Rng& rng, std::size_t n, const GeneratorOptions& opts) {
  Draft d;
  d.add_node();
  attach_tree(d, rng, n > 0 ? n - 1 : 0, opts);
  return finish(std::move(d), rng, opts);
}

Instance random_single_cycle(Rng& rng, std::size_t cycle_length, std::size_t extra_nodes,
                             const GeneratorOptions& opts) {
  Draft d;
  d.add_node();
  // The reference is either on the cycle or hangs off it.
  if (rng.bernoulli(0.5) || extra_nodes == 0) {
    attach_cycle(d, rng, 0, cycle_length, opts);
    attach_tree(d, rng, extra_nodes, opts);
  } else {
    NodeId c = d.add_node();
    d.add_pipe(rng, 0, c, opts);
    attach_cycle(d, rng, c, cycle_length, opts);
    attach_tree(d, rng, extra_nodes - 1, opts);
  }
  return finish(std::move(d), rng, opts);
}

Instance random_cactus(Rng& rng, std::size_t cycles, std::size_t extra_nodes, std::size_t max_cycle,
                       const GeneratorOptions& opts) {
  Draft d;
  d.add_node();
  std::size_t placed_cycles = 0, placed_nodes = 0;
  while (placed_cycles < cycles || placed_nodes < extra_nodes) {
    const bool cycle = placed_nodes >= extra_nodes ||
                       (placed_cycles < cycles && rng.bernoulli(0.5));
    NodeId at = NodeId(rng.index(d.nodes));
    if (cycle) {
      // A new cycle shares only one node with the existing graph, so cycles
      // stay edge-disjoint.
      attach_cycle(d, rng, at, 3 + rng.index(max_cycle - 2), opts);
      ++placed_cycles;
    } else {
      NodeId v = d.add_node();
      d.add_pipe(rng, at, v, opts);
      ++placed_nodes;
    }
  }
  return finish(std::move(d), rng, opts);
}

Instance random_meshed(Rng& rng, std::size_t n, std::size_t chords, const GeneratorOptions& opts) {
  Draft d;
  d.add_node();
  attach_tree(d, rng, n - 1, opts);
  std::set<std::pair<NodeId, NodeId>> present;
  for (const DraftEdge& e : d.edges) present.insert(std::minmax(e.u, e.v));
  std::size_t added = 0, tries = 0;
  while (added < chords && tries++ < 1000 * (chords + 1)) {
    NodeId u = NodeId(rng.index(n)), v = NodeId(rng.index(n));
    if (u == v || present.count(std::minmax(u, v))) continue;
    present.insert(std::minmax(u, v));
    d.add_pipe(rng, u, v, opts);
    ++added;
  }
  return finish(std::move(d), rng, opts);
}

}  // namespace gasflow
