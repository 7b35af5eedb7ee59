#pragma once

#include <optional>
#include <span>
#include <vector>

#include "gasflow/network.hpp"

namespace gasflow {

struct SpanningTree {
  NodeId root = 0;
  std::vector<EdgeId> tree_edges;
  std::vector<EdgeId> link_edges;
  // Per node: the tree edge towards the root (empty at the root).
  std::vector<std::optional<EdgeId>> parent_edge;
  std::vector<std::size_t> depth;
};

/// Signed {-1, 0, +1} edge vector of a simple cycle. Entry +1 means the edge
/// direction agrees with the traversal direction.
struct CycleIndicator {
  std::vector<int> entries;

  std::vector<EdgeId> support() const;
  void normalize_orientation();  // first nonzero entry becomes +1
};

struct CycleBasis {
  std::vector<CycleIndicator> cycles;
  std::vector<EdgeId> links;  // link edge generating each cycle
};

struct AssumptionReport {
  bool a1_holds = true;  // no compressor lies on a cycle
  bool a2_holds = true;  // cycles are pairwise edge-disjoint
  std::vector<EdgeId> compressors_on_cycles;
  // Edge sets of biconnected blocks that carry more than one independent cycle.
  std::vector<std::vector<EdgeId>> overlapping_blocks;
};

struct CycleTerm {
  double lambda = 0.0;
  CycleIndicator cycle;
};

struct CycleDecomposition {
  std::vector<CycleTerm> terms;

  std::vector<double> reconstruct(std::size_t num_edges) const;
};

/// BFS spanning tree from the reference node; neighbours visited by
/// increasing edge id.
SpanningTree spanning_tree(const GasNetwork& net);

/// Spanning tree over a caller-chosen edge set, rooted at the reference.
/// Throws if the edges do not form a spanning tree.
SpanningTree spanning_tree_from_edges(const GasNetwork& net, std::span<const EdgeId> edges);

/// One fundamental cycle per link edge, oriented so the first nonzero entry
/// is +1.
CycleBasis fundamental_cycles(const GasNetwork& net, const SpanningTree& tree);

/// Bridges of the (multi)graph: edges whose removal disconnects it.
std::vector<bool> find_bridges(const GasNetwork& net);

/// Biconnected blocks as edge-id lists (Tarjan, edge-stack variant).
std::vector<std::vector<EdgeId>> biconnected_blocks(const GasNetwork& net);

AssumptionReport check_assumptions(const GasNetwork& net);

/// Conic decomposition of a circulation into sign-compatible cycles by
/// repeatedly peeling a directed cycle aligned with the residual signs.
CycleDecomposition cycle_decompose(const GasNetwork& net, std::span<const double> v);

/// A' v per node.
std::vector<double> node_divergence(const GasNetwork& net, std::span<const double> v);

}  // namespace gasflow
