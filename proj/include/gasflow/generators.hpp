#pragma once

#include "gasflow/network.hpp"
#include "gasflow/rng.hpp"

namespace gasflow {

struct Instance {
  GasNetwork net;
  Injections q;
};

struct GeneratorOptions {
  double a_min = 0.01, a_max = 1.0;      // pipe friction range
  double alpha_min = 1.05, alpha_max = 1.5;
  double compressor_prob = 0.0;          // per bridge edge
  double q_scale = 1.0;                  // injections ~ N(0, q_scale^2)
  double junction_prob = 0.3;            // probability a node gets zero injection
  double pressure_margin = 1.5;          // psi_r over the sufficient bound
};

// Every generator orients bridge compressors along their forced flow and
// sets psi_r above a bound that keeps all squared pressures positive, so the
// instances are feasible.

/// Random balanced injections: N(0, s^2) per node (some set to zero), the
/// last node balancing the rest.
Injections random_injections(const GasNetwork& net, Rng& rng, const GeneratorOptions& opts);

/// Random tree on n nodes (random attachment, random orientation). Bridge
/// compressors carry their forced flow forwards. Reference is node 0.
Instance random_tree(Rng& rng, std::size_t n, const GeneratorOptions& opts = {});

/// One cycle of the given length with trees hanging off it (extra nodes).
Instance random_single_cycle(Rng& rng, std::size_t cycle_length, std::size_t extra_nodes,
                             const GeneratorOptions& opts = {});

/// Cactus: edge-disjoint cycles (lengths 3..max_cycle) and tree edges glued
/// at random nodes. Compressors only on bridges.
Instance random_cactus(Rng& rng, std::size_t cycles, std::size_t extra_nodes,
                       std::size_t max_cycle = 6, const GeneratorOptions& opts = {});

/// Random spanning tree plus chords; chords make overlapping cycles.
Instance random_meshed(Rng& rng, std::size_t n, std::size_t chords,
                       const GeneratorOptions& opts = {});

}  // namespace gasflow
