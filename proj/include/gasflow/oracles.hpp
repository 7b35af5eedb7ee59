#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gasflow/network.hpp"

namespace gasflow {

// Reference solutions built without any solver code: own leaf elimination,
// own cycle detection and pressure propagation.

struct OracleSolution {
  FlowState state;
  std::string method;
  ResidualReport residuals;
  double loop_flow = 0.0;            // lambda
  std::vector<int> cycle;            // indicator over edges, loop orientation
  int bisection_steps = 0;
};

/// Gas flow on a network with one cycle and no compressor on it: all flows
/// are phi0 + lambda n_C and the loop pressure sum, strictly increasing in
/// lambda, is driven to zero by bisection on [-|q|_1, |q|_1].
///
/// Throws NoCycle, MultiCycle, CompressorOnCycle, InfeasiblePressure or
/// InfeasibleCompressorDirection.
OracleSolution brute_force_single_cycle(const GasNetwork& net, const Injections& q);

struct UniquenessReport {
  int starts = 0;
  int converged = 0;
  bool misocp_solved = false;
  std::string misocp_status;
  // Max over node of the spread of psi across all converged runs and the
  // MI-SOCP solution; 0 when fewer than two runs are available.
  double max_spread = 0.0;
  std::vector<std::string> nr_statuses;
};

/// NR from n_starts random positive starts (psi_r times U(0.1, 2)) plus solve_gf.
UniquenessReport multistart_uniqueness(const GasNetwork& net, const Injections& q, int n_starts,
                                       std::uint64_t seed);

/// Loop-closure sign test on a single-cycle network: false iff every cycle
/// edge has sign(phi_b - phi_a) n_C of one strict sign. Returns nullopt when
/// a state violates the pipe or compressor laws by more than 1e-8 (scaled) or
/// the two states disagree at the reference node.
std::optional<bool> lemma2_scenario_check(const GasNetwork& net, const FlowState& a,
                                          const FlowState& b);

/// Edges of the unique cycle of a unicyclic network, as a signed indicator
/// oriented along the lowest-id cycle edge. Throws NoCycle or MultiCycle.
std::vector<int> single_cycle_indicator(const GasNetwork& net);

}  // namespace gasflow
