#pragma once

#include "gasflow/network.hpp"

namespace gasflow {

/// Closed-form gas flow on a tree: flows by leaf elimination of the mass
/// balance, then squared pressures propagated outward from the reference.
///
/// Throws GasFlowError with NotATree, InfeasiblePressure (some psi < 0) or
/// InfeasibleCompressorDirection (negative compressor flow).
FlowState solve_tree(const GasNetwork& net, const Injections& q);

}  // namespace gasflow
