#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gasflow/relaxation.hpp"

namespace gasflow {

/// Flow-direction binaries, one per lossy pipe (GasNetwork::lossy_pipes order).
struct BinaryAssignment {
  std::vector<int> x;
};

enum class NodeOrder { BestFirst, DepthFirst };
enum class BranchRule { MostFractional, FirstFractional };

struct MisocpOptions {
  double big_m = tol::kDefaultBigM;
  double time_limit = std::numeric_limits<double>::infinity();  // seconds
  NodeOrder order = NodeOrder::BestFirst;
  BranchRule branching = BranchRule::MostFractional;
  bool presolve = true;    // fix binaries of bridge pipes from their forced flow
  bool strengthen = true;  // t >= a phi^2 cuts
  bool heuristic = true;   // rounding dives for an early incumbent
  bool polish = true;      // Newton refinement of the optimum on the flow equations
  conic::ConeSettings cone;
};

struct BnbStats {
  std::size_t nodes_explored = 0;
  std::size_t relaxations_solved = 0;
  std::size_t heuristic_solves = 0;
  std::size_t numerical_failures = 0;
  std::size_t solver_fallbacks = 0;  // relaxations that needed a second cone solver profile
  std::size_t cycle_pruned = 0;  // children whose fixings orient a pipe cycle
  std::size_t cut_retries = 0;  // relaxations re-solved without the t >= a phi^2 cuts
  std::size_t max_depth = 0;
  std::size_t presolve_fixed = 0;
  double wall_seconds = 0.0;
  // Worst accuracy over all Optimal relaxations.
  double max_primal_residual = 0.0;
  double max_relative_gap = 0.0;
};

/// One pruned subtree of an infeasibility proof: the binaries fixed at the
/// node and a Farkas certificate for its relaxation.
struct InfeasibleNode {
  std::vector<Fixing> fixing;
  InfeasibilityCertificate certificate;
};

/// Proof that the mixed-integer program has no feasible point. When the root
/// relaxation is itself infeasible the proof is that single node.
struct InfeasibilityProof {
  bool at_root = false;
  bool complete = true;  // false if some node could not be solved
  std::vector<InfeasibleNode> nodes;
  double max_residual() const;
};

struct BnbResult {
  bool found = false;
  bool timed_out = false;
  std::vector<Fixing> fixing;  // of the incumbent, all entries 0/1
  PrimalSolution solution;
  BnbStats stats;
  InfeasibilityProof proof;  // meaningful when !found && !timed_out
};

/// Global minimum of the program over the still-free binaries of root.
BnbResult branch_and_bound(const ConicProgram& root, const MisocpOptions& opts = {});

/// Bridge pipes carry a flow forced by the injections; their binaries are
/// fixed accordingly, the rest are returned Free.
std::vector<Fixing> presolve_fixings(const GasNetwork& net, const Injections& q);

enum class SolveStatus { Solved, Infeasible, Inexact, Timeout };

const char* to_string(SolveStatus s);

struct SolveResult {
  SolveStatus status = SolveStatus::Infeasible;
  FlowState state;
  BinaryAssignment x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
  bool inexact_minor = false;  // Inexact with gap in (1e-4, 1e-3]
  bool polished = false;
  bool big_m_warning = false;  // incumbent uses more than 0.1 M of a big-M row
  double residual = 0.0;       // max flow-equation residual of state
  BnbStats stats;
  std::optional<InfeasibilityProof> infeasibility;
  std::string message;
};

SolveResult solve_gf(const GasNetwork& net, const Injections& q, const MisocpOptions& opts = {});

/// max over lossy pipes of (|psi_m - psi_n| - a phi^2) / (a phi^2), >= 0.
/// Pipes with a phi^2 below max(1e-12, 1e-8 psi_r) contribute their absolute
/// slack divided by psi_r.
double inexactness_gap(const GasNetwork& net, const FlowState& state);

/// x = 1 where phi >= 0 (zero flow maps to 1), else 0; one entry per lossy pipe.
BinaryAssignment recover_x(const GasNetwork& net, const FlowState& state);

/// r(psi) = sum over lossy pipes of |psi_m - psi_n|.
double pressure_objective(const GasNetwork& net, const std::vector<double>& psi);

}  // namespace gasflow
