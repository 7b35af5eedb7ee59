#pragma once

namespace gasflow::tol {

// Residual acceptance for any reported flow state.
inline constexpr double kFeasible = 1e-6;
// Injection balance |1'q|.
inline constexpr double kBalance = 1e-9;
// Cycle decomposition reconstruction.
inline constexpr double kDecompose = 1e-9;
// Conic solver: absolute primal feasibility and relative duality gap.
inline constexpr double kConicFeasible = 1e-8;
inline constexpr double kConicGap = 1e-8;
inline constexpr int kConicMaxIter = 200;
// Inexactness gap below which a relaxation result counts as exact.
inline constexpr double kExact = 1e-4;
inline constexpr double kExactMinor = 1e-3;
// Floor under a*phi^2 in the gap denominator.
inline constexpr double kGapDenominator = 1e-12;
// Agreement between two solution routes, in squared pressure.
inline constexpr double kAgree = 1e-5;
// Oracle residual bound.
inline constexpr double kOracle = 1e-8;
// Default big-M constant.
inline constexpr double kDefaultBigM = 1e4;

}  // namespace gasflow::tol
