#include "gasflow/misocp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "gasflow/graph.hpp"
#include "gasflow/log.hpp"

namespace gasflow {

namespace {

using Clock = std::chrono::steady_clock;

// A relaxation point whose direction rows hold within this after rounding
// every binary is accepted as integral.
constexpr double kRoundTol = 1e-7;
// Nodes explored with rounding dives before an incumbent exists.
constexpr std::size_t kDiveNodes = 25;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Node {
  std::vector<Fixing> fixing;
  double bound = 0.0;
  std::size_t depth = 0;
  std::size_t id = 0;
};

// Heap order: lowest bound on top, then deeper, then older.
struct WorseNode {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.id > b.id;
  }
};

// Worst row violation of pipe k's direction-dependent rows at v with its
// binary set to b.
double rounding_violation(const ConicProgram& prog, const std::vector<double>& v,
                          std::size_t k, int b) {
  const double phi = v[prog.phi(prog.lossy[k])];
  const double d = v[prog.psi(prog.from[k])] - v[prog.psi(prog.to[k])];
  const double w = prog.friction[k] * phi * phi;
  const double M = prog.big_m;
  if (b == 1) return std::max({-phi, phi - M, w - d, w + d - M});
  return std::max({phi, -phi - M, w + d, w - d - M});
}

// True if the fixed binaries orient a cycle of pipes head to tail. Such a
// node only holds points with zero flow and equal pressure around the cycle;
// each of them also lies in a leaf oriented along the pressure order, so the
// node can be dropped. Its relaxation has no interior point either.
bool directed_cycle(const ConicProgram& prog, const std::vector<Fixing>& fixing) {
  const std::size_t n = prog.num_nodes;
  std::vector<std::vector<NodeId>> out(n);
  std::vector<std::size_t> indeg(n, 0);
  for (std::size_t k = 0; k < fixing.size(); ++k) {
    if (fixing[k] == Fixing::Free) continue;
    NodeId u = prog.from[k], v = prog.to[k];
    if (fixing[k] == Fixing::Zero) std::swap(u, v);
    out[u].push_back(v);
    ++indeg[v];
  }
  std::vector<NodeId> ready;
  for (NodeId v = 0; v < n; ++v)
    if (indeg[v] == 0) ready.push_back(v);
  std::size_t done = 0;
  while (!ready.empty()) {
    NodeId u = ready.back();
    ready.pop_back();
    ++done;
    for (NodeId v : out[u])
      if (--indeg[v] == 0) ready.push_back(v);
  }
  return done < n;
}

// Newton on the flow equations in (phi, psi) from the given point.
bool newton_polish(const GasNetwork& net, const Injections& q, FlowState& s) {
  const std::size_t n = net.num_nodes(), p = net.num_edges();
  const Eigen::Index dim = Eigen::Index(n + p);
  const NodeId ref = net.reference_node();
  double scale = std::max(1.0, net.reference_psi());
  for (double v : q.q) scale = std::max(scale, std::abs(v));
  const double target = 1e-10 * scale;

  Eigen::VectorXd z(dim), F(dim);
  for (std::size_t e = 0; e < p; ++e) z(Eigen::Index(e)) = s.phi[e];
  for (std::size_t v = 0; v < n; ++v) z(Eigen::Index(p + v)) = s.psi[v];
  Eigen::MatrixXd J(dim, dim);
  auto eval = [&](const Eigen::VectorXd& u) {
    F.setZero();
    J.setZero();
    Eigen::Index row = 0;
    for (NodeId v = 0; v < n; ++v) {
      if (v == ref) {
        F(row) = u(Eigen::Index(p + v)) - net.reference_psi();
        J(row, Eigen::Index(p + v)) = 1.0;
      } else {
        F(row) = -q.q[v];
      }
      ++row;
    }
    for (EdgeId e = 0; e < p; ++e) {
      const Edge& ed = net.edge(e);
      const Eigen::Index ce = Eigen::Index(e), cm = Eigen::Index(p + ed.from),
                         cn = Eigen::Index(p + ed.to);
      const double phi = u(ce);
      if (ed.from != ref) F(Eigen::Index(ed.from)) += phi, J(Eigen::Index(ed.from), ce) += 1.0;
      if (ed.to != ref) F(Eigen::Index(ed.to)) -= phi, J(Eigen::Index(ed.to), ce) -= 1.0;
      const Eigen::Index r = Eigen::Index(n + e);
      if (ed.is_pipe()) {
        F(r) = u(cm) - u(cn) - ed.friction * phi * std::abs(phi);
        J(r, cm) = 1.0;
        J(r, cn) = -1.0;
        J(r, ce) = -2.0 * ed.friction * std::abs(phi);
      } else {
        F(r) = u(cn) - ed.ratio * u(cm);
        J(r, cn) = 1.0;
        J(r, cm) = -ed.ratio;
      }
    }
    return F.lpNorm<Eigen::Infinity>();
  };

  // Past the target, keep going while Newton still contracts: small pipe
  // drops need the residual well below it for their slack to be accurate.
  double res = eval(z);
  for (int it = 0; it < 30 && res > 0.0; ++it) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (lu.rank() < dim) break;
    const Eigen::VectorXd prev = z;
    z -= lu.solve(F);
    const double r = eval(z);
    if (!std::isfinite(r) || (res <= target && !(r < 0.5 * res))) {
      z = prev;
      eval(z);
      break;
    }
    res = r;
  }
  if (res > target) return false;
  for (std::size_t e = 0; e < p; ++e) s.phi[e] = z(Eigen::Index(e));
  for (std::size_t v = 0; v < n; ++v) s.psi[v] = z(Eigen::Index(p + v));
  return true;
}

}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Solved: return "solved";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Inexact: return "inexact";
    case SolveStatus::Timeout: return "timeout";
  }
  return "unknown";
}

double InfeasibilityProof::max_residual() const {
  double r = 0.0;
  for (const InfeasibleNode& n : nodes) r = std::max(r, n.certificate.residual);
  return r;
}

BnbResult branch_and_bound(const ConicProgram& root, const MisocpOptions& opts) {
  const auto t0 = Clock::now();
  BnbResult res;
  BnbStats& stats = res.stats;
  ConicProgram prog = root;
  const std::size_t L = prog.lossy.size();

  std::vector<Fixing> base(L, Fixing::Free);
  for (std::size_t k = 0; k < L; ++k) {
    const std::size_t xv = prog.x(k);
    if (prog.lower[xv] == prog.upper[xv]) base[k] = prog.lower[xv] > 0.5 ? Fixing::One : Fixing::Zero;
  }

  double ub = std::numeric_limits<double>::infinity();
  auto prunable = [&](double bound) { return bound >= ub - 1e-8 * std::max(1.0, std::abs(ub)); };

  const bool has_cuts = std::any_of(prog.quadratic.begin(), prog.quadratic.end(),
                                    [](const QuadraticRow& r) { return r.implied_by_fixed >= 0; });
  auto relax = [&](const std::vector<Fixing>& fixing) {
    for (std::size_t k = 0; k < L; ++k) set_fixing(prog, k, fixing[k]);
    PrimalSolution sol = solve_conic(prog, opts.cone);
    ++stats.relaxations_solved;
    if (sol.attempts > 1) ++stats.solver_fallbacks;
    if (sol.status == PrimalSolution::Status::MaxIter && has_cuts) {
      // The cuts make the optimal face degenerate where a pipe sits on its
      // curve; the plain relaxation is a weaker but still valid bound.
      ConicProgram plain = prog;
      std::erase_if(plain.quadratic, [](const QuadraticRow& r) { return r.implied_by_fixed >= 0; });
      PrimalSolution retry = solve_conic(plain, opts.cone);
      ++stats.relaxations_solved;
      ++stats.cut_retries;
      if (retry.status != PrimalSolution::Status::MaxIter) sol = std::move(retry);
    }
    if (sol.status == PrimalSolution::Status::Optimal) {
      stats.max_primal_residual = std::max(stats.max_primal_residual, sol.primal_residual);
      stats.max_relative_gap = std::max(stats.max_relative_gap, sol.relative_gap);
    } else if (sol.status == PrimalSolution::Status::MaxIter) {
      ++stats.numerical_failures;
      if (log().should_log(spdlog::level::debug)) {
        std::string f;
        for (Fixing x : fixing) f += x == Fixing::Free ? '.' : x == Fixing::One ? '1' : '0';
        log().debug("relaxation not solved ({}): {}", f, sol.message);
      }
    }
    return sol;
  };
  auto offer = [&](const std::vector<Fixing>& fixing, const PrimalSolution& sol) {
    if (sol.objective < ub) {
      ub = sol.objective;
      res.found = true;
      res.fixing = fixing;
      res.solution = sol;
      log().debug("incumbent {:.12g} after {} nodes", ub, stats.nodes_explored);
    }
  };
  // Cheapest 0/1 completion of a relaxation point and its worst violation.
  auto round = [&](const std::vector<Fixing>& fixing, const std::vector<double>& v,
                   double& worst) {
    std::vector<Fixing> out = fixing;
    worst = 0.0;
    for (std::size_t k = 0; k < L; ++k) {
      if (fixing[k] != Fixing::Free) continue;
      const double v1 = rounding_violation(prog, v, k, 1), v0 = rounding_violation(prog, v, k, 0);
      out[k] = v1 <= v0 ? Fixing::One : Fixing::Zero;
      worst = std::max(worst, std::min(v1, v0));
    }
    return out;
  };

  std::vector<Node> open;
  std::size_t next_id = 0;
  auto push = [&](Node node) {
    node.id = next_id++;
    open.push_back(std::move(node));
    if (opts.order == NodeOrder::BestFirst) std::push_heap(open.begin(), open.end(), WorseNode{});
  };
  auto pop = [&] {
    if (opts.order == NodeOrder::BestFirst) std::pop_heap(open.begin(), open.end(), WorseNode{});
    Node node = std::move(open.back());
    open.pop_back();
    return node;
  };

  push(Node{base, -std::numeric_limits<double>::infinity(), 0, 0});
  while (!open.empty()) {
    if (seconds_since(t0) > opts.time_limit) {
      res.timed_out = true;
      break;
    }
    Node node = pop();
    if (prunable(node.bound)) continue;
    ++stats.nodes_explored;
    stats.max_depth = std::max(stats.max_depth, node.depth);

    PrimalSolution sol = relax(node.fixing);
    if (sol.status == PrimalSolution::Status::Infeasible) {
      if (node.depth == 0) res.proof.at_root = true;
      res.proof.nodes.push_back({node.fixing, *sol.certificate});
      continue;
    }

    std::vector<std::size_t> candidates;
    std::vector<Fixing> rounded;
    if (sol.status == PrimalSolution::Status::Optimal) {
      if (prunable(sol.objective)) continue;
      double worst = 0.0;
      rounded = round(node.fixing, sol.values, worst);
      if (worst <= kRoundTol) {
        PrimalSolution integral = sol;
        for (std::size_t k = 0; k < L; ++k)
          integral.values[prog.x(k)] = rounded[k] == Fixing::One ? 1.0 : 0.0;
        offer(rounded, integral);
        continue;
      }
      for (std::size_t k = 0; k < L; ++k)
        if (node.fixing[k] == Fixing::Free &&
            std::min(rounding_violation(prog, sol.values, k, 0),
                     rounding_violation(prog, sol.values, k, 1)) > kRoundTol)
          candidates.push_back(k);
      if (opts.heuristic && !res.found && stats.nodes_explored <= kDiveNodes &&
          !directed_cycle(prog, rounded)) {
        ++stats.heuristic_solves;
        PrimalSolution dive = relax(rounded);
        if (dive.status == PrimalSolution::Status::Optimal) offer(rounded, dive);
        if (prunable(sol.objective)) continue;
      }
    } else {
      // Unreliable point: split on any free binary.
      for (std::size_t k = 0; k < L; ++k)
        if (node.fixing[k] == Fixing::Free) candidates.push_back(k);
      if (candidates.empty()) {
        res.proof.complete = false;
        continue;
      }
      candidates.resize(1);
      rounded = node.fixing;
      rounded[candidates[0]] = Fixing::One;
      sol.objective = node.bound;
    }

    std::size_t pick = candidates.front();
    if (opts.branching == BranchRule::MostFractional && sol.status == PrimalSolution::Status::Optimal) {
      double best = -1.0;
      for (std::size_t k : candidates) {
        const double xv = sol.values[prog.x(k)];
        const double frac = std::min(xv, 1.0 - xv);
        if (frac > best + 1e-12) best = frac, pick = k;
      }
    }
    const Fixing first = rounded[pick];
    const Fixing second = first == Fixing::One ? Fixing::Zero : Fixing::One;
    Node a{node.fixing, sol.objective, node.depth + 1, 0}, b = a;
    a.fixing[pick] = first;
    b.fixing[pick] = second;
    const bool keep_a = !directed_cycle(prog, a.fixing), keep_b = !directed_cycle(prog, b.fixing);
    stats.cycle_pruned += std::size_t(!keep_a) + std::size_t(!keep_b);
    if (opts.order == NodeOrder::DepthFirst) {
      if (keep_b) push(std::move(b));  // popped after a
      if (keep_a) push(std::move(a));
    } else {
      if (keep_a) push(std::move(a));
      if (keep_b) push(std::move(b));
    }
  }
  stats.wall_seconds = seconds_since(t0);
  return res;
}

std::vector<Fixing> presolve_fixings(const GasNetwork& net, const Injections& q) {
  const std::size_t n = net.num_nodes(), p = net.num_edges();
  std::vector<Fixing> out;
  const std::vector<bool> bridge = find_bridges(net);
  auto adj = net.incidence_lists();
  double scale = 0.0;
  for (double v : q.q) scale += std::abs(v);
  for (EdgeId e = 0; e < p; ++e) {
    const Edge& ed = net.edge(e);
    if (!ed.is_pipe()) continue;
    if (!bridge[e]) {
      out.push_back(Fixing::Free);
      continue;
    }
    // Everything injected on the tail side must leave through e.
    std::vector<char> seen(n, 0);
    std::vector<NodeId> stack{ed.from};
    seen[ed.from] = 1;
    double flow = 0.0;
    while (!stack.empty()) {
      NodeId u = stack.back();
      stack.pop_back();
      flow += q.q[u];
      for (EdgeId f : adj[u]) {
        if (f == e) continue;
        NodeId v = net.edge(f).other(u);
        if (!seen[v]) seen[v] = 1, stack.push_back(v);
      }
    }
    const bool zero = std::abs(flow) <= 1e-12 * std::max(1.0, scale);
    out.push_back(zero || flow > 0.0 ? Fixing::One : Fixing::Zero);
  }
  return out;
}

double pressure_objective(const GasNetwork& net, const std::vector<double>& psi) {
  double r = 0.0;
  for (const Edge& ed : net.edges())
    if (ed.is_pipe()) r += std::abs(psi[ed.from] - psi[ed.to]);
  return r;
}

double inexactness_gap(const GasNetwork& net, const FlowState& state) {
  if (state.phi.size() != net.num_edges() || state.psi.size() != net.num_nodes())
    throw GasFlowError(ErrorCode::DimensionMismatch, "inexactness_gap: dimension mismatch");
  const double psi_scale = net.reference_psi() > 0.0 ? net.reference_psi() : 1.0;
  const double floor = std::max(tol::kGapDenominator, 1e-8 * psi_scale);
  double g = 0.0;
  for (EdgeId e = 0; e < net.num_edges(); ++e) {
    const Edge& ed = net.edge(e);
    if (!ed.is_pipe()) continue;
    const double w = ed.friction * state.phi[e] * state.phi[e];
    const double slack = std::abs(state.psi[ed.from] - state.psi[ed.to]) - w;
    g = std::max(g, w >= floor ? slack / w : slack / psi_scale);
  }
  return g;
}

BinaryAssignment recover_x(const GasNetwork& net, const FlowState& state) {
  BinaryAssignment out;
  for (EdgeId e = 0; e < net.num_edges(); ++e)
    if (net.edge(e).is_pipe()) out.x.push_back(state.phi.at(e) >= 0.0 ? 1 : 0);
  return out;
}

SolveResult solve_gf(const GasNetwork& net, const Injections& q, const MisocpOptions& opts) {
  const auto t0 = Clock::now();
  if (q.q.size() != net.num_nodes())
    throw GasFlowError(ErrorCode::DimensionMismatch, "solve_gf: injection size");
  double scale = 1.0;
  for (double v : q.q) scale = std::max(scale, std::abs(v));
  if (!q.balanced(tol::kBalance * scale))
    throw GasFlowError(ErrorCode::Unbalanced, "solve_gf: injections do not sum to zero");

  const std::size_t L = net.lossy_pipes().size();
  std::vector<Fixing> fixing =
      opts.presolve ? presolve_fixings(net, q) : std::vector<Fixing>(L, Fixing::Free);
  RelaxationOptions ropts;
  ropts.big_m = opts.big_m;
  ropts.strengthen = opts.strengthen;
  const ConicProgram root = build_relaxation(net, q, fixing, ropts);
  BnbResult bnb = branch_and_bound(root, opts);

  SolveResult out;
  out.stats = bnb.stats;
  out.stats.presolve_fixed =
      std::size_t(std::count_if(fixing.begin(), fixing.end(), [](Fixing f) { return f != Fixing::Free; }));
  auto finish = [&] {
    out.stats.wall_seconds = seconds_since(t0);
    return out;
  };
  if (!bnb.found) {
    if (bnb.timed_out) {
      out.status = SolveStatus::Timeout;
      out.message = "time limit reached without an incumbent";
    } else {
      out.status = SolveStatus::Infeasible;
      out.infeasibility = bnb.proof;
      out.message = bnb.proof.at_root ? "root relaxation infeasible"
                                      : "every direction assignment is infeasible";
      if (!bnb.proof.complete) out.message += " (some nodes failed numerically)";
    }
    return finish();
  }

  const std::vector<double>& v = bnb.solution.values;
  out.state.phi.assign(v.begin(), v.begin() + long(net.num_edges()));
  out.state.psi.assign(v.begin() + long(net.num_edges()),
                       v.begin() + long(net.num_edges() + net.num_nodes()));
  for (Fixing f : bnb.fixing) out.x.x.push_back(f == Fixing::One ? 1 : 0);
  out.objective = bnb.solution.objective;
  out.big_m_warning = bnb.solution.big_m_warning;

  if (opts.polish) {
    FlowState cand = out.state;
    // the relaxed optimum may sit slightly outside its cones; allow r to
    // rise by what that violation can account for
    const double slack = double(L) * residuals(net, q, out.state).max() +
                         1e-7 * std::max(1.0, std::abs(out.objective));
    if (newton_polish(net, q, cand)) {
      const ResidualReport rr = residuals(net, q, cand);
      const bool admissible = rr.max_compressor() <= tol::kFeasible && rr.negative_pressure <= 0.0;
      const double r = pressure_objective(net, cand.psi);
      if (admissible && r <= out.objective + slack) {
        out.state = std::move(cand);
        out.polished = true;
        BinaryAssignment rx = recover_x(net, out.state);
        const auto lossy = net.lossy_pipes();
        for (std::size_t k = 0; k < L; ++k)
          if (std::abs(out.state.phi[lossy[k]]) > tol::kFeasible) out.x.x[k] = rx.x[k];
      }
    }
  }

  out.gap = inexactness_gap(net, out.state);
  out.residual = residuals(net, q, out.state).max();
  if (bnb.timed_out) {
    out.status = SolveStatus::Timeout;
    out.message = "time limit reached; returning incumbent";
  } else if (out.gap <= tol::kExact && out.residual <= tol::kFeasible) {
    out.status = SolveStatus::Solved;
  } else {
    out.status = SolveStatus::Inexact;
    out.inexact_minor = out.gap > tol::kExact && out.gap <= tol::kExactMinor;
    std::ostringstream os;
    os.precision(3);
    os << "relaxation not exact: gap " << out.gap << ", residual " << out.residual;
    out.message = os.str();
  }
  return finish();
}

}  // namespace gasflow
