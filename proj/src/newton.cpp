#include "gasflow/newton.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "gasflow/tolerances.hpp"

namespace gasflow {

const char* to_string(NrStatus s) {
  switch (s) {
    case NrStatus::Converged: return "converged";
    case NrStatus::MaxIter: return "max_iter";
    case NrStatus::SingularJacobian: return "singular_jacobian";
    case NrStatus::DirectionViolated: return "direction_violated";
    case NrStatus::NegativePressure: return "negative_pressure";
  }
  return "?";
}

double flow_from_pressures(double a, double psi_m, double psi_n, double delta) {
  const double d = psi_m - psi_n;
  if (std::abs(d) < delta) return d / std::sqrt(a * delta);
  return std::copysign(std::sqrt(std::abs(d) / a), d);
}

double flow_from_pressures_derivative(double a, double psi_m, double psi_n, double delta) {
  const double d = std::abs(psi_m - psi_n);
  if (d < delta) return 1.0 / std::sqrt(a * delta);
  return 0.5 / std::sqrt(a * d);
}

NrSystem::NrSystem(const GasNetwork& net, const Injections& q, double delta)
    : net_(net), q_(q), delta_(delta) {
  const std::size_t n = net.num_nodes();
  if (q.q.size() != n) throw GasFlowError(ErrorCode::DimensionMismatch, "nr: injection size");
  for (const Edge& e : net.edges())
    if (e.kind == EdgeKind::NonIdealCompressor)
      throw GasFlowError(ErrorCode::InvalidNetwork, "nr: split non-ideal compressors first");

  const NodeId ref = net.reference_node();
  auto adj = net.incidence_lists();
  std::vector<long> comp(n, -1);
  factor_.assign(n, 1.0);
  std::vector<std::vector<NodeId>> members;
  for (NodeId s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    const long id = long(members.size());
    members.emplace_back();
    std::size_t edges_in_group = 0;
    std::queue<NodeId> todo;
    comp[s] = id;
    todo.push(s);
    while (!todo.empty()) {
      NodeId u = todo.front();
      todo.pop();
      members.back().push_back(u);
      for (EdgeId e : adj[u]) {
        const Edge& ed = net.edge(e);
        if (!ed.is_compressor()) continue;
        NodeId v = ed.other(u);
        if (ed.from == u) ++edges_in_group;
        if (comp[v] >= 0) continue;
        comp[v] = id;
        factor_[v] = ed.from == u ? factor_[u] * ed.ratio : factor_[u] / ed.ratio;
        todo.push(v);
      }
    }
    // Self-loops are rejected by validation, so this counts each edge once.
    if (edges_in_group + 1 != members.back().size())
      throw GasFlowError(ErrorCode::InvalidNetwork, "nr: compressors form a cycle");
  }

  group_.assign(n, -1);
  const long ref_comp = comp[ref];
  const double ref_factor = factor_[ref];
  for (NodeId v = 0; v < n; ++v)
    if (comp[v] == ref_comp) factor_[v] /= ref_factor;
  std::vector<long> unknown(members.size(), -1);
  for (std::size_t c = 0; c < members.size(); ++c)
    if (long(c) != ref_comp) unknown[c] = long(num_groups_++);
  for (NodeId v = 0; v < n; ++v) group_[v] = unknown[std::size_t(comp[v])];

  row_.assign(n, -1);
  long r = 0;
  for (NodeId v = 0; v < n; ++v)
    if (v != ref) row_[v] = r++;
  compressors_ = net.compressors();
}

Eigen::VectorXd NrSystem::initial(const std::vector<double>& psi_init) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(size());
  std::vector<char> set(num_groups_, 0);
  for (NodeId v = 0; v < net_.num_nodes(); ++v) {
    const long g = group_[v];
    if (g < 0 || set[std::size_t(g)]) continue;
    x(g) = psi_init[v] / factor_[v];
    set[std::size_t(g)] = 1;
  }
  return x;
}

std::vector<double> NrSystem::pressures(const Eigen::VectorXd& x) const {
  std::vector<double> psi(net_.num_nodes());
  for (NodeId v = 0; v < psi.size(); ++v)
    psi[v] = factor_[v] * (group_[v] < 0 ? net_.reference_psi() : x(group_[v]));
  return psi;
}

FlowState NrSystem::state(const Eigen::VectorXd& x) const {
  FlowState s;
  s.psi = pressures(x);
  s.phi.assign(net_.num_edges(), 0.0);
  for (EdgeId e = 0; e < net_.num_edges(); ++e) {
    const Edge& ed = net_.edge(e);
    if (ed.is_pipe()) s.phi[e] = flow_from_pressures(ed.friction, s.psi[ed.from], s.psi[ed.to], delta_);
  }
  for (std::size_t c = 0; c < compressors_.size(); ++c)
    s.phi[compressors_[c]] = x(Eigen::Index(num_groups_ + c));
  return s;
}

Eigen::VectorXd NrSystem::residual(const Eigen::VectorXd& x) const {
  const FlowState s = state(x);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(size());
  for (NodeId v = 0; v < net_.num_nodes(); ++v)
    if (row_[v] >= 0) f(row_[v]) = -q_.q[v];
  for (EdgeId e = 0; e < net_.num_edges(); ++e) {
    const Edge& ed = net_.edge(e);
    if (row_[ed.from] >= 0) f(row_[ed.from]) += s.phi[e];
    if (row_[ed.to] >= 0) f(row_[ed.to]) -= s.phi[e];
  }
  return f;
}

Eigen::MatrixXd NrSystem::jacobian(const Eigen::VectorXd& x) const {
  const std::vector<double> psi = pressures(x);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(size(), size());
  for (EdgeId e = 0; e < net_.num_edges(); ++e) {
    const Edge& ed = net_.edge(e);
    if (!ed.is_pipe()) continue;
    const double g = flow_from_pressures_derivative(ed.friction, psi[ed.from], psi[ed.to], delta_);
    // d phi / d x for each endpoint's group unknown.
    for (int side = 0; side < 2; ++side) {
      const NodeId v = side == 0 ? ed.from : ed.to;
      const long col = group_[v];
      if (col < 0) continue;
      const double dphi = (side == 0 ? g : -g) * factor_[v];
      if (row_[ed.from] >= 0) J(row_[ed.from], col) += dphi;
      if (row_[ed.to] >= 0) J(row_[ed.to], col) -= dphi;
    }
  }
  for (std::size_t c = 0; c < compressors_.size(); ++c) {
    const Edge& ed = net_.edge(compressors_[c]);
    const Eigen::Index col = Eigen::Index(num_groups_ + c);
    if (row_[ed.from] >= 0) J(row_[ed.from], col) += 1.0;
    if (row_[ed.to] >= 0) J(row_[ed.to], col) -= 1.0;
  }
  return J;
}

namespace {

struct NewtonRun {
  NrStatus status = NrStatus::MaxIter;
  int iterations = 0;
  double residual = 0.0;
};

NewtonRun newton(const NrSystem& sys, Eigen::VectorXd& x, const NrOptions& opts, double tol) {
  NewtonRun run;
  Eigen::VectorXd f = sys.residual(x);
  double norm = f.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < opts.max_iter; ++it) {
    run.iterations = it;
    run.residual = norm;
    if (norm <= tol) {
      run.status = NrStatus::Converged;
      return run;
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys.jacobian(x));
    if (!(lu.rcond() > 1e-14)) {
      run.status = NrStatus::SingularJacobian;
      return run;
    }
    const Eigen::VectorXd dx = lu.solve(-f);
    double step = opts.damping;
    Eigen::VectorXd trial = x + step * dx;
    Eigen::VectorXd ft = sys.residual(trial);
    for (int h = 0; h < opts.max_halvings && !(ft.lpNorm<Eigen::Infinity>() < norm); ++h) {
      step *= 0.5;
      trial = x + step * dx;
      ft = sys.residual(trial);
    }
    x = std::move(trial);
    f = std::move(ft);
    norm = f.lpNorm<Eigen::Infinity>();
  }
  run.iterations = opts.max_iter;
  run.residual = norm;
  if (norm <= tol) run.status = NrStatus::Converged;
  return run;
}

bool in_band(const GasNetwork& net, const FlowState& s, double delta) {
  for (EdgeId e = 0; e < net.num_edges(); ++e) {
    const Edge& ed = net.edge(e);
    if (ed.is_pipe() && std::abs(s.psi[ed.from] - s.psi[ed.to]) < delta) return true;
  }
  return false;
}

}  // namespace

NrResult nr_solve(const GasNetwork& net, const Injections& q, const std::vector<double>& psi_init,
                  const NrOptions& opts) {
  if (psi_init.size() != net.num_nodes())
    throw GasFlowError(ErrorCode::DimensionMismatch, "nr_solve: psi_init size");
  for (double v : psi_init)
    if (!(v > 0.0)) throw GasFlowError(ErrorCode::InvalidArgument, "nr_solve: psi_init must be positive");

  const double delta = opts.delta > 0.0 ? opts.delta : 1e-6 * net.reference_psi();
  double qscale = 1.0;
  for (double v : q.q) qscale = std::max(qscale, std::abs(v));
  const double tol = opts.tol * qscale;

  NrSystem sys(net, q, delta);
  Eigen::VectorXd x = sys.initial(psi_init);
  NewtonRun run = newton(sys, x, opts, tol);

  NrResult out;
  out.iterations = run.iterations;
  out.residual = run.residual;
  out.status = run.status;
  if (run.status == NrStatus::Converged) {
    // Pipes left inside the smoothing band carry a linearized flow. Narrow
    // the band a hundredfold at a time while that is so; near zero drop the
    // square root amplifies rounding in psi, so the narrowest band that
    // still converges is kept.
    out.state = sys.state(x);
    double d = delta;
    for (int round = 0; round < 3 && in_band(net, out.state, d); ++round) {
      d *= 1e-2;
      NrSystem fine(net, q, d);
      Eigen::VectorXd xf = x;
      const NewtonRun r2 = newton(fine, xf, opts, tol);
      if (r2.status != NrStatus::Converged) break;
      x = xf;
      out.iterations += r2.iterations;
      out.residual = r2.residual;
      out.state = fine.state(x);
    }
    if (residuals(net, q, out.state).max_weymouth() > tol::kFeasible) {
      out.status = NrStatus::MaxIter;
      return out;
    }
  } else {
    out.state = sys.state(x);
    return out;
  }

  for (EdgeId e : net.compressors())
    if (out.state.phi[e] < -tol::kFeasible) {
      out.status = NrStatus::DirectionViolated;
      return out;
    }
  for (double v : out.state.psi)
    if (v < 0.0) {
      out.status = NrStatus::NegativePressure;
      return out;
    }
  return out;
}

}  // namespace gasflow
