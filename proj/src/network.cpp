#include "gasflow/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

namespace gasflow {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parse: return "syntax error";
    case ErrorCode::Schema: return "schema violation";
    case ErrorCode::DuplicateId: return "duplicate id";
    case ErrorCode::DanglingEndpoint: return "dangling endpoint";
    case ErrorCode::InvalidNetwork: return "invalid network";
    case ErrorCode::Unbalanced: return "unbalanced injections";
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::Disconnected: return "disconnected";
    case ErrorCode::NotATree: return "not a tree";
    case ErrorCode::InfeasiblePressure: return "infeasible pressure";
    case ErrorCode::InfeasibleCompressorDirection: return "infeasible compressor direction";
    case ErrorCode::NotInNullSpace: return "not in null space";
    case ErrorCode::NoCycle: return "no cycle";
    case ErrorCode::MultiCycle: return "multiple cycles";
    case ErrorCode::CompressorOnCycle: return "compressor on cycle";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::InvalidArgument: return "invalid argument";
  }
  return "unknown";
}

const char* to_string(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::Pipe: return "pipe";
    case EdgeKind::Compressor: return "compressor";
    case EdgeKind::NonIdealCompressor: return "noideal_compressor";
  }
  return "unknown";
}

const char* to_string(Violation v) {
  switch (v) {
    case Violation::Disconnected: return "disconnected";
    case Violation::NonpositiveFriction: return "nonpositive friction";
    case Violation::NonpositiveRatio: return "nonpositive ratio";
    case Violation::MissingReference: return "missing reference";
    case Violation::NonpositiveReferencePressure: return "nonpositive reference pressure";
    case Violation::SelfLoop: return "self-loop";
    case Violation::UnsplitCompressor: return "unsplit non-ideal compressor";
    case Violation::Empty: return "empty network";
  }
  return "unknown";
}

NodeId GasNetwork::add_node(std::string name) {
  NodeId id = node_names_.size();
  node_index_.emplace(name, id);
  node_names_.push_back(std::move(name));
  return id;
}

EdgeId GasNetwork::push_edge(Edge edge) {
  EdgeId id = edges_.size();
  edge_index_.emplace(edge.name, id);
  edges_.push_back(std::move(edge));
  return id;
}

EdgeId GasNetwork::add_pipe(std::string name, NodeId from, NodeId to, double a) {
  return push_edge(Edge{std::move(name), from, to, EdgeKind::Pipe, a, 1.0});
}

EdgeId GasNetwork::add_compressor(std::string name, NodeId from, NodeId to, double alpha) {
  return push_edge(Edge{std::move(name), from, to, EdgeKind::Compressor, 0.0, alpha});
}

EdgeId GasNetwork::add_nonideal_compressor(std::string name, NodeId from, NodeId to, double a,
                                           double alpha) {
  return push_edge(Edge{std::move(name), from, to, EdgeKind::NonIdealCompressor, a, alpha});
}

void GasNetwork::set_reference(NodeId node, double psi) {
  reference_ = node;
  reference_psi_ = psi;
}

NodeId GasNetwork::reference_node() const {
  if (!reference_) throw GasFlowError(ErrorCode::InvalidNetwork, "network has no reference node");
  return *reference_;
}

std::optional<NodeId> GasNetwork::find_node(std::string_view name) const {
  auto it = node_index_.find(std::string(name));
  if (it == node_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<EdgeId> GasNetwork::find_edge(std::string_view name) const {
  auto it = edge_index_.find(std::string(name));
  if (it == edge_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<EdgeId> GasNetwork::lossy_pipes() const {
  std::vector<EdgeId> out;
  for (EdgeId e = 0; e < edges_.size(); ++e)
    if (edges_[e].is_pipe()) out.push_back(e);
  return out;
}

std::vector<EdgeId> GasNetwork::compressors() const {
  std::vector<EdgeId> out;
  for (EdgeId e = 0; e < edges_.size(); ++e)
    if (edges_[e].is_compressor()) out.push_back(e);
  return out;
}

std::vector<std::vector<EdgeId>> GasNetwork::incidence_lists() const {
  std::vector<std::vector<EdgeId>> adj(num_nodes());
  for (EdgeId e = 0; e < edges_.size(); ++e) {
    const Edge& ed = edges_[e];
    if (ed.from < adj.size()) adj[ed.from].push_back(e);
    if (ed.to < adj.size() && ed.to != ed.from) adj[ed.to].push_back(e);
  }
  return adj;
}

double Injections::imbalance() const {
  // Compensated sum.
  double sum = 0.0, carry = 0.0;
  for (double v : q) {
    double y = v - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return sum;
}

bool Injections::balanced(double eps) const { return std::abs(imbalance()) <= eps; }

bool ValidationReport::has(Violation v) const {
  return std::any_of(findings.begin(), findings.end(),
                     [v](const Finding& f) { return f.kind == v; });
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < findings.size(); ++i) {
    if (i) os << "; ";
    os << findings[i].message;
  }
  return os.str();
}

bool is_connected(const GasNetwork& net) {
  const std::size_t n = net.num_nodes();
  if (n == 0) return false;
  auto adj = net.incidence_lists();
  std::vector<char> seen(n, 0);
  std::queue<NodeId> todo;
  todo.push(0);
  seen[0] = 1;
  std::size_t count = 1;
  while (!todo.empty()) {
    NodeId u = todo.front();
    todo.pop();
    for (EdgeId e : adj[u]) {
      NodeId v = net.edge(e).other(u);
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        todo.push(v);
      }
    }
  }
  return count == n;
}

ValidationReport validate(const GasNetwork& net) {
  ValidationReport report;
  auto add = [&](Violation v, std::string msg) { report.findings.push_back({v, std::move(msg)}); };

  if (net.num_nodes() == 0) {
    add(Violation::Empty, "empty network: no nodes");
    return report;
  }
  for (const Edge& e : net.edges()) {
    if (e.from == e.to) add(Violation::SelfLoop, "self-loop on edge '" + e.name + "'");
    if ((e.kind == EdgeKind::Pipe || e.kind == EdgeKind::NonIdealCompressor) &&
        !(e.friction > 0.0))
      add(Violation::NonpositiveFriction, "nonpositive friction on edge '" + e.name + "'");
    if ((e.kind == EdgeKind::Compressor || e.kind == EdgeKind::NonIdealCompressor) &&
        !(e.ratio > 0.0))
      add(Violation::NonpositiveRatio, "nonpositive ratio on edge '" + e.name + "'");
    if (e.kind == EdgeKind::NonIdealCompressor)
      add(Violation::UnsplitCompressor, "unsplit non-ideal compressor '" + e.name + "'");
  }
  if (!net.reference() || *net.reference() >= net.num_nodes()) {
    add(Violation::MissingReference, "missing reference node");
  } else if (!(net.reference_psi() > 0.0)) {
    add(Violation::NonpositiveReferencePressure, "nonpositive reference pressure");
  }
  if (!is_connected(net)) add(Violation::Disconnected, "disconnected graph");
  return report;
}

Eigen::MatrixXi incidence_matrix(const GasNetwork& net) {
  Eigen::MatrixXi A = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(net.num_edges()),
                                            static_cast<Eigen::Index>(net.num_nodes()));
  for (EdgeId e = 0; e < net.num_edges(); ++e) {
    const Edge& ed = net.edge(e);
    A(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(ed.from)) += 1;
    A(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(ed.to)) -= 1;
  }
  return A;
}

SplitResult split_nonideal_compressor(const GasNetwork& net, EdgeId edge, double a,
                                      double alpha) {
  const Edge& target = net.edge(edge);
  if (target.kind == EdgeKind::Compressor) return {net, false};
  if (target.kind != EdgeKind::NonIdealCompressor)
    throw GasFlowError(ErrorCode::InvalidNetwork,
                       "edge '" + target.name + "' is not a compressor");

  GasNetwork out;
  for (NodeId n = 0; n < net.num_nodes(); ++n) out.add_node(net.node_name(n));
  std::string mid_name = target.name + "'";
  while (net.find_node(mid_name)) mid_name += "'";
  NodeId mid = out.add_node(mid_name);

  for (EdgeId e = 0; e < net.num_edges(); ++e) {
    const Edge& ed = net.edge(e);
    if (e == edge) {
      out.add_compressor(ed.name + "/compressor", ed.from, mid, alpha);
      out.add_pipe(ed.name + "/pipe", mid, ed.to, a);
      continue;
    }
    switch (ed.kind) {
      case EdgeKind::Pipe: out.add_pipe(ed.name, ed.from, ed.to, ed.friction); break;
      case EdgeKind::Compressor: out.add_compressor(ed.name, ed.from, ed.to, ed.ratio); break;
      case EdgeKind::NonIdealCompressor:
        out.add_nonideal_compressor(ed.name, ed.from, ed.to, ed.friction, ed.ratio);
        break;
    }
  }
  if (net.reference()) out.set_reference(*net.reference(), net.reference_psi());
  return {std::move(out), true};
}

GasNetwork normalize_compressors(const GasNetwork& net) {
  GasNetwork current = net;
  for (;;) {
    std::optional<EdgeId> pending;
    for (EdgeId e = 0; e < current.num_edges(); ++e) {
      if (current.edge(e).kind == EdgeKind::NonIdealCompressor) {
        pending = e;
        break;
      }
    }
    if (!pending) return current;
    const Edge& ed = current.edge(*pending);
    current = split_nonideal_compressor(current, *pending, ed.friction, ed.ratio).network;
  }
}

double ResidualReport::max_weymouth() const {
  return weymouth.empty() ? 0.0 : *std::max_element(weymouth.begin(), weymouth.end());
}

double ResidualReport::max_compressor() const {
  double m = 0.0;
  for (double v : compressor_ratio) m = std::max(m, v);
  for (double v : compressor_direction) m = std::max(m, v);
  return m;
}

double ResidualReport::max() const {
  return std::max({mass, max_weymouth(), max_compressor(), reference, negative_pressure});
}

ResidualReport residuals(const GasNetwork& net, const Injections& q, const FlowState& state) {
  const std::size_t n_nodes = net.num_nodes();
  const std::size_t n_edges = net.num_edges();
  if (q.q.size() != n_nodes || state.psi.size() != n_nodes || state.phi.size() != n_edges)
    throw GasFlowError(ErrorCode::DimensionMismatch, "residuals: dimension mismatch");

  ResidualReport r;
  std::vector<double> balance(q.q.begin(), q.q.end());
  for (double& b : balance) b = -b;
  r.weymouth.assign(n_edges, 0.0);
  r.compressor_ratio.assign(n_edges, 0.0);
  r.compressor_direction.assign(n_edges, 0.0);

  for (EdgeId e = 0; e < n_edges; ++e) {
    const Edge& ed = net.edge(e);
    const double phi = state.phi[e];
    balance[ed.from] += phi;
    balance[ed.to] -= phi;
    const double pm = state.psi[ed.from];
    const double pn = state.psi[ed.to];
    if (ed.is_pipe()) {
      r.weymouth[e] = std::abs(pm - pn - pipe_pressure_drop(ed.friction, phi));
    } else {
      r.compressor_ratio[e] = std::abs(pn - ed.ratio * pm);
      r.compressor_direction[e] = std::max(0.0, -phi);
    }
  }
  for (double b : balance) r.mass = std::max(r.mass, std::abs(b));
  if (net.reference()) r.reference = std::abs(state.psi[*net.reference()] - net.reference_psi());
  for (double p : state.psi) r.negative_pressure = std::max(r.negative_pressure, -p);
  return r;
}

}  // namespace gasflow
