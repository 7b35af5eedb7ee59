#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace gasflow {

// Dense 0-based indices assigned at construction.
using NodeId = std::size_t;
using EdgeId = std::size_t;

enum class ErrorCode {
  Parse,
  Schema,
  DuplicateId,
  DanglingEndpoint,
  InvalidNetwork,
  Unbalanced,
  DimensionMismatch,
  Disconnected,
  NotATree,
  InfeasiblePressure,
  InfeasibleCompressorDirection,
  NotInNullSpace,
  NoCycle,
  MultiCycle,
  CompressorOnCycle,
  Io,
  InvalidArgument,
};

const char* to_string(ErrorCode code);

class GasFlowError : public std::runtime_error {
 public:
  GasFlowError(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

enum class EdgeKind { Pipe, Compressor, NonIdealCompressor };

const char* to_string(EdgeKind kind);

struct Edge {
  std::string name;
  NodeId from = 0;
  NodeId to = 0;
  EdgeKind kind = EdgeKind::Pipe;
  double friction = 0.0;  // a: pipes and non-ideal compressors
  double ratio = 1.0;     // alpha: compressors

  bool is_pipe() const { return kind == EdgeKind::Pipe; }
  bool is_compressor() const { return kind == EdgeKind::Compressor; }
  NodeId other(NodeId n) const { return n == from ? to : from; }
};

/// Directed gas network: nodes, lossy pipes, ideal compressors and one
/// reference node with a fixed squared pressure.
///
/// The builder methods do not validate; use validate() or parse_network()
/// for a checked instance. Once built, a network is treated as immutable and
/// may be shared read-only by concurrent solves.
class GasNetwork {
 public:
  NodeId add_node(std::string name);
  EdgeId add_pipe(std::string name, NodeId from, NodeId to, double a);
  EdgeId add_compressor(std::string name, NodeId from, NodeId to, double alpha);
  EdgeId add_nonideal_compressor(std::string name, NodeId from, NodeId to, double a,
                                 double alpha);
  void set_reference(NodeId node, double psi);

  std::size_t num_nodes() const { return node_names_.size(); }
  std::size_t num_edges() const { return edges_.size(); }

  const std::string& node_name(NodeId n) const { return node_names_.at(n); }
  const Edge& edge(EdgeId e) const { return edges_.at(e); }
  std::span<const Edge> edges() const { return edges_; }
  std::span<const std::string> node_names() const { return node_names_; }

  std::optional<NodeId> find_node(std::string_view name) const;
  std::optional<EdgeId> find_edge(std::string_view name) const;

  std::optional<NodeId> reference() const { return reference_; }
  NodeId reference_node() const;
  double reference_psi() const { return reference_psi_; }

  std::vector<EdgeId> lossy_pipes() const;
  std::vector<EdgeId> compressors() const;

  // Adjacency: for each node, incident edge ids in increasing order.
  std::vector<std::vector<EdgeId>> incidence_lists() const;

 private:
  EdgeId push_edge(Edge edge);

  std::vector<std::string> node_names_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, NodeId> node_index_;
  std::unordered_map<std::string, EdgeId> edge_index_;
  std::optional<NodeId> reference_;
  double reference_psi_ = 0.0;
};

/// Net nodal injections: positive supply, negative withdrawal.
struct Injections {
  std::vector<double> q;

  double imbalance() const;
  bool balanced(double eps) const;
};

/// Candidate gas-flow solution: edge flows and nodal squared pressures.
struct FlowState {
  std::vector<double> phi;
  std::vector<double> psi;
};

enum class Violation {
  Disconnected,
  NonpositiveFriction,
  NonpositiveRatio,
  MissingReference,
  NonpositiveReferencePressure,
  SelfLoop,
  UnsplitCompressor,
  Empty,
};

const char* to_string(Violation v);

struct Finding {
  Violation kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;

  bool ok() const { return findings.empty(); }
  bool has(Violation v) const;
  std::string summary() const;
};

ValidationReport validate(const GasNetwork& net);

bool is_connected(const GasNetwork& net);

/// Signed P x N edge-node incidence: +1 at the tail, -1 at the head.
Eigen::MatrixXi incidence_matrix(const GasNetwork& net);

struct SplitResult {
  GasNetwork network;
  bool applied = false;
};

/// Replace non-ideal compressor (m, n) by an ideal compressor (m, n') and a
/// lossy pipe (n', n) with a fresh junction n'. An ideal compressor is left
/// unchanged with applied == false.
SplitResult split_nonideal_compressor(const GasNetwork& net, EdgeId edge, double a,
                                      double alpha);

/// Split every non-ideal compressor in the network.
GasNetwork normalize_compressors(const GasNetwork& net);

/// Squared-pressure drop a * sign(phi) * phi^2 across a lossy pipe.
inline double pipe_pressure_drop(double a, double phi) { return a * phi * (phi < 0 ? -phi : phi); }

struct ResidualReport {
  double mass = 0.0;                        // ||A'phi - q||_inf
  std::vector<double> weymouth;             // per edge; 0 for compressors
  std::vector<double> compressor_ratio;     // per edge; 0 for pipes
  std::vector<double> compressor_direction; // max(0, -phi) per compressor
  double reference = 0.0;
  double negative_pressure = 0.0;           // max(0, -min psi)

  double max_weymouth() const;
  double max_compressor() const;
  double max() const;
};

ResidualReport residuals(const GasNetwork& net, const Injections& q, const FlowState& state);

}  // namespace gasflow
