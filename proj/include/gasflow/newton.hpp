#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gasflow/network.hpp"

namespace gasflow {

struct NrOptions {
  int max_iter = 100;
  int max_halvings = 30;
  double damping = 1.0;    // initial step length of each Newton step
  double tol = 1e-10;      // on the node-balance residual, relative to max(1, |q|_inf)
  double delta = -1.0;     // smoothing band in squared pressure; <= 0 means 1e-6 psi_r
};

enum class NrStatus { Converged, MaxIter, SingularJacobian, DirectionViolated, NegativePressure };

const char* to_string(NrStatus s);

struct NrResult {
  NrStatus status = NrStatus::MaxIter;
  FlowState state;
  int iterations = 0;
  double residual = 0.0;  // final |F|_inf of the reduced system
  bool converged() const { return status == NrStatus::Converged; }
};

/// Pipe flow implied by a squared-pressure difference: sign(d) sqrt(|d| / a),
/// linear d / sqrt(a delta) inside |d| < delta.
double flow_from_pressures(double a, double psi_m, double psi_n, double delta);
double flow_from_pressures_derivative(double a, double psi_m, double psi_n, double delta);

/// Nodal formulation with compressors contracted. Nodes joined by ideal
/// compressors share one pressure unknown (psi_n = alpha psi_m along the
/// compressor), and every compressor flow is an extra unknown. The group of
/// the reference node is fixed. Unknowns and node-balance rows (all nodes but
/// the reference) are both N - 1 in number.
class NrSystem {
 public:
  NrSystem(const GasNetwork& net, const Injections& q, double delta);

  Eigen::Index size() const { return Eigen::Index(num_groups_ + compressors_.size()); }
  Eigen::VectorXd initial(const std::vector<double>& psi_init) const;
  std::vector<double> pressures(const Eigen::VectorXd& x) const;
  FlowState state(const Eigen::VectorXd& x) const;
  Eigen::VectorXd residual(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;
  double delta() const { return delta_; }

 private:
  const GasNetwork& net_;
  const Injections& q_;
  double delta_;
  std::vector<long> group_;     // per node: unknown index, or -1 for the reference group
  std::vector<double> factor_;  // psi_n = factor_n * (group unknown, or psi_r)
  std::vector<long> row_;       // per node: balance row, or -1 at the reference
  std::vector<EdgeId> compressors_;
  std::size_t num_groups_ = 0;
};

/// Damped Newton from psi_init (> 0 entrywise). A step is halved, up to
/// max_halvings times, until the residual norm decreases.
NrResult nr_solve(const GasNetwork& net, const Injections& q, const std::vector<double>& psi_init,
                  const NrOptions& opts = {});

}  // namespace gasflow
