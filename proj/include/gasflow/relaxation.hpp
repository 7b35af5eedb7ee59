#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gasflow/cone_solver.hpp"
#include "gasflow/network.hpp"
#include "gasflow/tolerances.hpp"

namespace gasflow {

/// Sparse affine function sum(coef * v[var]) + constant over program variables.
struct AffineExpr {
  std::vector<std::pair<std::size_t, double>> terms;
  double constant = 0.0;

  AffineExpr& add(std::size_t var, double coef) {
    terms.emplace_back(var, coef);
    return *this;
  }
  double eval(const std::vector<double>& v) const;
};

enum class RowSense { Equal, LessEqual };

/// expr (= | <=) 0
struct LinearRow {
  std::string name;
  AffineExpr expr;
  RowSense sense = RowSense::LessEqual;
};

/// a * v[var]^2 <= rhs, a > 0.
struct QuadraticRow {
  std::string name;
  double a = 0.0;
  std::size_t var = 0;
  AffineExpr rhs;
  // Lossy pipe whose binary makes this row redundant once fixed, or -1.
  long implied_by_fixed = -1;
};

/// Per-lossy-pipe treatment of the direction binary.
enum class Fixing { Zero, One, Free };

/// Continuous relaxation of the big-M direction model.
///
/// Variables are laid out as [phi (per edge) | psi (per node) | t (per lossy
/// pipe) | x (per lossy pipe)]. A fixed binary has lower == upper.
struct ConicProgram {
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<std::string> names;
  std::vector<double> lower, upper;
  std::vector<double> objective;
  std::vector<LinearRow> rows;
  std::vector<QuadraticRow> quadratic;

  std::size_t num_edges = 0, num_nodes = 0;
  std::vector<EdgeId> lossy;             // lossy pipe edge ids, in order
  std::vector<long> lossy_index;         // per edge: position in lossy or -1
  std::vector<double> friction;          // per lossy pipe
  std::vector<NodeId> from, to;          // per lossy pipe
  double big_m = tol::kDefaultBigM;

  std::size_t num_vars() const { return names.size(); }
  std::size_t phi(EdgeId e) const { return e; }
  std::size_t psi(NodeId n) const { return num_edges + n; }
  std::size_t t(std::size_t k) const { return num_edges + num_nodes + k; }
  std::size_t x(std::size_t k) const { return num_edges + num_nodes + lossy.size() + k; }

  /// Largest violation of any row or bound at v.
  double max_violation(const std::vector<double>& v) const;
  /// Plain-text LP-style listing.
  std::string dump() const;
};

struct RelaxationOptions {
  double big_m = tol::kDefaultBigM;
  // Add t >= a phi^2 per lossy pipe. Valid at every integral point (there
  // |psi_m - psi_n| >= a phi^2) and tightens fractional nodes. Left out of
  // the conic form once the pipe's binary is fixed, where it is implied.
  bool strengthen = false;
};

/// fixing has one entry per lossy pipe (ConicProgram::lossy order).
ConicProgram build_relaxation(const GasNetwork& net, const Injections& q,
                              const std::vector<Fixing>& fixing,
                              const RelaxationOptions& opts = {});

/// Fix or free the binary of lossy pipe k in place.
void set_fixing(ConicProgram& prog, std::size_t k, Fixing f);

/// Farkas certificate for the conic form of a program:
/// A'y + G'z = 0, b'y + h'z = -1, z in K.
struct InfeasibilityCertificate {
  Eigen::VectorXd y, z;
  double residual = 0.0;  // |A'y + G'z|_inf
};

struct PrimalSolution {
  enum class Status { Optimal, Infeasible, MaxIter };
  Status status = Status::MaxIter;
  std::vector<double> values;
  double objective = 0.0;
  double feasibility = 0.0;  // ConicProgram::max_violation(values)
  double primal_residual = 0.0;
  double relative_gap = 0.0;
  int iterations = 0;
  int attempts = 1;  // cone solver settings profiles tried
  bool big_m_warning = false;
  std::optional<InfeasibilityCertificate> certificate;
  std::string message;
};

const char* to_string(PrimalSolution::Status s);

/// Conic form with fixed variables substituted out. column[i] is the
/// problem column of program variable i, or -1 when it is fixed.
struct ConeForm {
  conic::ConeProblem problem;
  std::vector<long> column;
};

ConeForm to_cone_form(const ConicProgram& prog);

PrimalSolution solve_conic(const ConicProgram& prog, const conic::ConeSettings& settings = {});

/// Recheck a certificate against the program's conic form.
bool verify_certificate(const ConicProgram& prog, const InfeasibilityCertificate& cert,
                        double tol = 1e-6);

}  // namespace gasflow
