#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace gasflow::conic {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, long>;

/// Cone K = R^linear_+ x SOC(soc[0]) x SOC(soc[1]) x ...; rows of G are
/// stacked in that order.
struct ConeDims {
  Eigen::Index linear = 0;
  std::vector<Eigen::Index> soc;

  Eigen::Index rows() const;
  Eigen::Index degree() const { return linear + static_cast<Eigen::Index>(soc.size()); }
};

/// minimize c'x  subject to  Ax = b,  h - Gx in K.
struct ConeProblem {
  Eigen::VectorXd c;
  SparseMatrix A;
  Eigen::VectorXd b;
  SparseMatrix G;
  Eigen::VectorXd h;
  ConeDims dims;
};

enum class ConeStatus { Optimal, PrimalInfeasible, DualInfeasible, MaxIter, NumericalError };

const char* to_string(ConeStatus s);

struct ConeSettings {
  double feastol = 1e-8;   // absolute primal, relative dual residual
  double reltol = 1e-8;    // relative duality gap, see ConeSolution::relgap
  double infeastol = 1e-8; // certificate residual relative to its objective
  int max_iter = 200;
  double static_reg = 7e-8;
  double dynamic_eps = 1e-13;  // pivot magnitude triggering dynamic regularization
  double dynamic_reg = 7e-8;
  int refine_steps = 10;
  double step_fraction = 0.99;
  int equilibrate_passes = 10;  // Ruiz passes on [A; G]; 0 disables
  bool fallback = true;  // on failure, retry without equilibration / with heavier regularization
  bool verbose = false;  // per-iteration trace on stderr
};

struct ConeSolution {
  ConeStatus status = ConeStatus::MaxIter;
  Eigen::VectorXd x, y, z, s;
  double pcost = 0.0;
  double dcost = 0.0;
  double gap = 0.0;     // complementarity s'z at the returned point
  double relgap = 0.0;  // |pcost - dcost| / max(1, min(|pcost|, |dcost|))
  double pres = 0.0;    // max(|Ax-b|, |Gx+s-h|)_inf
  double dres = 0.0;    // |A'y + G'z + c|_inf / max(1, |c|_inf)
  int iterations = 0;
  int attempts = 1;  // settings profiles tried, see ConeSettings::fallback
  // Primal infeasibility certificate, normalized to b'y + h'z = -1:
  // cert_residual is |A'y + G'z|_inf at that normalization.
  double cert_residual = 0.0;
  std::string message;
};

ConeSolution solve(const ConeProblem& problem, const ConeSettings& settings = {});

// Cone algebra, exposed for tests.
Eigen::VectorXd cone_product(const ConeDims& dims, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& v);
// Solve lambda o x = d for x.
Eigen::VectorXd cone_divide(const ConeDims& dims, const Eigen::VectorXd& lambda,
                            const Eigen::VectorXd& d);
// Largest alpha with u + alpha v in K, for u in int K (may be +inf).
double max_step(const ConeDims& dims, const Eigen::VectorXd& u, const Eigen::VectorXd& v);
bool in_interior(const ConeDims& dims, const Eigen::VectorXd& u);

/// Nesterov-Todd scaling W with W z = W^{-1} s = lambda.
struct NtScaling {
  Eigen::VectorXd linear;              // w_i = sqrt(s_i / z_i)
  std::vector<Eigen::MatrixXd> w, winv, w2;
  Eigen::VectorXd lambda;

  bool update(const ConeDims& dims, const Eigen::VectorXd& s, const Eigen::VectorXd& z);
  Eigen::VectorXd apply(const ConeDims& dims, const Eigen::VectorXd& v) const;
  Eigen::VectorXd apply_inverse(const ConeDims& dims, const Eigen::VectorXd& v) const;
  Eigen::VectorXd apply_squared(const ConeDims& dims, const Eigen::VectorXd& v) const;
};

}  // namespace gasflow::conic
