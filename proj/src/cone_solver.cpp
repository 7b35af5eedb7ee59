#include "gasflow/cone_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/OrderingMethods>

namespace gasflow::conic {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Consecutive collapsed steps before giving up.
constexpr int kStallSteps = 5;

double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

// Sparse up-looking LDL' of a symmetric quasi-definite matrix under a fixed
// fill-reducing order. Pivots whose sign disagrees with the expected inertia
// (or vanish) are replaced by +-delta. The pattern is analyzed once; factor()
// takes the values of the analyzed lower triangle in its storage order.
class QuasiDefiniteLdl {
 public:
  // lower: lower triangle including the diagonal; sign: +1 / -1 per row.
  void analyze(const SparseMatrix& lower, const std::vector<int>& sign) {
    n_ = lower.rows();
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, long> perm;
    Eigen::AMDOrdering<long> amd;
    amd(lower, perm);
    // perm maps new positions to original rows.
    old_of_new_.assign(perm.indices().data(), perm.indices().data() + n_);
    new_of_old_.assign(n_, 0);
    for (Index i = 0; i < n_; ++i) new_of_old_[old_of_new_[i]] = i;
    sign_.resize(n_);
    for (Index i = 0; i < n_; ++i) sign_[i] = sign[old_of_new_[i]];

    // Permuted upper triangle; the value of each entry is its source slot.
    std::vector<Eigen::Triplet<double, long>> trip;
    trip.reserve(std::size_t(lower.nonZeros()));
    long slot = 0;
    for (Index j = 0; j < lower.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(lower, j); it; ++it, ++slot) {
        const long r = new_of_old_[it.row()], c = new_of_old_[j];
        trip.emplace_back(std::min(r, c), std::max(r, c), double(slot));
      }
    SparseMatrix U(n_, n_);
    U.setFromTriplets(trip.begin(), trip.end());
    U.makeCompressed();
    up_.assign(U.outerIndexPtr(), U.outerIndexPtr() + n_ + 1);
    ui_.assign(U.innerIndexPtr(), U.innerIndexPtr() + U.nonZeros());
    ux_.assign(std::size_t(U.nonZeros()), 0.0);
    slot_to_u_.assign(std::size_t(slot), 0);
    for (long p = 0; p < long(ux_.size()); ++p) slot_to_u_[std::size_t(U.valuePtr()[p])] = p;

    // Elimination tree and column counts.
    parent_.assign(n_, -1);
    std::vector<long> lnz(n_, 0), flag(n_);
    for (long k = 0; k < n_; ++k) {
      flag[k] = k;
      for (long p = up_[k]; p < up_[k + 1]; ++p) {
        for (long i = ui_[p]; i < k && flag[i] != k; i = parent_[i]) {
          if (parent_[i] == -1) parent_[i] = k;
          ++lnz[i];
          flag[i] = k;
        }
      }
    }
    lp_.assign(n_ + 1, 0);
    for (long k = 0; k < n_; ++k) lp_[k + 1] = lp_[k] + lnz[k];
    li_.assign(lp_[n_], 0);
    lx_.assign(lp_[n_], 0.0);
    d_.assign(n_, 0.0);
    y_.assign(n_, 0.0);
    pattern_.assign(n_, 0);
    flag_.assign(n_, 0);
    lnz_.assign(n_, 0);
  }

  bool factor(const double* values, double eps, double delta) {
    for (std::size_t k = 0; k < slot_to_u_.size(); ++k) ux_[std::size_t(slot_to_u_[k])] = values[k];
    for (long k = 0; k < n_; ++k) {
      long top = n_;
      flag_[k] = k;
      lnz_[k] = 0;
      for (long p = up_[k]; p < up_[k + 1]; ++p) {
        long i = ui_[p];
        y_[i] += ux_[p];
        long len = 0;
        for (; flag_[i] != k; i = parent_[i]) {
          pattern_[len++] = i;
          flag_[i] = k;
        }
        while (len > 0) pattern_[--top] = pattern_[--len];
      }
      d_[k] = y_[k];
      y_[k] = 0.0;
      for (; top < n_; ++top) {
        const long i = pattern_[top];
        const double yi = y_[i];
        y_[i] = 0.0;
        const long p2 = lp_[i] + lnz_[i];
        for (long p = lp_[i]; p < p2; ++p) y_[li_[p]] -= lx_[p] * yi;
        const double lki = yi / d_[i];
        d_[k] -= lki * yi;
        li_[p2] = k;
        lx_[p2] = lki;
        ++lnz_[i];
      }
      if (sign_[k] * d_[k] <= eps) d_[k] = sign_[k] * delta;
      if (!std::isfinite(d_[k])) return false;
    }
    return true;
  }

  VectorXd solve(const VectorXd& b) const {
    VectorXd x(n_);
    for (Index i = 0; i < n_; ++i) x(i) = b(old_of_new_[i]);
    for (long j = 0; j < n_; ++j)
      for (long p = lp_[j]; p < lp_[j + 1]; ++p) x(li_[p]) -= lx_[p] * x(j);
    for (long j = 0; j < n_; ++j) x(j) /= d_[j];
    for (long j = n_ - 1; j >= 0; --j)
      for (long p = lp_[j]; p < lp_[j + 1]; ++p) x(j) -= lx_[p] * x(li_[p]);
    VectorXd out(n_);
    for (Index i = 0; i < n_; ++i) out(old_of_new_[i]) = x(i);
    return out;
  }

 private:
  long n_ = 0;
  std::vector<long> old_of_new_, new_of_old_;
  std::vector<int> sign_;
  std::vector<long> up_, ui_, slot_to_u_, parent_;
  std::vector<double> ux_;
  std::vector<long> lp_, li_;
  std::vector<double> lx_, d_;
  // Workspace.
  std::vector<double> y_;
  std::vector<long> pattern_, flag_, lnz_;
};

// Quasi-definite KKT system in scaled form: with dz = W^-1 u,
//   [ dI   A'   (W^-1 G)' ]
//   [ A   -dI   0         ]
//   [ W^-1 G 0  -(I + dI) ]
// which keeps the cone block at unit scale however ill-conditioned W is.
// Factored by sparse LDL'; solves are refined against the unregularized
// scaled operator.
class KktSolver {
 public:
  KktSolver(const ConeProblem& prob, const ConeSettings& settings)
      : prob_(prob), settings_(settings), n_(prob.c.size()), p_(prob.b.size()),
        m_(prob.h.size()), A_(prob.A) {
    A_.makeCompressed();
    const ConeDims& dims = prob.dims;
    block_of_row_.assign(std::size_t(m_), -1);
    block_start_.clear();
    Index off = dims.linear;
    for (std::size_t k = 0; k < dims.soc.size(); ++k) {
      block_start_.push_back(off);
      for (Index i = 0; i < dims.soc[k]; ++i) block_of_row_[std::size_t(off + i)] = long(k);
      off += dims.soc[k];
    }
    build_pattern();
  }

  bool factor(const NtScaling& scaling) {
    scaling_ = &scaling;
    fill_scaled_g(scaling);
    const double d = settings_.static_reg;
    // Column j < n of K holds d, then A(:, j), then gs(:, j).
    double* kv = K_.valuePtr();
    const long* kp = K_.outerIndexPtr();
    const long* ap = A_.outerIndexPtr();
    const long* gp = gs_.outerIndexPtr();
    for (Index j = 0; j < n_; ++j) {
      long at = kp[j];
      kv[at++] = d;
      for (long q = ap[j]; q < ap[j + 1]; ++q) kv[at++] = A_.valuePtr()[q];
      for (long q = gp[j]; q < gp[j + 1]; ++q) kv[at++] = gs_.valuePtr()[q];
    }
    for (Index i = 0; i < p_; ++i) kv[kp[n_ + i]] = -d;
    for (Index i = 0; i < m_; ++i) kv[kp[n_ + p_ + i]] = -1.0 - d;
    return ldl_.factor(kv, settings_.dynamic_eps, settings_.dynamic_reg);
  }

  // Solves the unscaled system [0 A' G'; A 0 0; G 0 -W^2] v = rhs.
  VectorXd solve(const VectorXd& rhs) const {
    VectorXd srhs = rhs;
    srhs.tail(m_) = scaling_->apply_inverse(prob_.dims, rhs.tail(m_));
    VectorXd sol = ldl_.solve(srhs);
    double best = kInf;
    for (int it = 0; it < settings_.refine_steps; ++it) {
      VectorXd r = srhs - apply(sol);
      double err = inf_norm(r);
      if (!(err < best) || err <= 1e-13 * (1.0 + inf_norm(srhs))) break;
      best = err;
      sol += ldl_.solve(r);
    }
    sol.tail(m_) = scaling_->apply_inverse(prob_.dims, VectorXd(sol.tail(m_)));
    return sol;
  }

 private:
  // Pattern of gs_ = W^-1 G: each cone block touched by a column is closed
  // under the block. Also lays out K's lower triangle and analyzes it.
  void build_pattern() {
    const ConeDims& dims = prob_.dims;
    std::vector<Eigen::Triplet<double, long>> trip;
    std::vector<char> touched(dims.soc.size(), 0);
    std::vector<long> blocks;
    for (Index j = 0; j < n_; ++j) {
      blocks.clear();
      for (SparseMatrix::InnerIterator it(prob_.G, j); it; ++it) {
        const long k = block_of_row_[std::size_t(it.row())];
        if (k < 0) {
          trip.emplace_back(it.row(), j, 1.0);
        } else if (!touched[std::size_t(k)]) {
          touched[std::size_t(k)] = 1;
          blocks.push_back(k);
        }
      }
      for (long k : blocks) {
        touched[std::size_t(k)] = 0;
        const Index off = block_start_[std::size_t(k)], q = dims.soc[std::size_t(k)];
        for (Index i = 0; i < q; ++i) trip.emplace_back(off + i, j, 1.0);
      }
    }
    gs_.resize(m_, n_);
    gs_.setFromTriplets(trip.begin(), trip.end());
    gs_.makeCompressed();

    trip.clear();
    for (Index j = 0; j < n_; ++j) {
      trip.emplace_back(j, j, 1.0);
      for (SparseMatrix::InnerIterator it(prob_.A, j); it; ++it)
        trip.emplace_back(n_ + it.row(), j, 1.0);
      for (SparseMatrix::InnerIterator it(gs_, j); it; ++it)
        trip.emplace_back(n_ + p_ + it.row(), j, 1.0);
    }
    for (Index i = n_; i < n_ + p_ + m_; ++i) trip.emplace_back(i, i, 1.0);
    const Index dim = n_ + p_ + m_;
    K_.resize(dim, dim);
    K_.setFromTriplets(trip.begin(), trip.end());
    K_.makeCompressed();
    std::vector<int> sign(std::size_t(dim), -1);
    std::fill(sign.begin(), sign.begin() + n_, 1);
    ldl_.analyze(K_, sign);
  }

  void fill_scaled_g(const NtScaling& scaling) {
    const ConeDims& dims = prob_.dims;
    double* gv = gs_.valuePtr();
    const long* gp = gs_.outerIndexPtr();
    const long* gi = gs_.innerIndexPtr();
    VectorXd col;
    for (Index j = 0; j < n_; ++j) {
      SparseMatrix::InnerIterator it(prob_.G, j);
      long q = gp[j];
      while (q < gp[j + 1]) {
        const long row = gi[q];
        const long k = block_of_row_[std::size_t(row)];
        if (k < 0) {
          // Linear rows of gs_ and G coincide one to one.
          while (it.row() < row) ++it;
          gv[q++] = it.value() / scaling.linear(row);
          continue;
        }
        const Index off = block_start_[std::size_t(k)], len = dims.soc[std::size_t(k)];
        col.setZero(len);
        for (; it && it.row() < off + len; ++it)
          if (it.row() >= off) col(it.row() - off) = it.value();
        const VectorXd sc = scaling.winv[std::size_t(k)] * col;
        for (Index i = 0; i < len; ++i) gv[q++] = sc(i);
      }
    }
  }

  VectorXd apply(const VectorXd& v) const {
    VectorXd out(v.size());
    auto x = v.segment(0, n_);
    auto y = v.segment(n_, p_);
    auto u = v.segment(n_ + p_, m_);
    out.segment(0, n_) = prob_.A.transpose() * y + gs_.transpose() * u;
    out.segment(n_, p_) = prob_.A * x;
    out.segment(n_ + p_, m_) = gs_ * x - u;
    return out;
  }

  const ConeProblem& prob_;
  const ConeSettings& settings_;
  Index n_, p_, m_;
  std::vector<long> block_of_row_;
  std::vector<Index> block_start_;
  SparseMatrix A_, gs_, K_;
  QuasiDefiniteLdl ldl_;
  const NtScaling* scaling_ = nullptr;
};

// Identity element of K.
VectorXd cone_identity(const ConeDims& dims) {
  VectorXd e = VectorXd::Zero(dims.rows());
  e.head(dims.linear).setOnes();
  Index off = dims.linear;
  for (Index q : dims.soc) {
    e(off) = 1.0;
    off += q;
  }
  return e;
}

// u + (1 + alpha) e with alpha the smallest shift placing u in K.
VectorXd shift_into_cone(const ConeDims& dims, const VectorXd& u) {
  double alpha = -kInf;
  for (Index i = 0; i < dims.linear; ++i) alpha = std::max(alpha, -u(i));
  Index off = dims.linear;
  for (Index q : dims.soc) {
    alpha = std::max(alpha, u.segment(off + 1, q - 1).norm() - u(off));
    off += q;
  }
  if (alpha < 0.0) return u;
  return u + (1.0 + alpha) * cone_identity(dims);
}

// Ruiz equilibration of [A; G]: x = F xs, rows of A scaled by D, rows of G
// by E (one factor per cone block so the cone is preserved).
struct Equilibration {
  VectorXd d, e, f;
};

Equilibration equilibrate(const ConeProblem& prob, ConeProblem& out, int passes) {
  const ConeDims& dims = prob.dims;
  const Index n = prob.c.size(), p = prob.b.size(), m = prob.h.size();
  Equilibration eq{VectorXd::Ones(p), VectorXd::Ones(m), VectorXd::Ones(n)};
  auto clamp_norm = [](double v) { return std::clamp(std::sqrt(v), 1e-4, 1e4); };
  for (int pass = 0; pass < passes; ++pass) {
    VectorXd col = VectorXd::Zero(n), rowa = VectorXd::Zero(p), rowg = VectorXd::Zero(m);
    for (Index j = 0; j < n; ++j) {
      for (SparseMatrix::InnerIterator it(prob.A, j); it; ++it) {
        const double v = std::abs(it.value()) * eq.d(it.row()) * eq.f(j);
        col(j) = std::max(col(j), v);
        rowa(it.row()) = std::max(rowa(it.row()), v);
      }
      for (SparseMatrix::InnerIterator it(prob.G, j); it; ++it) {
        const double v = std::abs(it.value()) * eq.e(it.row()) * eq.f(j);
        col(j) = std::max(col(j), v);
        rowg(it.row()) = std::max(rowg(it.row()), v);
      }
    }
    Index off = dims.linear;
    for (Index q : dims.soc) {
      rowg.segment(off, q).setConstant(rowg.segment(off, q).maxCoeff());
      off += q;
    }
    for (Index j = 0; j < n; ++j)
      if (col(j) > 0.0) eq.f(j) /= clamp_norm(col(j));
    for (Index i = 0; i < p; ++i)
      if (rowa(i) > 0.0) eq.d(i) /= clamp_norm(rowa(i));
    for (Index i = 0; i < m; ++i)
      if (rowg(i) > 0.0) eq.e(i) /= clamp_norm(rowg(i));
  }
  out.dims = dims;
  out.c = prob.c.cwiseProduct(eq.f);
  out.b = prob.b.cwiseProduct(eq.d);
  out.h = prob.h.cwiseProduct(eq.e);
  out.A = eq.d.asDiagonal() * prob.A * eq.f.asDiagonal();
  out.G = eq.e.asDiagonal() * prob.G * eq.f.asDiagonal();
  out.A.makeCompressed();
  out.G.makeCompressed();
  return eq;
}

}  // namespace

const char* to_string(ConeStatus s) {
  switch (s) {
    case ConeStatus::Optimal: return "optimal";
    case ConeStatus::PrimalInfeasible: return "primal_infeasible";
    case ConeStatus::DualInfeasible: return "dual_infeasible";
    case ConeStatus::MaxIter: return "max_iter";
    case ConeStatus::NumericalError: return "numerical_error";
  }
  return "unknown";
}

Index ConeDims::rows() const {
  Index r = linear;
  for (Index q : soc) r += q;
  return r;
}

VectorXd cone_product(const ConeDims& dims, const VectorXd& u, const VectorXd& v) {
  VectorXd out(u.size());
  out.head(dims.linear) = u.head(dims.linear).cwiseProduct(v.head(dims.linear));
  Index off = dims.linear;
  for (Index q : dims.soc) {
    auto a = u.segment(off, q);
    auto b = v.segment(off, q);
    out(off) = a.dot(b);
    out.segment(off + 1, q - 1) = a(0) * b.tail(q - 1) + b(0) * a.tail(q - 1);
    off += q;
  }
  return out;
}

VectorXd cone_divide(const ConeDims& dims, const VectorXd& lambda, const VectorXd& d) {
  VectorXd out(d.size());
  out.head(dims.linear) = d.head(dims.linear).cwiseQuotient(lambda.head(dims.linear));
  Index off = dims.linear;
  for (Index q : dims.soc) {
    auto l = lambda.segment(off, q);
    auto r = d.segment(off, q);
    const double l0 = l(0);
    const double det = l0 * l0 - l.tail(q - 1).squaredNorm();
    const double x0 = (l0 * r(0) - l.tail(q - 1).dot(r.tail(q - 1))) / det;
    out(off) = x0;
    out.segment(off + 1, q - 1) = (r.tail(q - 1) - x0 * l.tail(q - 1)) / l0;
    off += q;
  }
  return out;
}

bool in_interior(const ConeDims& dims, const VectorXd& u) {
  for (Index i = 0; i < dims.linear; ++i)
    if (!(u(i) > 0.0)) return false;
  Index off = dims.linear;
  for (Index q : dims.soc) {
    if (!(u(off) > u.segment(off + 1, q - 1).norm())) return false;
    off += q;
  }
  return true;
}

double max_step(const ConeDims& dims, const VectorXd& u, const VectorXd& v) {
  double alpha = kInf;
  for (Index i = 0; i < dims.linear; ++i)
    if (v(i) < 0.0) alpha = std::min(alpha, -u(i) / v(i));
  Index off = dims.linear;
  for (Index q : dims.soc) {
    auto a = u.segment(off, q);
    auto b = v.segment(off, q);
    // (a + t b)' J (a + t b) = A t^2 + 2 B t + C with C > 0.
    const double A = b(0) * b(0) - b.tail(q - 1).squaredNorm();
    const double B = a(0) * b(0) - a.tail(q - 1).dot(b.tail(q - 1));
    const double C = a(0) * a(0) - a.tail(q - 1).squaredNorm();
    const double disc = std::max(B * B - A * C, 0.0);
    const double denom = -B + std::sqrt(disc);
    if (denom > 0.0) alpha = std::min(alpha, C / denom);
    off += q;
  }
  return alpha;
}

bool NtScaling::update(const ConeDims& dims, const VectorXd& s, const VectorXd& z) {
  linear.resize(dims.linear);
  lambda.resize(s.size());
  for (Index i = 0; i < dims.linear; ++i) {
    if (!(s(i) > 0.0) || !(z(i) > 0.0)) return false;
    linear(i) = std::sqrt(s(i) / z(i));
    lambda(i) = std::sqrt(s(i) * z(i));
  }
  w.resize(dims.soc.size());
  winv.resize(dims.soc.size());
  w2.resize(dims.soc.size());
  Index off = dims.linear;
  for (std::size_t k = 0; k < dims.soc.size(); ++k) {
    const Index q = dims.soc[k];
    VectorXd sk = s.segment(off, q), zk = z.segment(off, q);
    const double s1n = sk.tail(q - 1).norm(), z1n = zk.tail(q - 1).norm();
    const double sres = (sk(0) - s1n) * (sk(0) + s1n);
    const double zres = (zk(0) - z1n) * (zk(0) + z1n);
    if (!(sk(0) > s1n) || !(zk(0) > z1n) || !(sres > 0.0) || !(zres > 0.0)) return false;
    const double snorm = std::sqrt(sres), znorm = std::sqrt(zres);
    VectorXd sb = sk / snorm, zb = zk / znorm;
    const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
    const double w0 = (sb(0) + zb(0)) / (2.0 * gamma);
    VectorXd w1 = (sb.tail(q - 1) - zb.tail(q - 1)) / (2.0 * gamma);
    const double eta = std::sqrt(snorm / znorm);

    MatrixXd Wb(q, q), Wi(q, q);
    MatrixXd inner = MatrixXd::Identity(q - 1, q - 1) + w1 * w1.transpose() / (1.0 + w0);
    Wb(0, 0) = w0;
    Wb.block(0, 1, 1, q - 1) = w1.transpose();
    Wb.block(1, 0, q - 1, 1) = w1;
    Wb.block(1, 1, q - 1, q - 1) = inner;
    Wi = Wb;
    Wi.block(0, 1, 1, q - 1) *= -1.0;
    Wi.block(1, 0, q - 1, 1) *= -1.0;
    w[k] = eta * Wb;
    winv[k] = Wi / eta;
    w2[k] = w[k] * w[k];
    lambda.segment(off, q) = w[k] * zk;
    off += q;
  }
  return true;
}

VectorXd NtScaling::apply(const ConeDims& dims, const VectorXd& v) const {
  VectorXd out(v.size());
  out.head(dims.linear) = linear.cwiseProduct(v.head(dims.linear));
  Index off = dims.linear;
  for (std::size_t k = 0; k < dims.soc.size(); ++k) {
    out.segment(off, dims.soc[k]) = w[k] * v.segment(off, dims.soc[k]);
    off += dims.soc[k];
  }
  return out;
}

VectorXd NtScaling::apply_inverse(const ConeDims& dims, const VectorXd& v) const {
  VectorXd out(v.size());
  out.head(dims.linear) = v.head(dims.linear).cwiseQuotient(linear);
  Index off = dims.linear;
  for (std::size_t k = 0; k < dims.soc.size(); ++k) {
    out.segment(off, dims.soc[k]) = winv[k] * v.segment(off, dims.soc[k]);
    off += dims.soc[k];
  }
  return out;
}

VectorXd NtScaling::apply_squared(const ConeDims& dims, const VectorXd& v) const {
  VectorXd out(v.size());
  out.head(dims.linear) = linear.cwiseAbs2().cwiseProduct(v.head(dims.linear));
  Index off = dims.linear;
  for (std::size_t k = 0; k < dims.soc.size(); ++k) {
    out.segment(off, dims.soc[k]) = w2[k] * v.segment(off, dims.soc[k]);
    off += dims.soc[k];
  }
  return out;
}

namespace {

ConeSolution solve_once(const ConeProblem& original, const ConeSettings& settings) {
  const ConeDims& dims = original.dims;
  const Index n = original.c.size(), p = original.b.size(), m = original.h.size();
  const double degree = static_cast<double>(dims.degree());
  const double cnorm = std::max(1.0, inf_norm(original.c));
  ConeSolution out;

  // The iteration runs on the equilibrated problem; residuals are reported
  // in the original units.
  ConeProblem prob;
  const Equilibration eq = equilibrate(original, prob, settings.equilibrate_passes);
  auto unscale_x = [&](const VectorXd& v) { return VectorXd(v.cwiseProduct(eq.f)); };
  auto unscale_y = [&](const VectorXd& v) { return VectorXd(v.cwiseProduct(eq.d)); };
  auto unscale_z = [&](const VectorXd& v) { return VectorXd(v.cwiseProduct(eq.e)); };
  auto unscale_s = [&](const VectorXd& v) { return VectorXd(v.cwiseQuotient(eq.e)); };

  KktSolver kkt(prob, settings);
  NtScaling scaling;
  // Identity scaling for the initial point.
  scaling.linear = VectorXd::Ones(dims.linear);
  scaling.w.clear();
  for (Index q : dims.soc) {
    scaling.w.push_back(MatrixXd::Identity(q, q));
    scaling.winv.push_back(MatrixXd::Identity(q, q));
    scaling.w2.push_back(MatrixXd::Identity(q, q));
  }
  if (!kkt.factor(scaling)) {
    out.status = ConeStatus::NumericalError;
    out.message = "initial KKT factorization failed";
    return out;
  }

  VectorXd rhs = VectorXd::Zero(n + p + m);
  rhs.segment(n, p) = prob.b;
  rhs.segment(n + p, m) = prob.h;
  VectorXd sol = kkt.solve(rhs);
  VectorXd x = sol.head(n);
  VectorXd s = shift_into_cone(dims, -sol.tail(m));

  rhs.setZero();
  rhs.head(n) = -prob.c;
  sol = kkt.solve(rhs);
  VectorXd y = sol.segment(n, p);
  VectorXd z = shift_into_cone(dims, sol.tail(m));
  double tau = 1.0, kappa = 1.0;

  const VectorXd e = cone_identity(dims);
  VectorXd rhs2(n + p + m);
  rhs2 << -prob.c, prob.b, prob.h;

  int stalled = 0;
  for (int iter = 0; iter <= settings.max_iter; ++iter) {
    const VectorXd rx = prob.A.transpose() * y + prob.G.transpose() * z + prob.c * tau;
    const VectorXd ry = prob.A * x - prob.b * tau;
    const VectorXd rz = s + prob.G * x - prob.h * tau;
    const double cx = prob.c.dot(x), by = prob.b.dot(y), hz = prob.h.dot(z);
    const double rt = kappa + cx + by + hz;
    const double sz = s.dot(z);
    const double mu = (sz + tau * kappa) / (degree + 1.0);

    out.iterations = iter;
    out.pcost = cx / tau;
    out.dcost = -(by + hz) / tau;
    out.gap = sz / (tau * tau);
    out.relgap = std::abs(out.pcost - out.dcost) /
                 std::max(1.0, std::min(std::abs(out.pcost), std::abs(out.dcost)));
    out.pres = std::max(inf_norm(ry.cwiseQuotient(eq.d)), inf_norm(rz.cwiseQuotient(eq.e))) / tau;
    out.dres = inf_norm(rx.cwiseQuotient(eq.f)) / tau / cnorm;

    if (settings.verbose)
      std::fprintf(stderr, "%3d pcost %+.6e dcost %+.6e gap %.2e pd %.2e pres %.2e dres %.2e tau %.2e kap %.2e\n",
                   iter, out.pcost, out.dcost, out.gap, out.pcost - out.dcost, out.pres, out.dres, tau, kappa);
    if (out.pres <= settings.feastol && out.dres <= settings.feastol &&
        out.relgap <= settings.reltol) {
      out.status = ConeStatus::Optimal;
      out.x = unscale_x(x / tau);
      out.y = unscale_y(y / tau);
      out.z = unscale_z(z / tau);
      out.s = unscale_s(s / tau);
      return out;
    }
    if (by + hz < 0.0) {
      const VectorXd aty = prob.A.transpose() * y + prob.G.transpose() * z;
      const double res = inf_norm(aty.cwiseQuotient(eq.f)) / -(by + hz);
      if (res <= settings.infeastol) {
        out.status = ConeStatus::PrimalInfeasible;
        out.y = unscale_y(y / -(by + hz));
        out.z = unscale_z(z / -(by + hz));
        out.cert_residual = res;
        out.message = "primal infeasibility certificate found";
        return out;
      }
    }
    if (cx < 0.0) {
      const VectorXd ax = prob.A * x, gx = prob.G * x + s;
      const double res =
          std::max(inf_norm(ax.cwiseQuotient(eq.d)), inf_norm(gx.cwiseQuotient(eq.e))) / -cx;
      if (res <= settings.infeastol) {
        out.status = ConeStatus::DualInfeasible;
        out.x = unscale_x(x / -cx);
        out.message = "dual infeasibility certificate found";
        return out;
      }
    }
    if (iter == settings.max_iter) break;

    if (!scaling.update(dims, s, z)) {
      out.status = ConeStatus::NumericalError;
      out.message = "iterate left the cone interior";
      break;
    }
    if (!kkt.factor(scaling)) {
      out.status = ConeStatus::NumericalError;
      out.message = "KKT factorization failed";
      break;
    }
    const VectorXd& lambda = scaling.lambda;
    const VectorXd v2 = kkt.solve(rhs2);
    const double v2dot =
        prob.c.dot(v2.head(n)) + prob.b.dot(v2.segment(n, p)) + prob.h.dot(v2.tail(m));

    struct Direction {
      VectorXd dx, dy, dz, ds;
      double dtau, dkappa;
    };
    auto direction = [&](double eta, const VectorXd& ds_target, double dk_target) {
      VectorXd u = cone_divide(dims, lambda, ds_target);
      VectorXd Wu = scaling.apply(dims, u);
      VectorXd rhs1(n + p + m);
      rhs1 << -eta * rx, -eta * ry, -eta * rz - Wu;
      VectorXd v1 = kkt.solve(rhs1);
      const double v1dot =
          prob.c.dot(v1.head(n)) + prob.b.dot(v1.segment(n, p)) + prob.h.dot(v1.tail(m));
      Direction d;
      d.dtau = (-eta * rt - dk_target / tau - v1dot) / (v2dot - kappa / tau);
      VectorXd full = v1 + d.dtau * v2;
      d.dx = full.head(n);
      d.dy = full.segment(n, p);
      d.dz = full.tail(m);
      // From the linearized s + Gx - h tau = r_z, so the primal residual
      // contracts exactly instead of inheriting W^2-amplified solve errors.
      d.ds = -eta * rz - prob.G * d.dx + prob.h * d.dtau;
      d.dkappa = (dk_target - kappa * d.dtau) / tau;
      return d;
    };
    auto step_length = [&](const Direction& d) {
      // On the unscaled iterates: ds is not W lambda-consistent exactly.
      double a = std::min(max_step(dims, s, d.ds), max_step(dims, z, d.dz));
      if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
      if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
      return a;
    };

    // Predictor.
    Direction aff = direction(1.0, -cone_product(dims, lambda, lambda), -tau * kappa);
    const double alpha_aff = std::min(1.0, step_length(aff));
    const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);

    // Corrector.
    VectorXd corr = cone_product(dims, scaling.apply_inverse(dims, aff.ds),
                                 scaling.apply(dims, aff.dz));
    VectorXd ds_target = -cone_product(dims, lambda, lambda) - corr + sigma * mu * e;
    double dk_target = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
    Direction d = direction(1.0 - sigma, ds_target, dk_target);
    const double alpha = std::min(1.0, settings.step_fraction * step_length(d));
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
      out.status = ConeStatus::NumericalError;
      out.message = "zero step length";
      break;
    }

    double a = alpha;
    for (int back = 0; back < 20; ++back, a *= 0.5) {
      if (in_interior(dims, s + a * d.ds) && in_interior(dims, z + a * d.dz)) break;
    }
    if (settings.verbose) std::fprintf(stderr, "    step %.3e (max %.3e) sigma %.2e\n", a, alpha, sigma);
    stalled = a < 1e-10 ? stalled + 1 : 0;
    if (stalled >= kStallSteps) {
      out.status = ConeStatus::MaxIter;
      out.message = "no progress: step length collapsed";
      break;
    }
    x += a * d.dx;
    y += a * d.dy;
    z += a * d.dz;
    s += a * d.ds;
    tau += a * d.dtau;
    kappa += a * d.dkappa;
  }

  if (out.status != ConeStatus::NumericalError && out.message.empty()) {
    out.status = ConeStatus::MaxIter;
    out.message = "iteration limit reached";
  }
  out.x = unscale_x(x / tau);
  out.y = unscale_y(y / tau);
  out.z = unscale_z(z / tau);
  out.s = unscale_s(s / tau);
  return out;
}

bool failed(const ConeSolution& s) {
  return s.status == ConeStatus::MaxIter || s.status == ConeStatus::NumericalError;
}

}  // namespace

ConeSolution solve(const ConeProblem& problem, const ConeSettings& settings) {
  ConeSolution first = solve_once(problem, settings);
  first.attempts = 1;
  if (!failed(first) || !settings.fallback) return first;
  // The endgame on degenerate faces is sensitive to scaling and
  // regularization; a different profile usually gets through.
  ConeSettings plain = settings, damped = settings, both = settings;
  plain.equilibrate_passes = 0;
  damped.static_reg = 1e-6;
  both.equilibrate_passes = 0;
  both.static_reg = 1e-6;
  int attempt = 1;
  for (const ConeSettings* alt : {&plain, &damped, &both}) {
    ConeSolution next = solve_once(problem, *alt);
    next.attempts = ++attempt;
    if (!failed(next)) return next;
  }
  return first;
}

}  // namespace gasflow::conic
