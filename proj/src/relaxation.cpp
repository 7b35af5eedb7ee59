#include "gasflow/relaxation.hpp"

#include <cmath>
#include <sstream>

#include "gasflow/log.hpp"

namespace gasflow {

namespace {

using Triplet = Eigen::Triplet<double, long>;

void write_expr(std::ostream& os, const ConicProgram& prog, const AffineExpr& e) {
  bool first = true;
  for (auto [var, coef] : e.terms) {
    if (coef == 0.0) continue;
    if (!first || coef < 0) os << (coef < 0 ? " - " : " + ");
    double mag = std::abs(coef);
    if (mag != 1.0) os << mag << ' ';
    os << prog.names[var];
    first = false;
  }
  if (e.constant != 0.0 || first) {
    if (first)
      os << e.constant;
    else
      os << (e.constant < 0 ? " - " : " + ") << std::abs(e.constant);
  }
}

}  // namespace

double AffineExpr::eval(const std::vector<double>& v) const {
  double s = constant;
  for (auto [var, coef] : terms) s += coef * v[var];
  return s;
}

const char* to_string(PrimalSolution::Status s) {
  switch (s) {
    case PrimalSolution::Status::Optimal: return "optimal";
    case PrimalSolution::Status::Infeasible: return "infeasible";
    case PrimalSolution::Status::MaxIter: return "max_iter";
  }
  return "unknown";
}

double ConicProgram::max_violation(const std::vector<double>& v) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < num_vars(); ++i) {
    worst = std::max(worst, lower[i] - v[i]);
    worst = std::max(worst, v[i] - upper[i]);
  }
  for (const LinearRow& r : rows) {
    double val = r.expr.eval(v);
    worst = std::max(worst, r.sense == RowSense::Equal ? std::abs(val) : val);
  }
  for (const QuadraticRow& r : quadratic) {
    double x = v[r.var];
    worst = std::max(worst, r.a * x * x - r.rhs.eval(v));
  }
  return worst;
}

std::string ConicProgram::dump() const {
  std::ostringstream os;
  os.precision(12);
  os << "minimize\n  obj: ";
  AffineExpr obj;
  for (std::size_t i = 0; i < num_vars(); ++i)
    if (objective[i] != 0.0) obj.add(i, objective[i]);
  write_expr(os, *this, obj);
  os << "\nsubject to\n";
  for (const LinearRow& r : rows) {
    AffineExpr lhs = r.expr;
    lhs.constant = 0.0;
    os << "  " << r.name << ": ";
    write_expr(os, *this, lhs);
    os << (r.sense == RowSense::Equal ? " = " : " <= ") << -r.expr.constant << '\n';
  }
  for (const QuadraticRow& r : quadratic) {
    os << "  " << r.name << ": " << r.a << ' ' << names[r.var] << "^2 <= ";
    write_expr(os, *this, r.rhs);
    os << '\n';
  }
  os << "bounds\n";
  for (std::size_t i = 0; i < num_vars(); ++i) {
    if (lower[i] == upper[i]) {
      os << "  " << names[i] << " = " << lower[i] << '\n';
    } else if (std::isfinite(lower[i]) || std::isfinite(upper[i])) {
      os << "  ";
      if (std::isfinite(lower[i])) os << lower[i] << " <= ";
      os << names[i];
      if (std::isfinite(upper[i])) os << " <= " << upper[i];
      os << '\n';
    }
  }
  os << "end\n";
  return os.str();
}

ConicProgram build_relaxation(const GasNetwork& net, const Injections& q,
                              const std::vector<Fixing>& fixing,
                              const RelaxationOptions& opts) {
  const std::size_t n = net.num_nodes(), p = net.num_edges();
  if (q.q.size() != n)
    throw GasFlowError(ErrorCode::DimensionMismatch, "build_relaxation: injection size");
  ConicProgram prog;
  prog.num_edges = p;
  prog.num_nodes = n;
  prog.big_m = opts.big_m;
  prog.lossy = net.lossy_pipes();
  prog.lossy_index.assign(p, -1);
  for (std::size_t k = 0; k < prog.lossy.size(); ++k) {
    const Edge& ed = net.edge(prog.lossy[k]);
    prog.lossy_index[prog.lossy[k]] = long(k);
    prog.friction.push_back(ed.friction);
    prog.from.push_back(ed.from);
    prog.to.push_back(ed.to);
  }
  if (fixing.size() != prog.lossy.size())
    throw GasFlowError(ErrorCode::DimensionMismatch, "build_relaxation: fixing size");

  const std::size_t L = prog.lossy.size();
  const std::size_t nv = p + n + 2 * L;
  prog.names.resize(nv);
  prog.lower.assign(nv, -ConicProgram::kInf);
  prog.upper.assign(nv, ConicProgram::kInf);
  prog.objective.assign(nv, 0.0);
  for (EdgeId e = 0; e < p; ++e) prog.names[prog.phi(e)] = "phi[" + net.edge(e).name + "]";
  for (NodeId v = 0; v < n; ++v) {
    prog.names[prog.psi(v)] = "psi[" + net.node_name(v) + "]";
    prog.lower[prog.psi(v)] = 0.0;
  }
  for (std::size_t k = 0; k < L; ++k) {
    const std::string& name = net.edge(prog.lossy[k]).name;
    prog.names[prog.t(k)] = "t[" + name + "]";
    prog.names[prog.x(k)] = "x[" + name + "]";
    prog.objective[prog.t(k)] = 1.0;
    prog.lower[prog.x(k)] = 0.0;
    prog.upper[prog.x(k)] = 1.0;
  }
  for (std::size_t k = 0; k < L; ++k) set_fixing(prog, k, fixing[k]);

  // Mass balance; the reference row is implied by 1'q = 0.
  const NodeId ref = net.reference_node();
  auto adj = net.incidence_lists();
  for (NodeId v = 0; v < n; ++v) {
    if (v == ref) continue;
    LinearRow r{"mass[" + net.node_name(v) + "]", {}, RowSense::Equal};
    for (EdgeId e : adj[v]) r.expr.add(prog.phi(e), net.edge(e).from == v ? 1.0 : -1.0);
    r.expr.constant = -q.q[v];
    prog.rows.push_back(std::move(r));
  }
  prog.lower[prog.psi(ref)] = prog.upper[prog.psi(ref)] = net.reference_psi();

  const double M = opts.big_m;
  for (EdgeId e = 0; e < p; ++e) {
    const Edge& ed = net.edge(e);
    if (ed.is_compressor()) {
      LinearRow r{"ratio[" + ed.name + "]", {}, RowSense::Equal};
      r.expr.add(prog.psi(ed.to), 1.0).add(prog.psi(ed.from), -ed.ratio);
      prog.rows.push_back(std::move(r));
      prog.lower[prog.phi(e)] = 0.0;
      continue;
    }
    const std::size_t k = std::size_t(prog.lossy_index[e]);
    const std::size_t f = prog.phi(e), pm = prog.psi(ed.from), pn = prog.psi(ed.to);
    const std::size_t xv = prog.x(k), tv = prog.t(k);
    // phi <= M x, -phi <= M (1 - x)
    LinearRow a1{"dir_pos[" + ed.name + "]", {}, RowSense::LessEqual};
    a1.expr.add(f, 1.0).add(xv, -M);
    LinearRow a2{"dir_neg[" + ed.name + "]", {}, RowSense::LessEqual};
    a2.expr.add(f, -1.0).add(xv, M);
    a2.expr.constant = -M;
    prog.rows.push_back(std::move(a1));
    prog.rows.push_back(std::move(a2));
    // t >= +-(psi_m - psi_n)
    LinearRow e1{"abs_pos[" + ed.name + "]", {}, RowSense::LessEqual};
    e1.expr.add(pm, 1.0).add(pn, -1.0).add(tv, -1.0);
    LinearRow e2{"abs_neg[" + ed.name + "]", {}, RowSense::LessEqual};
    e2.expr.add(pm, -1.0).add(pn, 1.0).add(tv, -1.0);
    prog.rows.push_back(std::move(e1));
    prog.rows.push_back(std::move(e2));
    // a phi^2 <= psi_m - psi_n + M (1 - x)
    QuadraticRow b{"wey_pos[" + ed.name + "]", ed.friction, f, {}};
    b.rhs.add(pm, 1.0).add(pn, -1.0).add(xv, -M);
    b.rhs.constant = M;
    // a phi^2 <= psi_n - psi_m + M x
    QuadraticRow c{"wey_neg[" + ed.name + "]", ed.friction, f, {}};
    c.rhs.add(pm, -1.0).add(pn, 1.0).add(xv, M);
    prog.quadratic.push_back(std::move(b));
    prog.quadratic.push_back(std::move(c));
    if (opts.strengthen) {
      QuadraticRow s{"cut[" + ed.name + "]", ed.friction, f, {}};
      s.rhs.add(tv, 1.0);
      s.implied_by_fixed = static_cast<long>(k);
      prog.quadratic.push_back(std::move(s));
    }
  }
  return prog;
}

void set_fixing(ConicProgram& prog, std::size_t k, Fixing f) {
  const std::size_t xv = prog.x(k);
  switch (f) {
    case Fixing::Zero: prog.lower[xv] = prog.upper[xv] = 0.0; break;
    case Fixing::One: prog.lower[xv] = prog.upper[xv] = 1.0; break;
    case Fixing::Free:
      prog.lower[xv] = 0.0;
      prog.upper[xv] = 1.0;
      break;
  }
}

ConeForm to_cone_form(const ConicProgram& prog) {
  const std::size_t nv = prog.num_vars();
  ConeForm form;
  form.column.assign(nv, -1);
  long ncol = 0;
  for (std::size_t i = 0; i < nv; ++i)
    if (prog.lower[i] != prog.upper[i]) form.column[i] = ncol++;

  // Fold fixed variables into the constant.
  auto reduce = [&](const AffineExpr& e) {
    AffineExpr out;
    out.constant = e.constant;
    for (auto [var, coef] : e.terms) {
      if (form.column[var] < 0)
        out.constant += coef * prog.lower[var];
      else
        out.terms.emplace_back(std::size_t(form.column[var]), coef);
    }
    return out;
  };

  std::vector<Triplet> at, gt;
  std::vector<double> b, h;
  // Rows are divided by their largest coefficient or constant so big-M rows
  // do not dominate the residuals.
  auto add_le = [&](const AffineExpr& e) {
    double sc = std::max(1.0, std::abs(e.constant));
    for (auto [col, coef] : e.terms) sc = std::max(sc, std::abs(coef));
    const long row = long(h.size());
    for (auto [col, coef] : e.terms) gt.emplace_back(row, long(col), coef / sc);
    h.push_back(-e.constant / sc);
  };
  for (const LinearRow& r : prog.rows) {
    AffineExpr e = reduce(r.expr);
    if (r.sense == RowSense::LessEqual) {
      if (e.terms.empty() && e.constant <= 0.0) continue;
      add_le(e);
    } else if (e.terms.empty()) {
      if (e.constant == 0.0) continue;
      add_le(e);
      for (auto& [col, coef] : e.terms) coef = -coef;
      e.constant = -e.constant;
      add_le(e);
    } else {
      const long row = long(b.size());
      for (auto [col, coef] : e.terms) at.emplace_back(row, long(col), coef);
      b.push_back(-e.constant);
    }
  }
  for (std::size_t i = 0; i < nv; ++i) {
    const long col = form.column[i];
    if (col < 0) continue;
    if (std::isfinite(prog.lower[i])) {
      gt.emplace_back(long(h.size()), col, -1.0);
      h.push_back(-prog.lower[i]);
    }
    if (std::isfinite(prog.upper[i])) {
      gt.emplace_back(long(h.size()), col, 1.0);
      h.push_back(prog.upper[i]);
    }
  }
  std::vector<std::pair<QuadraticRow, AffineExpr>> cones;
  for (const QuadraticRow& r : prog.quadratic) {
    if (r.implied_by_fixed >= 0 && form.column[prog.x(std::size_t(r.implied_by_fixed))] < 0)
      continue;
    AffineExpr rhs = reduce(r.rhs);
    if (form.column[r.var] < 0) {
      // a v^2 - rhs <= 0 with v fixed is linear.
      const double v = prog.lower[r.var];
      for (auto& [col, coef] : rhs.terms) coef = -coef;
      rhs.constant = r.a * v * v - rhs.constant;
      if (!(rhs.terms.empty() && rhs.constant <= 0.0)) add_le(rhs);
      continue;
    }
    cones.emplace_back(r, std::move(rhs));
  }

  conic::ConeProblem& cp = form.problem;
  cp.dims.linear = long(h.size());
  // a v^2 <= u  <=>  (u / s + 1, u / s - 1, 2 sqrt(a / s) v) in Q3 for any
  // s > 0; s tracks the magnitude of u's data so big-M rows stay well centred.
  for (const auto& [r, rhs] : cones) {
    double sc = std::max(1.0, std::abs(rhs.constant));
    for (auto [col, coef] : rhs.terms) sc = std::max(sc, std::abs(coef));
    const long row = long(h.size());
    for (auto [col, coef] : rhs.terms) {
      gt.emplace_back(row, long(col), -coef / sc);
      gt.emplace_back(row + 1, long(col), -coef / sc);
    }
    gt.emplace_back(row + 2, form.column[r.var], -2.0 * std::sqrt(r.a / sc));
    h.push_back(rhs.constant / sc + 1.0);
    h.push_back(rhs.constant / sc - 1.0);
    h.push_back(0.0);
    cp.dims.soc.push_back(3);
  }

  cp.c.resize(ncol);
  for (std::size_t i = 0; i < nv; ++i)
    if (form.column[i] >= 0) cp.c(form.column[i]) = prog.objective[i];
  cp.A.resize(long(b.size()), ncol);
  cp.A.setFromTriplets(at.begin(), at.end());
  cp.b = Eigen::Map<const Eigen::VectorXd>(b.data(), long(b.size()));
  cp.G.resize(long(h.size()), ncol);
  cp.G.setFromTriplets(gt.begin(), gt.end());
  cp.h = Eigen::Map<const Eigen::VectorXd>(h.data(), long(h.size()));
  return form;
}

PrimalSolution solve_conic(const ConicProgram& prog, const conic::ConeSettings& settings) {
  const ConeForm form = to_cone_form(prog);
  const conic::ConeSolution cs = conic::solve(form.problem, settings);
  PrimalSolution out;
  out.iterations = cs.iterations;
  out.attempts = cs.attempts;
  out.primal_residual = cs.pres;
  out.relative_gap = cs.relgap;
  out.message = cs.message;
  switch (cs.status) {
    case conic::ConeStatus::Optimal: out.status = PrimalSolution::Status::Optimal; break;
    case conic::ConeStatus::PrimalInfeasible:
      out.status = PrimalSolution::Status::Infeasible;
      out.certificate = InfeasibilityCertificate{cs.y, cs.z, cs.cert_residual};
      return out;
    case conic::ConeStatus::DualInfeasible:
      out.message = "unbounded relaxation: " + cs.message;
      out.status = PrimalSolution::Status::MaxIter;
      break;
    default: out.status = PrimalSolution::Status::MaxIter; break;
  }
  out.values.resize(prog.num_vars());
  out.objective = 0.0;
  for (std::size_t i = 0; i < prog.num_vars(); ++i) {
    const long col = form.column[i];
    out.values[i] = col < 0 ? prog.lower[i] : cs.x(col);
    out.objective += prog.objective[i] * out.values[i];
  }
  out.feasibility = prog.max_violation(out.values);

  if (out.status == PrimalSolution::Status::Optimal) {
    const double limit = 0.1 * prog.big_m;
    for (std::size_t k = 0; k < prog.lossy.size(); ++k) {
      const double phi = out.values[prog.phi(prog.lossy[k])];
      const double drop = std::abs(out.values[prog.psi(prog.from[k])] -
                                   out.values[prog.psi(prog.to[k])]);
      if (std::abs(phi) > limit || drop + prog.friction[k] * phi * phi > limit)
        out.big_m_warning = true;
    }
    if (out.big_m_warning)
      log().warn("big-M {} may be too small: flows or pressure drops exceed 0.1*M", prog.big_m);
  }
  return out;
}

bool verify_certificate(const ConicProgram& prog, const InfeasibilityCertificate& cert,
                        double tol) {
  const conic::ConeProblem cp = to_cone_form(prog).problem;
  if (cert.y.size() != cp.b.size() || cert.z.size() != cp.h.size()) return false;
  const double obj = cp.b.dot(cert.y) + cp.h.dot(cert.z);
  if (std::abs(obj + 1.0) > tol) return false;
  const Eigen::VectorXd r = cp.A.transpose() * cert.y + cp.G.transpose() * cert.z;
  if (r.lpNorm<Eigen::Infinity>() > tol) return false;
  // z in the (self-dual) cone, up to tol.
  const auto& d = cp.dims;
  for (long i = 0; i < d.linear; ++i)
    if (cert.z(i) < -tol) return false;
  long off = d.linear;
  for (long q : d.soc) {
    if (cert.z(off) + tol < cert.z.segment(off + 1, q - 1).norm()) return false;
    off += q;
  }
  return true;
}

}  // namespace gasflow
