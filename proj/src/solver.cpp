#include "affsls/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/LU>

namespace affsls {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Inequalities with finite bounds folded in as extra rows:
// [C; -I_lb; I_ub] z <= [d; -lb; ub].
struct DenseInequalities {
  MatrixXd C;
  VectorXd d;
};

DenseInequalities expand_inequalities(const ConvexProgram& prog) {
  std::vector<Index> lower, upper;
  if (prog.lower_bounds) {
    for (Index i = 0; i < prog.num_vars; ++i) {
      if (std::isfinite((*prog.lower_bounds)(i))) lower.push_back(i);
    }
  }
  if (prog.upper_bounds) {
    for (Index i = 0; i < prog.num_vars; ++i) {
      if (std::isfinite((*prog.upper_bounds)(i))) upper.push_back(i);
    }
  }
  const Index base = prog.C_ineq.rows();
  const Index rows = base + static_cast<Index>(lower.size() + upper.size());
  DenseInequalities out{MatrixXd::Zero(rows, prog.num_vars), VectorXd(rows)};
  if (base > 0) {
    out.C.topRows(base) = MatrixXd(prog.C_ineq);
    out.d.head(base) = prog.d_ineq;
  }
  Index r = base;
  for (Index i : lower) {
    out.C(r, i) = -1.0;
    out.d(r++) = -(*prog.lower_bounds)(i);
  }
  for (Index i : upper) {
    out.C(r, i) = 1.0;
    out.d(r++) = (*prog.upper_bounds)(i);
  }
  return out;
}

// Largest step in [0, 1] keeping v + alpha * dv >= 0.
double max_step(const VectorXd& v, const VectorXd& dv) {
  double alpha = 1.0;
  for (Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

class KktSystem {
 public:
  KktSystem(const MatrixXd& H, const MatrixXd& A, double reg, int refine)
      : nv_(H.rows()), ne_(A.rows()), refine_(refine) {
    K_.resize(nv_ + ne_, nv_ + ne_);
    K_.topLeftCorner(nv_, nv_) = H;
    K_.topRightCorner(nv_, ne_) = A.transpose();
    K_.bottomLeftCorner(ne_, nv_) = A;
    K_.bottomRightCorner(ne_, ne_).setZero();
    MatrixXd Kreg = K_;
    Kreg.topLeftCorner(nv_, nv_).diagonal().array() += reg;
    Kreg.bottomRightCorner(ne_, ne_).diagonal().array() -= reg;
    lu_.compute(Kreg);
  }

  VectorXd solve(const VectorXd& rhs) const {
    VectorXd x = lu_.solve(rhs);
    for (int k = 0; k < refine_; ++k) {
      const VectorXd r = rhs - K_ * x;
      x += lu_.solve(r);
    }
    return x;
  }

 private:
  Index nv_, ne_;
  int refine_;
  MatrixXd K_;
  Eigen::PartialPivLU<MatrixXd> lu_;
};

struct IpmResult {
  bool converged = false;
  bool farkas = false;
  bool diverged = false;
  VectorXd z, y, lam, s;
  double primal_res = 0.0, dual_res = 0.0, comp = 0.0;
  int iterations = 0;
};

IpmResult run_ipm(const MatrixXd& P, const VectorXd& q, const MatrixXd& A,
                  const VectorXd& b, const MatrixXd& C, const VectorXd& d,
                  const SolverSettings& st) {
  const Index nv = P.rows(), ne = A.rows(), ni = C.rows();
  IpmResult out;

  // Start from the minimizer of the objective plus 1/2 |Cz - d|^2 on Az = b.
  {
    const KktSystem init(P + C.transpose() * C, A, st.regularization,
                         st.refinement_steps);
    VectorXd rhs(nv + ne);
    rhs << -q + C.transpose() * d, b;
    const VectorXd sol = init.solve(rhs);
    out.z = sol.head(nv);
    out.y = VectorXd::Zero(ne);
  }
  out.s = (d - C * out.z).cwiseMax(1.0);
  out.lam = VectorXd::Ones(ni);

  VectorXd& z = out.z;
  VectorXd& y = out.y;
  VectorXd& lam = out.lam;
  VectorXd& s = out.s;
  int stalled = 0;

  for (int it = 0; it <= st.max_iter; ++it) {
    out.iterations = it;
    const VectorXd r_d = P * z + q + A.transpose() * y + C.transpose() * lam;
    const VectorXd r_p = A * z - b;
    const VectorXd r_i = C * z + s - d;
    const double mu = ni > 0 ? s.dot(lam) / static_cast<double>(ni) : 0.0;

    out.primal_res = std::max(r_p.size() ? r_p.cwiseAbs().maxCoeff() : 0.0,
                              r_i.size() ? r_i.cwiseAbs().maxCoeff() : 0.0);
    out.dual_res = r_d.size() ? r_d.cwiseAbs().maxCoeff() : 0.0;
    out.comp = ni > 0 ? s.cwiseProduct(lam).maxCoeff() : 0.0;
    if (out.primal_res <= st.eps_prim && out.dual_res <= st.eps_dual &&
        out.comp <= st.eps_comp) {
      out.converged = true;
      return out;
    }
    if (it == st.max_iter) break;

    // Farkas certificate from the normalized multipliers.
    const double dual_scale =
        std::max(y.size() ? y.cwiseAbs().maxCoeff() : 0.0,
                 lam.size() ? lam.cwiseAbs().maxCoeff() : 0.0);
    if (dual_scale > 1e4) {
      const VectorXd yh = y / dual_scale, lh = lam / dual_scale;
      const double ray = (A.transpose() * yh + C.transpose() * lh)
                             .cwiseAbs()
                             .maxCoeff();
      const double gap = b.dot(yh) + d.dot(lh);
      if (ray <= 1e-7 && gap < -1e-6) {
        out.farkas = true;
        return out;
      }
    }
    const double primal_scale = z.size() ? z.cwiseAbs().maxCoeff() : 0.0;
    if (dual_scale > 1e12 || primal_scale > 1e12 || !z.allFinite() ||
        !lam.allFinite() || !y.allFinite()) {
      out.diverged = true;
      return out;
    }

    const VectorXd W = lam.cwiseQuotient(s);
    const MatrixXd H = P + C.transpose() * W.asDiagonal() * C;
    const KktSystem kkt(H, A, st.regularization, st.refinement_steps);

    auto newton = [&](const VectorXd& r_c, VectorXd& dz, VectorXd& dy,
                      VectorXd& dlam, VectorXd& ds) {
      const VectorXd t = (lam.cwiseProduct(r_i) - r_c).cwiseQuotient(s);
      VectorXd rhs(nv + ne);
      rhs << -r_d - C.transpose() * t, -r_p;
      const VectorXd sol = kkt.solve(rhs);
      dz = sol.head(nv);
      dy = sol.tail(ne);
      const VectorXd Cdz = C * dz;
      dlam = t + W.cwiseProduct(Cdz);
      ds = -r_i - Cdz;
    };

    VectorXd dz, dy, dlam, ds;
    double alpha = 1.0;
    if (ni == 0) {
      newton(VectorXd(), dz, dy, dlam, ds);
    } else {
      VectorXd dz_a, dy_a, dlam_a, ds_a;
      newton(s.cwiseProduct(lam), dz_a, dy_a, dlam_a, ds_a);
      const double a_aff = std::min(max_step(s, ds_a), max_step(lam, dlam_a));
      const double mu_aff =
          (s + a_aff * ds_a).dot(lam + a_aff * dlam_a) / static_cast<double>(ni);
      const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
      const VectorXd r_c = s.cwiseProduct(lam) + ds_a.cwiseProduct(dlam_a) -
                           VectorXd::Constant(ni, sigma * mu);
      newton(r_c, dz, dy, dlam, ds);
      alpha = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(lam, dlam)));
    }
    z += alpha * dz;
    y += alpha * dy;
    lam += alpha * dlam;
    s += alpha * ds;

    stalled = alpha < 1e-10 ? stalled + 1 : 0;
    if (stalled >= 5) break;
  }
  return out;
}

// Minimum total violation of the constraint set; positive iff infeasible.
std::optional<double> min_violation(const MatrixXd& A, const VectorXd& b,
                                    const MatrixXd& C, const VectorXd& d,
                                    const SolverSettings& st) {
  const Index nv = A.cols(), ne = A.rows(), ni = C.rows();
  // Variables [z; e+; e-; t].
  const Index N = nv + 2 * ne + ni;
  MatrixXd A1 = MatrixXd::Zero(ne, N);
  A1.leftCols(nv) = A;
  A1.middleCols(nv, ne).setIdentity();
  A1.middleCols(nv + ne, ne) = -MatrixXd::Identity(ne, ne);
  MatrixXd C1 = MatrixXd::Zero(ni + 2 * ne + ni, N);
  C1.topLeftCorner(ni, nv) = C;
  C1.block(0, nv + 2 * ne, ni, ni) = -MatrixXd::Identity(ni, ni);
  C1.bottomRightCorner(2 * ne + ni, 2 * ne + ni) =
      -MatrixXd::Identity(2 * ne + ni, 2 * ne + ni);
  VectorXd d1 = VectorXd::Zero(C1.rows());
  d1.head(ni) = d;
  VectorXd q1 = VectorXd::Zero(N);
  q1.tail(2 * ne + ni).setOnes();
  const IpmResult r = run_ipm(MatrixXd::Zero(N, N), q1, A1, b, C1, d1, st);
  if (!r.converged) return std::nullopt;
  return q1.dot(r.z);
}

}  // namespace

ConvexProgram ConvexProgram::Empty(Index num_vars) {
  ConvexProgram p;
  p.num_vars = num_vars;
  p.P = SparseMatrix(num_vars, num_vars);
  p.q = VectorXd::Zero(num_vars);
  p.A_eq = SparseMatrix(0, num_vars);
  p.b_eq = VectorXd(0);
  p.C_ineq = SparseMatrix(0, num_vars);
  p.d_ineq = VectorXd(0);
  return p;
}

void ConvexProgram::validate() const {
  auto fail = [](const std::string& m) {
    throw std::invalid_argument("ConvexProgram: " + m);
  };
  if (num_vars < 0) fail("negative variable count");
  if (P.rows() != num_vars || P.cols() != num_vars) fail("P has wrong shape");
  if (q.size() != num_vars) fail("q has wrong length");
  if (A_eq.cols() != num_vars || A_eq.rows() != b_eq.size()) {
    fail("equality rows inconsistent with rhs");
  }
  if (C_ineq.cols() != num_vars || C_ineq.rows() != d_ineq.size()) {
    fail("inequality rows inconsistent with rhs");
  }
  if (lower_bounds && lower_bounds->size() != num_vars) fail("lower bounds length");
  if (upper_bounds && upper_bounds->size() != num_vars) fail("upper bounds length");
  const MatrixXd Pd(P);
  if (Pd.size() > 0 && (Pd - Pd.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    fail("P is not symmetric");
  }
}

double ConvexProgram::objective(const VectorXd& z) const {
  return 0.5 * z.dot(P * z) + q.dot(z) + objective_constant;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kMaxIter: return "max_iter";
  }
  return "unknown";
}

Solution solve(const ConvexProgram& prog, const SolverSettings& settings) {
  prog.validate();
  const DenseInequalities ineq = expand_inequalities(prog);
  const MatrixXd P(prog.P);
  const MatrixXd A(prog.A_eq);

  const IpmResult r =
      run_ipm(P, prog.q, A, prog.b_eq, ineq.C, ineq.d, settings);

  Solution sol;
  sol.primal = r.z;
  sol.dual_eq = r.y;
  sol.dual_ineq = r.lam;
  sol.objective = prog.objective(r.z);
  sol.primal_residual = r.primal_res;
  sol.dual_residual = r.dual_res;
  sol.complementarity = r.comp;
  sol.iterations = r.iterations;

  std::ostringstream diag;
  diag << "iterations=" << r.iterations << " primal_res=" << r.primal_res
       << " dual_res=" << r.dual_res << " comp=" << r.comp;
  if (r.converged) {
    sol.status = SolveStatus::kOptimal;
  } else if (r.farkas) {
    sol.status = SolveStatus::kInfeasible;
    diag << " (Farkas certificate)";
  } else {
    const auto violation = min_violation(A, prog.b_eq, ineq.C, ineq.d, settings);
    if (violation && *violation > 1e-6) {
      sol.status = SolveStatus::kInfeasible;
      diag << " (minimum constraint violation " << *violation << ")";
    } else if (violation && r.diverged) {
      sol.status = SolveStatus::kUnbounded;
      diag << " (feasible set, diverging iterates)";
    } else {
      sol.status = SolveStatus::kMaxIter;
    }
  }
  sol.diagnostics = diag.str();
  return sol;
}

double KktReport::max() const {
  return std::max({stationarity, primal_feasibility, dual_feasibility,
                   complementarity});
}

KktReport kkt_check(const ConvexProgram& prog, const Solution& sol) {
  prog.validate();
  const DenseInequalities ineq = expand_inequalities(prog);
  const VectorXd& z = sol.primal;
  if (z.size() != prog.num_vars || sol.dual_eq.size() != prog.A_eq.rows() ||
      sol.dual_ineq.size() != ineq.C.rows()) {
    throw std::invalid_argument("kkt_check: solution vectors do not match program");
  }
  KktReport rep;
  const VectorXd grad = prog.P * z + prog.q +
                        prog.A_eq.transpose() * sol.dual_eq +
                        ineq.C.transpose() * sol.dual_ineq;
  rep.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
  double pf = 0.0;
  if (prog.A_eq.rows() > 0) {
    pf = (prog.A_eq * z - prog.b_eq).cwiseAbs().maxCoeff();
  }
  const VectorXd slack = ineq.d - ineq.C * z;
  if (slack.size() > 0) {
    pf = std::max(pf, (-slack).maxCoeff());
    rep.dual_feasibility = std::max(0.0, -sol.dual_ineq.minCoeff());
    rep.complementarity = sol.dual_ineq.cwiseProduct(slack).cwiseAbs().maxCoeff();
  }
  rep.primal_feasibility = std::max(0.0, pf);
  return rep;
}

}  // namespace affsls
