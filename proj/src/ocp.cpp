#include "affsls/ocp.hpp"

#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

namespace affsls {
namespace {

using Triplet = Eigen::Triplet<double>;

// Row-oriented accumulator for a block of linear constraints.
class RowBlock {
 public:
  Index add_row(double rhs) {
    rhs_.push_back(rhs);
    return static_cast<Index>(rhs_.size()) - 1;
  }
  void add(Index row, Index col, double v) {
    if (v != 0.0) trips_.emplace_back(row, col, v);
  }
  Index rows() const { return static_cast<Index>(rhs_.size()); }

  SparseMatrix matrix(Index cols) const {
    SparseMatrix M(rows(), cols);
    M.setFromTriplets(trips_.begin(), trips_.end());
    return M;
  }
  VectorXd rhs() const {
    return Eigen::Map<const VectorXd>(rhs_.data(), rows());
  }

 private:
  std::vector<Triplet> trips_;
  std::vector<double> rhs_;
};

struct Assembly {
  ProgramLayout layout;
  RowBlock eq;
  RowBlock ineq;
  std::vector<Triplet> hessian;
  std::vector<std::pair<Index, double>> linear;
  double constant = 0.0;

  Index x(int t, int i) const { return layout.x_offset + t * layout.n + i; }
  Index u(int t, int i) const { return layout.u_offset + t * layout.m + i; }
};

void require_symmetric(const MatrixXd& M, const char* name) {
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument(std::string("CostSpec: ") + name +
                                " must be symmetric");
  }
}

double min_eigenvalue(const MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool full_rank(const MatrixXd& M) {
  Eigen::FullPivLU<MatrixXd> lu(M);
  lu.setThreshold(1e-12);
  return lu.rank() == std::min(M.rows(), M.cols());
}

int epigraph_count(const CostSpec& c, int n, int m, int T) {
  switch (c.p_norm) {
    case PNorm::kTwo: return 0;
    case PNorm::kInf: return 2 * T + 1;
    case PNorm::kOne: return T * (n + m) + n;
  }
  return 0;
}

// Epigraph rows for |M (v - r)|_p over the variables starting at `first`.
// Returns the number of epigraph variables consumed.
Index add_norm_epigraph(Assembly& a, PNorm p, const MatrixXd& M,
                        Index first, const VectorXd& r, Index epi) {
  const Index k = M.rows();
  const VectorXd Mr = M * r;
  for (Index i = 0; i < k; ++i) {
    for (int sign : {1, -1}) {
      const Index row = a.ineq.add_row(sign * Mr(i));
      for (Index j = 0; j < M.cols(); ++j) a.ineq.add(row, first + j, sign * M(i, j));
      a.ineq.add(row, p == PNorm::kInf ? epi : epi + i, -1.0);
    }
  }
  const Index used = p == PNorm::kInf ? 1 : k;
  for (Index i = 0; i < used; ++i) a.linear.emplace_back(epi + i, 1.0);
  return used;
}

void add_quadratic(Assembly& a, const MatrixXd& W, Index first,
                   const VectorXd& r) {
  // (v - r)' W (v - r) = 1/2 v' (2W) v - 2 r' W v + r' W r
  for (Index i = 0; i < W.rows(); ++i) {
    for (Index j = 0; j < W.cols(); ++j) {
      if (W(i, j) != 0.0) a.hessian.emplace_back(first + i, first + j, 2.0 * W(i, j));
    }
  }
  const VectorXd g = -2.0 * W * r;
  for (Index i = 0; i < g.size(); ++i) {
    if (g(i) != 0.0) a.linear.emplace_back(first + i, g(i));
  }
  a.constant += r.dot(W * r);
}

void add_cost(Assembly& a, const CostSpec& c) {
  const int n = a.layout.n, m = a.layout.m, T = a.layout.T;
  const VectorXd r = c.reference(n);
  const VectorXd zero_m = VectorXd::Zero(m);
  if (c.p_norm == PNorm::kTwo) {
    for (int t = 0; t < T; ++t) {
      add_quadratic(a, c.Q, a.x(t, 0), r);
      add_quadratic(a, c.R, a.u(t, 0), zero_m);
    }
    add_quadratic(a, c.P, a.x(T, 0), r);
  } else {
    Index epi = a.layout.epigraph_offset;
    for (int t = 0; t < T; ++t) {
      epi += add_norm_epigraph(a, c.p_norm, c.Q, a.x(t, 0), r, epi);
      epi += add_norm_epigraph(a, c.p_norm, c.R, a.u(t, 0), zero_m, epi);
    }
    epi += add_norm_epigraph(a, c.p_norm, c.P, a.x(T, 0), r, epi);
  }
  if (c.u_reg > 0.0) {
    const MatrixXd W = c.u_reg * MatrixXd::Identity(m, m);
    for (int t = 0; t <= T; ++t) add_quadratic(a, W, a.u(t, 0), zero_m);
  }
}

void add_constraints(Assembly& a, const PolytopicConstraints& cons) {
  const int n = a.layout.n, m = a.layout.m, T = a.layout.T;
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < cons.rows(); ++k) {
      const Index row = a.ineq.add_row(cons.h(k));
      for (int i = 0; i < n; ++i) a.ineq.add(row, a.x(t, i), cons.H_x(k, i));
      for (int i = 0; i < m; ++i) a.ineq.add(row, a.u(t, i), cons.H_u(k, i));
    }
  }
  if (cons.terminal) {
    for (Index k = 0; k < cons.terminal->h.size(); ++k) {
      const Index row = a.ineq.add_row(cons.terminal->h(k));
      for (int i = 0; i < n; ++i) a.ineq.add(row, a.x(T, i), cons.terminal->H(k, i));
    }
  }
  // The final input never reaches the state within the horizon.
  for (int i = 0; i < m; ++i) a.eq.add(a.eq.add_row(0.0), a.u(T, i), 1.0);
}

Assembly start_assembly(int n, int m, int T, Index aux_count,
                        const CostSpec& cost) {
  Assembly a;
  a.layout.n = n;
  a.layout.m = m;
  a.layout.T = T;
  a.layout.x_offset = 0;
  a.layout.u_offset = static_cast<Index>(n) * (T + 1);
  a.layout.aux_offset = a.layout.u_offset + static_cast<Index>(m) * (T + 1);
  a.layout.epigraph_offset = a.layout.aux_offset + aux_count;
  a.layout.epigraph_count = epigraph_count(cost, n, m, T);
  return a;
}

ConvexProgram finish(const Assembly& a) {
  const Index N = a.layout.epigraph_offset + a.layout.epigraph_count;
  ConvexProgram p = ConvexProgram::Empty(N);
  p.P.setFromTriplets(a.hessian.begin(), a.hessian.end());
  for (const auto& [i, v] : a.linear) p.q(i) += v;
  p.objective_constant = a.constant;
  p.A_eq = a.eq.matrix(N);
  p.b_eq = a.eq.rhs();
  p.C_ineq = a.ineq.matrix(N);
  p.d_ineq = a.ineq.rhs();
  return p;
}

void check_common(int n, int m, const CostSpec& cost,
                  const PolytopicConstraints& cons, const VectorXd& x0) {
  cost.validate(n, m);
  cons.validate(n, m);
  if (x0.size() != n) {
    throw DimensionError("initial state has length " + std::to_string(x0.size()) +
                         ", expected " + std::to_string(n));
  }
}

void require_time_invariant(const AffineLTVSystem& sys) {
  if (!sys.is_time_invariant()) {
    throw std::invalid_argument("MPC builders require a time-invariant system");
  }
}

}  // namespace

const char* to_string(PNorm p) {
  switch (p) {
    case PNorm::kOne: return "1";
    case PNorm::kTwo: return "2";
    case PNorm::kInf: return "inf";
  }
  return "?";
}

PNorm parse_pnorm(const std::string& s) {
  if (s == "1") return PNorm::kOne;
  if (s == "2") return PNorm::kTwo;
  if (s == "inf" || s == "infinity") return PNorm::kInf;
  throw std::invalid_argument("p-norm must be one of 1, 2, inf (got '" + s + "')");
}

const char* to_string(Formulation f) {
  switch (f) {
    case Formulation::kTraditional: return "traditional";
    case Formulation::kSls: return "sls";
    case Formulation::kDdSls: return "dd-sls";
  }
  return "?";
}

Formulation parse_formulation(const std::string& s) {
  if (s == "traditional") return Formulation::kTraditional;
  if (s == "sls") return Formulation::kSls;
  if (s == "dd-sls") return Formulation::kDdSls;
  throw std::invalid_argument("controller must be one of traditional, sls, "
                              "dd-sls (got '" + s + "')");
}

VectorXd CostSpec::reference(int n) const {
  return x_ref ? *x_ref : VectorXd::Zero(n);
}

void CostSpec::validate(int n, int m) const {
  if (Q.rows() != n || Q.cols() != n) throw DimensionError("CostSpec: Q must be n x n");
  if (P.rows() != n || P.cols() != n) throw DimensionError("CostSpec: P must be n x n");
  if (R.rows() != m || R.cols() != m) throw DimensionError("CostSpec: R must be m x m");
  if (x_ref && x_ref->size() != n) throw DimensionError("CostSpec: x_ref must have length n");
  if (!(u_reg >= 0.0) || !std::isfinite(u_reg)) {
    throw std::invalid_argument("CostSpec: u_reg must be a nonnegative number");
  }
  if (p_norm == PNorm::kTwo) {
    require_symmetric(Q, "Q");
    require_symmetric(R, "R");
    require_symmetric(P, "P");
    if (min_eigenvalue(Q) < -1e-12) throw std::invalid_argument("CostSpec: Q must be PSD");
    if (min_eigenvalue(P) < -1e-12) throw std::invalid_argument("CostSpec: P must be PSD");
    const double r_min = min_eigenvalue(R);
    if (u_reg > 0.0 ? r_min < -1e-12 : r_min <= 0.0) {
      throw std::invalid_argument(
          "CostSpec: R must be positive definite (or PSD with u_reg > 0)");
    }
  } else {
    if (!full_rank(Q) || !full_rank(R) || !full_rank(P)) {
      throw std::invalid_argument(
          "CostSpec: Q, R and P must be full rank for the 1- and inf-norm costs");
    }
  }
}

PolytopicConstraints PolytopicConstraints::None(int n, int m) {
  return {MatrixXd(0, n), MatrixXd(0, m), VectorXd(0), std::nullopt};
}

PolytopicConstraints PolytopicConstraints::Box(const VectorXd& x_min,
                                               const VectorXd& x_max,
                                               const VectorXd& u_min,
                                               const VectorXd& u_max) {
  const Index n = x_min.size(), m = u_min.size();
  if (x_max.size() != n || u_max.size() != m) {
    throw DimensionError("PolytopicConstraints::Box: bound lengths differ");
  }
  std::vector<std::pair<Index, double>> rows;  // signed variable index, bound
  PolytopicConstraints c;
  std::vector<VectorXd> hx, hu;
  std::vector<double> h;
  auto push = [&](bool state, Index i, double sign, double bound) {
    if (!std::isfinite(bound)) return;
    VectorXd rx = VectorXd::Zero(n), ru = VectorXd::Zero(m);
    (state ? rx : ru)(i) = sign;
    hx.push_back(rx);
    hu.push_back(ru);
    h.push_back(sign * bound);
  };
  for (Index i = 0; i < n; ++i) {
    push(true, i, 1.0, x_max(i));
    push(true, i, -1.0, x_min(i));
  }
  for (Index i = 0; i < m; ++i) {
    push(false, i, 1.0, u_max(i));
    push(false, i, -1.0, u_min(i));
  }
  const Index d = static_cast<Index>(h.size());
  c.H_x.resize(d, n);
  c.H_u.resize(d, m);
  c.h.resize(d);
  for (Index k = 0; k < d; ++k) {
    c.H_x.row(k) = hx[k].transpose();
    c.H_u.row(k) = hu[k].transpose();
    c.h(k) = h[k];
  }
  return c;
}

void PolytopicConstraints::validate(int n, int m) const {
  const Index d = h.size();
  if (H_x.rows() != d || H_u.rows() != d || H_x.cols() != n || H_u.cols() != m) {
    throw DimensionError("PolytopicConstraints: H_x must be d x n, H_u d x m, h of length d");
  }
  if (terminal && (terminal->H.cols() != n || terminal->H.rows() != terminal->h.size())) {
    throw DimensionError("PolytopicConstraints: terminal set shape mismatch");
  }
}

double cost_eval(const VectorXd& x_traj, const VectorXd& u_traj,
                 const CostSpec& cost, int n, int m) {
  if (n < 1 || m < 1 || x_traj.size() % n != 0 ||
      u_traj.size() * n != x_traj.size() * m || x_traj.size() < 2 * n) {
    throw DimensionError("cost_eval: trajectories must hold T+1 samples each");
  }
  cost.validate(n, m);
  const int T = static_cast<int>(x_traj.size() / n) - 1;
  const VectorXd r = cost.reference(n);
  auto norm = [&](const VectorXd& v) {
    switch (cost.p_norm) {
      case PNorm::kOne: return v.lpNorm<1>();
      case PNorm::kInf: return v.lpNorm<Eigen::Infinity>();
      case PNorm::kTwo: return 0.0;
    }
    return 0.0;
  };
  double J = 0.0;
  for (int t = 0; t <= T; ++t) {
    const VectorXd e = x_traj.segment(t * n, n) - r;
    const VectorXd u = u_traj.segment(t * m, m);
    const MatrixXd& W = t < T ? cost.Q : cost.P;
    if (cost.p_norm == PNorm::kTwo) {
      J += e.dot(W * e);
      if (t < T) J += u.dot(cost.R * u);
    } else {
      J += norm(W * e);
      if (t < T) J += norm(cost.R * u);
    }
    J += cost.u_reg * u.squaredNorm();
  }
  return J;
}

OcpProgram build_traditional(const AffineLTVSystem& sys, const CostSpec& cost,
                             const PolytopicConstraints& cons,
                             const VectorXd& x0) {
  require_time_invariant(sys);
  const int n = sys.state_dim(), m = sys.input_dim(), T = sys.horizon();
  check_common(n, m, cost, cons, x0);
  Assembly a = start_assembly(n, m, T, 0, cost);

  for (int i = 0; i < n; ++i) a.eq.add(a.eq.add_row(x0(i)), a.x(0, i), 1.0);
  const MatrixXd& A = sys.A(0);
  const MatrixXd& B = sys.B(0);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < n; ++i) {
      const Index row = a.eq.add_row(sys.s()(i));
      a.eq.add(row, a.x(t + 1, i), 1.0);
      for (int j = 0; j < n; ++j) a.eq.add(row, a.x(t, j), -A(i, j));
      for (int j = 0; j < m; ++j) a.eq.add(row, a.u(t, j), -B(i, j));
    }
  }
  add_constraints(a, cons);
  add_cost(a, cost);

  OcpProgram out;
  out.formulation = Formulation::kTraditional;
  out.program = finish(a);
  out.layout = a.layout;
  out.cost = cost;
  out.x0 = x0;
  return out;
}

OcpProgram build_sls(const AffineLTVSystem& sys, const CostSpec& cost,
                     const PolytopicConstraints& cons, const VectorXd& x0) {
  require_time_invariant(sys);
  const int n = sys.state_dim(), m = sys.input_dim(), T = sys.horizon();
  check_common(n, m, cost, cons, x0);
  const LiftedDynamics L = lift_system(sys);
  const Index Nx = L.state_rows(), Nu = L.input_rows(), cols = n + 1;
  Assembly a = start_assembly(n, m, T, (Nx + Nu) * cols, cost);
  const Index phx = a.layout.aux_offset;
  const Index phu = phx + Nx * cols;
  auto phi_x = [&](Index i, Index j) { return phx + j * Nx + i; };
  auto phi_u = [&](Index i, Index j) { return phu + j * Nu + i; };

  // [I - Z calA, -Z calB] [Phi_x_bar; Phi_u_bar] = [[I_n, 0], [0, s]]
  const MatrixXd IZA = MatrixXd::Identity(Nx, Nx) - L.Z * L.calA;
  const MatrixXd ZB = L.Z * L.calB;
  const VectorXd Zs = L.Z * L.s_stack;
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < Nx; ++i) {
      double rhs = 0.0;
      if (j < n) rhs = (i == j) ? 1.0 : 0.0;
      else rhs = Zs(i);
      const Index row = a.eq.add_row(rhs);
      for (Index k = 0; k < Nx; ++k) a.eq.add(row, phi_x(k, j), IZA(i, k));
      for (Index k = 0; k < Nu; ++k) a.eq.add(row, phi_u(k, j), -ZB(i, k));
    }
  }
  // (x, u) = Phi_bar [x0; 1]
  VectorXd v(cols);
  v << x0, 1.0;
  for (Index i = 0; i < Nx; ++i) {
    const Index row = a.eq.add_row(0.0);
    a.eq.add(row, a.layout.x_offset + i, 1.0);
    for (Index j = 0; j < cols; ++j) a.eq.add(row, phi_x(i, j), -v(j));
  }
  for (Index i = 0; i < Nu; ++i) {
    const Index row = a.eq.add_row(0.0);
    a.eq.add(row, a.layout.u_offset + i, 1.0);
    for (Index j = 0; j < cols; ++j) a.eq.add(row, phi_u(i, j), -v(j));
  }
  add_constraints(a, cons);
  add_cost(a, cost);

  OcpProgram out;
  out.formulation = Formulation::kSls;
  out.program = finish(a);
  out.layout = a.layout;
  out.cost = cost;
  out.x0 = x0;
  out.lifted = L;
  return out;
}

OcpProgram build_dd_sls(const HankelPair& hank, const CostSpec& cost,
                        const PolytopicConstraints& cons, const VectorXd& x0) {
  const int n = hank.n, m = hank.m, T = hank.T;
  if (!hank.input_pe) {
    throw PersistencyError(
        "data-driven program: recorded input is not persistently exciting of "
        "order " + std::to_string(hank.required_pe_order) +
        " (n + (T+1) + 1 with n=" + std::to_string(n) +
        ", T=" + std::to_string(T) + ")");
  }
  check_common(n, m, cost, cons, x0);
  const Index K = hank.columns();
  Assembly a = start_assembly(n, m, T, K * n + K, cost);
  a.layout.data_columns = K;
  const Index g_off = a.layout.aux_offset;
  const Index gh_off = g_off + K * n;
  auto G = [&](Index k, Index j) { return g_off + j * K + k; };
  auto gh = [&](Index k) { return gh_off + k; };

  // [x; u] = [Hx; Hu] (G x0 + c g_hat), c = 1 - 1'x0
  const double c = 1.0 - x0.sum();
  auto link = [&](const MatrixXd& H, Index offset) {
    for (Index i = 0; i < H.rows(); ++i) {
      const Index row = a.eq.add_row(0.0);
      a.eq.add(row, offset + i, 1.0);
      for (Index k = 0; k < K; ++k) {
        for (int j = 0; j < n; ++j) a.eq.add(row, G(k, j), -H(i, k) * x0(j));
        a.eq.add(row, gh(k), -H(i, k) * c);
      }
    }
  };
  link(hank.Hx, a.layout.x_offset);
  link(hank.Hu, a.layout.u_offset);

  // H1 G = I, 1'G = 1', H1 g_hat = 0, 1'g_hat = 1
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Index row = a.eq.add_row(i == j ? 1.0 : 0.0);
      for (Index k = 0; k < K; ++k) a.eq.add(row, G(k, j), hank.H1(i, k));
    }
    const Index row = a.eq.add_row(1.0);
    for (Index k = 0; k < K; ++k) a.eq.add(row, G(k, j), 1.0);
  }
  for (int i = 0; i < n; ++i) {
    const Index row = a.eq.add_row(0.0);
    for (Index k = 0; k < K; ++k) a.eq.add(row, gh(k), hank.H1(i, k));
  }
  {
    const Index row = a.eq.add_row(1.0);
    for (Index k = 0; k < K; ++k) a.eq.add(row, gh(k), 1.0);
  }
  add_constraints(a, cons);
  add_cost(a, cost);

  OcpProgram out;
  out.formulation = Formulation::kDdSls;
  out.program = finish(a);
  out.layout = a.layout;
  out.cost = cost;
  out.x0 = x0;
  out.H1 = hank.H1;
  return out;
}

OCPSolutionBundle extract_bundle(const OcpProgram& prog, const Solution& sol) {
  if (sol.status != SolveStatus::kOptimal) {
    throw NonOptimalSolve(sol.status, sol.diagnostics);
  }
  const ProgramLayout& l = prog.layout;
  const Index Nx = static_cast<Index>(l.n) * (l.T + 1);
  const Index Nu = static_cast<Index>(l.m) * (l.T + 1);
  if (sol.primal.size() != prog.program.num_vars) {
    throw DimensionError("extract_bundle: solution does not match the program");
  }
  OCPSolutionBundle b;
  b.formulation = prog.formulation;
  b.x_traj = sol.primal.segment(l.x_offset, Nx);
  b.u_traj = sol.primal.segment(l.u_offset, Nu);
  b.objective = cost_eval(b.x_traj, b.u_traj, prog.cost, l.n, l.m);
  const double reported = prog.program.objective(sol.primal);
  if (std::abs(reported - b.objective) > 1e-6 * std::max(1.0, std::abs(b.objective))) {
    throw std::runtime_error("extract_bundle: program objective " +
                             std::to_string(reported) +
                             " disagrees with the evaluated cost " +
                             std::to_string(b.objective));
  }

  const Index cols = l.n + 1;
  if (prog.formulation == Formulation::kSls) {
    ReducedResponse red;
    red.Phi_x_bar = Eigen::Map<const MatrixXd>(
        sol.primal.data() + l.aux_offset, Nx, cols);
    red.Phi_u_bar = Eigen::Map<const MatrixXd>(
        sol.primal.data() + l.aux_offset + Nx * cols, Nu, cols);
    b.subspace_residual = validate_reduced(red, *prog.lifted);
    b.reduced = std::move(red);
  } else if (prog.formulation == Formulation::kDdSls) {
    const Index K = l.data_columns;
    AffineRepresenter rep;
    rep.G = Eigen::Map<const MatrixXd>(sol.primal.data() + l.aux_offset, K, l.n);
    rep.g_hat = sol.primal.segment(l.aux_offset + K * l.n, K);
    b.membership = representer_membership(rep, *prog.H1);
    b.representer = std::move(rep);
  }
  return b;
}

}  // namespace affsls
