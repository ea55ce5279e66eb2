#include "affsls/sls.hpp"

#include <iomanip>
#include <limits>
#include <sstream>

namespace affsls {
namespace {

void check_controller_shape(const AffineCausalController& ctrl,
                            const LiftedDynamics& L) {
  if (ctrl.K.rows() != L.input_rows() || ctrl.K.cols() != L.state_rows()) {
    throw DimensionError("controller: K must be " +
                         std::to_string(L.input_rows()) + "x" +
                         std::to_string(L.state_rows()));
  }
  if (ctrl.u_s.size() != L.input_rows()) {
    throw DimensionError("controller: u_s must have length " +
                         std::to_string(L.input_rows()));
  }
  if (!is_causal(ctrl.K, L.m, L.n, L.T)) {
    throw std::invalid_argument("controller: K is not block lower triangular");
  }
  if (!ctrl.u_s.allFinite()) {
    throw std::invalid_argument("controller: u_s has non-finite entries");
  }
}

void check_response_shape(const SystemResponse& r, const LiftedDynamics& L) {
  const Index N = L.state_rows(), M = L.input_rows();
  if (r.Phi_x.rows() != N || r.Phi_x.cols() != N || r.Phi_u.rows() != M ||
      r.Phi_u.cols() != N || r.phi_x.size() != N || r.phi_u.size() != M) {
    throw DimensionError("system response: block shapes do not match n=" +
                         std::to_string(L.n) + ", m=" + std::to_string(L.m) +
                         ", T=" + std::to_string(L.T));
  }
}

MatrixXd open_loop_operator(const LiftedDynamics& L) {
  return MatrixXd::Identity(L.state_rows(), L.state_rows()) - L.Z * L.calA;
}

void write_block(std::ostream& os, const char* name, const MatrixXd& M) {
  os << name << ' ' << M.rows() << ' ' << M.cols() << '\n';
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (j) os << ' ';
      os << M(i, j);
    }
    os << '\n';
  }
}

MatrixXd read_block(std::istream& is, const std::string& expected) {
  std::string name;
  Index rows = 0, cols = 0;
  if (!(is >> name >> rows >> cols) || name != expected || rows < 0 ||
      cols < 0) {
    throw std::runtime_error("deserialize_response: expected block '" +
                             expected + "'");
  }
  MatrixXd M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      if (!(is >> M(i, j))) {
        throw std::runtime_error("deserialize_response: truncated block '" +
                                 expected + "'");
      }
    }
  }
  return M;
}

}  // namespace

MatrixXd invert_unit_lower_block(const MatrixXd& M, int block) {
  if (M.rows() != M.cols() || block < 1 || M.rows() % block != 0) {
    throw DimensionError("invert_unit_lower_block: bad shape");
  }
  const Index nb = M.rows() / block;
  const int T = static_cast<int>(nb) - 1;
  if (!is_causal(M, block, block, T, true)) {
    throw std::invalid_argument(
        "invert_unit_lower_block: matrix is not block unit lower triangular");
  }
  MatrixXd X = MatrixXd::Zero(M.rows(), M.cols());
  for (Index j = 0; j < nb; ++j) {
    X.block(j * block, j * block, block, block).setIdentity();
    for (Index i = j + 1; i < nb; ++i) {
      auto Xij = X.block(i * block, j * block, block, block);
      for (Index k = j; k < i; ++k) {
        Xij.noalias() -= M.block(i * block, k * block, block, block) *
                         X.block(k * block, j * block, block, block);
      }
    }
  }
  return X;
}

SystemResponse responses_from_controller(const AffineCausalController& ctrl,
                                         const LiftedDynamics& L) {
  check_controller_shape(ctrl, L);
  const MatrixXd M = open_loop_operator(L) - L.Z * L.calB * ctrl.K;

  SystemResponse r;
  r.Phi_x = invert_unit_lower_block(M, L.n);
  r.Phi_u = ctrl.K * r.Phi_x;
  const VectorXd drive = L.Z * (L.calB * ctrl.u_s + L.s_stack);
  r.phi_x = r.Phi_x * drive;
  r.phi_u = r.Phi_u * drive + ctrl.u_s;

  const double residual = validate_subspace(r, L);
  const double scale = std::max(1.0, inf_norm(r.Phi_x));
  if (!(residual <= kResponseTol * scale)) {
    throw InvalidResponse(
        "responses_from_controller: numerical failure, subspace residual " +
            std::to_string(residual),
        residual);
  }
  return r;
}

double validate_subspace(const SystemResponse& r, const LiftedDynamics& L) {
  check_response_shape(r, L);
  const Index N = L.state_rows();
  const MatrixXd IZA = open_loop_operator(L);
  const MatrixXd ZB = L.Z * L.calB;
  MatrixXd residual(N, N + 1);
  residual.leftCols(N) =
      IZA * r.Phi_x - ZB * r.Phi_u - MatrixXd::Identity(N, N);
  residual.col(N) = IZA * r.phi_x - ZB * r.phi_u - L.Z * L.s_stack;
  return inf_norm(residual);
}

AffineCausalController controller_from_responses(const SystemResponse& r,
                                                  const LiftedDynamics& L,
                                                  double gate_tol) {
  const double residual = validate_subspace(r, L);
  if (!(residual <= gate_tol)) {
    throw InvalidResponse(
        "controller_from_responses: response violates the subspace equation "
        "(residual " + std::to_string(residual) + ")",
        residual);
  }
  if (!is_causal(r.Phi_x, L.n, L.n, L.T, true) ||
      !is_causal(r.Phi_u, L.m, L.n, L.T)) {
    throw InvalidResponse("controller_from_responses: response is not causal",
                          residual);
  }
  AffineCausalController c;
  // K Phi_x = Phi_u with Phi_x unit lower triangular entrywise.
  c.K = r.Phi_x.triangularView<Eigen::UnitLower>()
            .solve<Eigen::OnTheRight>(r.Phi_u);
  c.u_s = r.phi_u - c.K * r.phi_x;
  return c;
}

std::pair<VectorXd, VectorXd> closed_loop_rollout(const SystemResponse& r,
                                                  const VectorXd& w) {
  if (w.size() != r.Phi_x.cols()) {
    throw DimensionError("closed_loop_rollout: w has length " +
                         std::to_string(w.size()) + ", expected " +
                         std::to_string(r.Phi_x.cols()));
  }
  return {r.Phi_x * w + r.phi_x, r.Phi_u * w + r.phi_u};
}

std::pair<VectorXd, VectorXd> direct_rollout(
    const AffineLTVSystem& sys, const AffineCausalController& ctrl,
    const VectorXd& x0, const std::vector<VectorXd>& w_seq) {
  const int n = sys.state_dim(), m = sys.input_dim(), T = sys.horizon();
  if (x0.size() != n) throw DimensionError("direct_rollout: x0 has wrong length");
  if (static_cast<int>(w_seq.size()) != T) {
    throw DimensionError("direct_rollout: expected " + std::to_string(T) +
                         " disturbance samples");
  }
  if (ctrl.K.rows() != m * (T + 1) || ctrl.K.cols() != n * (T + 1) ||
      ctrl.u_s.size() != m * (T + 1)) {
    throw DimensionError("direct_rollout: controller shape mismatch");
  }
  VectorXd x = VectorXd::Zero(n * (T + 1));
  VectorXd u = VectorXd::Zero(m * (T + 1));
  x.head(n) = x0;
  for (int t = 0; t <= T; ++t) {
    VectorXd ut = ctrl.u_s.segment(t * m, m);
    for (int tau = 0; tau <= t; ++tau) {
      ut += ctrl.K.block(t * m, tau * n, m, n) * x.segment(tau * n, n);
    }
    u.segment(t * m, m) = ut;
    if (t < T) {
      if (w_seq[t].size() != n) {
        throw DimensionError("direct_rollout: w(" + std::to_string(t) +
                             ") has wrong length");
      }
      x.segment((t + 1) * n, n) = sys.A(t) * x.segment(t * n, n) +
                                  sys.B(t) * ut + sys.s() + w_seq[t];
    }
  }
  return {x, u};
}

ReducedResponse reduce_noiseless(const SystemResponse& r,
                                 const LiftedDynamics& L, double gate_tol) {
  const double residual = validate_subspace(r, L);
  if (!(residual <= gate_tol)) {
    throw InvalidResponse("reduce_noiseless: invalid response (residual " +
                              std::to_string(residual) + ")",
                          residual);
  }
  ReducedResponse red;
  red.Phi_x_bar.resize(L.state_rows(), L.n + 1);
  red.Phi_x_bar << r.Phi_x.leftCols(L.n), r.phi_x;
  red.Phi_u_bar.resize(L.input_rows(), L.n + 1);
  red.Phi_u_bar << r.Phi_u.leftCols(L.n), r.phi_u;
  return red;
}

double validate_reduced(const ReducedResponse& red, const LiftedDynamics& L) {
  const Index N = L.state_rows();
  if (red.Phi_x_bar.rows() != N || red.Phi_x_bar.cols() != L.n + 1 ||
      red.Phi_u_bar.rows() != L.input_rows() ||
      red.Phi_u_bar.cols() != L.n + 1) {
    throw DimensionError("validate_reduced: reduced response shape mismatch");
  }
  MatrixXd rhs = MatrixXd::Zero(N, L.n + 1);
  rhs.topLeftCorner(L.n, L.n).setIdentity();
  rhs.col(L.n) = L.Z * L.s_stack;
  const MatrixXd residual = open_loop_operator(L) * red.Phi_x_bar -
                            L.Z * L.calB * red.Phi_u_bar - rhs;
  return inf_norm(residual);
}

std::pair<VectorXd, VectorXd> reduced_rollout(const ReducedResponse& red,
                                              const VectorXd& x0) {
  if (x0.size() + 1 != red.Phi_x_bar.cols()) {
    throw DimensionError("reduced_rollout: x0 has wrong length");
  }
  VectorXd v(x0.size() + 1);
  v << x0, 1.0;
  return {red.Phi_x_bar * v, red.Phi_u_bar * v};
}

SystemResponse embed_reduced(const ReducedResponse& red,
                             const LiftedDynamics& L) {
  if (red.Phi_x_bar.rows() != L.state_rows() ||
      red.Phi_x_bar.cols() != L.n + 1 ||
      red.Phi_u_bar.rows() != L.input_rows() ||
      red.Phi_u_bar.cols() != L.n + 1) {
    throw DimensionError("embed_reduced: reduced response shape mismatch");
  }
  SystemResponse r;
  r.Phi_x = invert_unit_lower_block(open_loop_operator(L), L.n);
  r.Phi_x.leftCols(L.n) = red.Phi_x_bar.leftCols(L.n);
  r.Phi_u = MatrixXd::Zero(L.input_rows(), L.state_rows());
  r.Phi_u.leftCols(L.n) = red.Phi_u_bar.leftCols(L.n);
  r.phi_x = red.Phi_x_bar.col(L.n);
  r.phi_u = red.Phi_u_bar.col(L.n);
  return r;
}

std::string serialize_response(const SystemResponse& r) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "affsls-system-response 1\n";
  write_block(os, "Phi_x", r.Phi_x);
  write_block(os, "phi_x", r.phi_x);
  write_block(os, "Phi_u", r.Phi_u);
  write_block(os, "phi_u", r.phi_u);
  return os.str();
}

SystemResponse deserialize_response(const std::string& text) {
  std::istringstream is(text);
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "affsls-system-response" ||
      version != 1) {
    throw std::runtime_error("deserialize_response: unrecognized header");
  }
  SystemResponse r;
  r.Phi_x = read_block(is, "Phi_x");
  const MatrixXd phi_x = read_block(is, "phi_x");
  r.Phi_u = read_block(is, "Phi_u");
  const MatrixXd phi_u = read_block(is, "phi_u");
  if (phi_x.cols() != 1 || phi_u.cols() != 1 ||
      phi_x.rows() != r.Phi_x.rows() || phi_u.rows() != r.Phi_u.rows() ||
      r.Phi_u.cols() != r.Phi_x.cols()) {
    throw std::runtime_error("deserialize_response: inconsistent block shapes");
  }
  r.phi_x = phi_x.col(0);
  r.phi_u = phi_u.col(0);
  return r;
}

}  // namespace affsls
