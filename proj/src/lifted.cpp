#include "affsls/lifted.hpp"

#include <string>

namespace affsls {

AffineLTVSystem::AffineLTVSystem(std::vector<MatrixXd> A,
                                 std::vector<MatrixXd> B, VectorXd s)
    : A_(std::move(A)), B_(std::move(B)), s_(std::move(s)) {
  if (A_.empty()) {
    throw DimensionError("AffineLTVSystem: horizon must be at least 1");
  }
  if (A_.size() != B_.size()) {
    throw DimensionError("AffineLTVSystem: got " + std::to_string(A_.size()) +
                         " A matrices but " + std::to_string(B_.size()) +
                         " B matrices");
  }
  T_ = static_cast<int>(A_.size());
  n_ = static_cast<int>(A_[0].rows());
  m_ = static_cast<int>(B_[0].cols());
  if (n_ < 1) throw DimensionError("AffineLTVSystem: state dimension must be >= 1");
  if (m_ < 1) throw DimensionError("AffineLTVSystem: input dimension must be >= 1");
  for (int t = 0; t < T_; ++t) {
    if (A_[t].rows() != n_ || A_[t].cols() != n_) {
      throw DimensionError("AffineLTVSystem: A(" + std::to_string(t) +
                           ") is not " + std::to_string(n_) + "x" +
                           std::to_string(n_));
    }
    if (B_[t].rows() != n_ || B_[t].cols() != m_) {
      throw DimensionError("AffineLTVSystem: B(" + std::to_string(t) +
                           ") is not " + std::to_string(n_) + "x" +
                           std::to_string(m_));
    }
  }
  if (s_.size() != n_) {
    throw DimensionError("AffineLTVSystem: offset s has length " +
                         std::to_string(s_.size()) + ", expected " +
                         std::to_string(n_));
  }
}

AffineLTVSystem AffineLTVSystem::TimeInvariant(const MatrixXd& A,
                                               const MatrixXd& B,
                                               const VectorXd& s,
                                               int horizon) {
  if (horizon < 1) {
    throw DimensionError("AffineLTVSystem: horizon must be at least 1");
  }
  return AffineLTVSystem(std::vector<MatrixXd>(horizon, A),
                         std::vector<MatrixXd>(horizon, B), s);
}

bool AffineLTVSystem::is_time_invariant() const {
  for (int t = 1; t < T_; ++t) {
    if (A_[t] != A_[0] || B_[t] != B_[0]) return false;
  }
  return true;
}

AffineLTVSystem AffineLTVSystem::with_horizon(int horizon) const {
  if (!is_time_invariant()) {
    throw std::logic_error("with_horizon: system is time-varying");
  }
  return TimeInvariant(A_[0], B_[0], s_, horizon);
}

MatrixXd block_downshift(int n, int T) {
  if (n < 1 || T < 1) {
    throw DimensionError("block_downshift: n and T must be >= 1");
  }
  const Index N = static_cast<Index>(n) * (T + 1);
  MatrixXd Z = MatrixXd::Zero(N, N);
  for (int k = 0; k < T; ++k) {
    Z.block((k + 1) * n, k * n, n, n).setIdentity();
  }
  return Z;
}

LiftedDynamics lift_system(const AffineLTVSystem& sys) {
  LiftedDynamics L;
  L.n = sys.state_dim();
  L.m = sys.input_dim();
  L.T = sys.horizon();
  const int n = L.n, m = L.m, T = L.T;
  L.calA = MatrixXd::Zero(L.state_rows(), L.state_rows());
  L.calB = MatrixXd::Zero(L.state_rows(), L.input_rows());
  L.s_stack = VectorXd::Zero(L.state_rows());
  for (int t = 0; t < T; ++t) {
    L.calA.block(t * n, t * n, n, n) = sys.A(t);
    L.calB.block(t * n, t * m, n, m) = sys.B(t);
    L.s_stack.segment(t * n, n) = sys.s();
  }
  L.Z = block_downshift(n, T);
  return L;
}

bool is_causal(const MatrixXd& op, int p, int q, int T,
               bool strict_identity_diag) {
  if (p < 1 || q < 1 || T < 0) {
    throw DimensionError("is_causal: block sizes must be positive");
  }
  if (op.rows() != static_cast<Index>(p) * (T + 1) ||
      op.cols() != static_cast<Index>(q) * (T + 1)) {
    throw DimensionError("is_causal: shape " + std::to_string(op.rows()) +
                         "x" + std::to_string(op.cols()) +
                         " does not partition into " + std::to_string(T + 1) +
                         " blocks of " + std::to_string(p) + "x" +
                         std::to_string(q));
  }
  if (strict_identity_diag && p != q) {
    throw DimensionError("is_causal: identity diagonal requires square blocks");
  }
  for (int i = 0; i <= T; ++i) {
    for (int j = i + 1; j <= T; ++j) {
      if (op.block(i * p, j * q, p, q).cwiseAbs().maxCoeff() > kStructuralTol) {
        return false;
      }
    }
    if (strict_identity_diag) {
      const MatrixXd d = op.block(i * p, i * q, p, q) - MatrixXd::Identity(p, q);
      if (d.cwiseAbs().maxCoeff() > kStructuralTol) return false;
    }
  }
  return true;
}

VectorXd stack(const std::vector<VectorXd>& parts) {
  Index total = 0;
  for (const auto& p : parts) total += p.size();
  VectorXd out(total);
  Index at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

std::vector<VectorXd> unstack(const VectorXd& v, int block) {
  if (block < 1 || v.size() % block != 0) {
    throw DimensionError("unstack: length " + std::to_string(v.size()) +
                         " is not a multiple of " + std::to_string(block));
  }
  std::vector<VectorXd> out;
  for (Index i = 0; i < v.size(); i += block) out.push_back(v.segment(i, block));
  return out;
}

MatrixXd controllability_matrix(const MatrixXd& A, const MatrixXd& B) {
  const Index n = A.rows();
  MatrixXd C(n, n * B.cols());
  MatrixXd blk = B;
  for (Index k = 0; k < n; ++k) {
    C.middleCols(k * B.cols(), B.cols()) = blk;
    blk = A * blk;
  }
  return C;
}

bool is_controllable(const MatrixXd& A, const MatrixXd& B, double tol) {
  const MatrixXd C = controllability_matrix(A, B);
  Eigen::JacobiSVD<MatrixXd> svd(C);
  const VectorXd& sv = svd.singularValues();
  if (sv.size() < A.rows() || sv(0) == 0.0) return false;
  return sv(A.rows() - 1) > tol * sv(0);
}

}  // namespace affsls
