#pragma once

// Finite-horizon block lifting of time-varying affine dynamics
//
//   x(t+1) = A(t) x(t) + B(t) u(t) + s + w(t),   t = 0, ..., T-1.
//
// Signals over the horizon are stacked as x = [x_0; x_1; ...; x_T] (length
// n(T+1)) and u = [u_0; ...; u_T] (length m(T+1)). Block (i, j) of a lifted
// operator with p x q blocks occupies rows [i*p, (i+1)*p) and columns
// [j*q, (j+1)*q). This convention is used everywhere in the library.

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace affsls {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class AffineLTVSystem {
 public:
  AffineLTVSystem(std::vector<MatrixXd> A, std::vector<MatrixXd> B, VectorXd s);

  static AffineLTVSystem TimeInvariant(const MatrixXd& A, const MatrixXd& B,
                                       const VectorXd& s, int horizon);

  int state_dim() const { return n_; }
  int input_dim() const { return m_; }
  int horizon() const { return T_; }

  const MatrixXd& A(int t) const { return A_.at(t); }
  const MatrixXd& B(int t) const { return B_.at(t); }
  const VectorXd& s() const { return s_; }

  bool is_time_invariant() const;

  // Same dynamics, different horizon. Only defined for time-invariant systems.
  AffineLTVSystem with_horizon(int horizon) const;

 private:
  std::vector<MatrixXd> A_;
  std::vector<MatrixXd> B_;
  VectorXd s_;
  int n_ = 0;
  int m_ = 0;
  int T_ = 0;
};

struct LiftedDynamics {
  int n = 0;
  int m = 0;
  int T = 0;
  MatrixXd calA;     // n(T+1) x n(T+1), diag(A(0), ..., A(T-1), 0)
  MatrixXd calB;     // n(T+1) x m(T+1), diag(B(0), ..., B(T-1), 0)
  MatrixXd Z;        // n(T+1) x n(T+1) block-downshift
  VectorXd s_stack;  // [s; ...; s; 0]

  Index state_rows() const { return static_cast<Index>(n) * (T + 1); }
  Index input_rows() const { return static_cast<Index>(m) * (T + 1); }
};

LiftedDynamics lift_system(const AffineLTVSystem& sys);

// Identity blocks on the first block sub-diagonal. Nilpotent of index T+1.
MatrixXd block_downshift(int n, int T);

// True iff every block strictly above the block diagonal is zero (abs tol
// 1e-12). With strict_identity_diag (p == q) each diagonal block must also
// equal the identity.
bool is_causal(const MatrixXd& op, int p, int q, int T,
               bool strict_identity_diag = false);

inline constexpr double kStructuralTol = 1e-12;

// Stacks a sequence of equally sized vectors.
VectorXd stack(const std::vector<VectorXd>& parts);

// Splits a stacked signal into consecutive blocks of length `block`.
std::vector<VectorXd> unstack(const VectorXd& v, int block);

// Controllability matrix [B, AB, ..., A^{n-1}B].
MatrixXd controllability_matrix(const MatrixXd& A, const MatrixXd& B);

// Rank test on the controllability matrix, relative singular value tolerance.
bool is_controllable(const MatrixXd& A, const MatrixXd& B, double tol = 1e-9);

// Induced infinity norm (max absolute row sum); for a vector, max |v_i|.
template <typename Derived>
double inf_norm(const Eigen::MatrixBase<Derived>& M) {
  if (M.size() == 0) return 0.0;
  return M.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace affsls
