#pragma once

// Affine system level parameterization.
//
// Under the causal affine policy u = K x + u_s the lifted closed loop is
//
//   [x; u] = [Phi_x  phi_x; Phi_u  phi_u] [w; 1]
//
// with w = [x(0); w(0); ...; w(T-1)]. Every such response satisfies
//
//   [I - Z calA, -Z calB] [Phi_x phi_x; Phi_u phi_u] = [I, Z s_stack]
//
// and conversely any solution of that affine equation is realized by
// K = Phi_u Phi_x^{-1}, u_s = phi_u - K phi_x.

#include <string>
#include <utility>
#include <vector>

#include "affsls/lifted.hpp"

namespace affsls {

struct AffineCausalController {
  MatrixXd K;    // m(T+1) x n(T+1), block lower triangular
  VectorXd u_s;  // m(T+1)
};

struct SystemResponse {
  MatrixXd Phi_x;  // n(T+1) x n(T+1), causal with identity diagonal blocks
  MatrixXd Phi_u;  // m(T+1) x n(T+1), causal
  VectorXd phi_x;  // n(T+1)
  VectorXd phi_u;  // m(T+1)
};

// Noiseless reduction: the first n columns of the response next to the
// affine column.
struct ReducedResponse {
  MatrixXd Phi_x_bar;  // n(T+1) x (n+1)
  MatrixXd Phi_u_bar;  // m(T+1) x (n+1)
};

class InvalidResponse : public std::runtime_error {
 public:
  InvalidResponse(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// Construction accuracy for responses produced by the library.
inline constexpr double kResponseTol = 1e-10;
// Gate applied to user-supplied responses before controller recovery.
inline constexpr double kResponseGateTol = 1e-8;

// Inverse of a block lower-triangular matrix whose diagonal blocks are the
// identity, by forward block substitution.
MatrixXd invert_unit_lower_block(const MatrixXd& M, int block);

SystemResponse responses_from_controller(const AffineCausalController& ctrl,
                                         const LiftedDynamics& lifted);

double validate_subspace(const SystemResponse& resp,
                         const LiftedDynamics& lifted);

// Throws InvalidResponse when the response violates the subspace equation
// (residual > gate_tol) or is not causal.
AffineCausalController controller_from_responses(
    const SystemResponse& resp, const LiftedDynamics& lifted,
    double gate_tol = kResponseGateTol);

std::pair<VectorXd, VectorXd> closed_loop_rollout(const SystemResponse& resp,
                                                  const VectorXd& w);

// Steps the dynamics one sample at a time under the causal policy. Uses no
// lifted algebra; this is the reference the closed-loop maps are checked
// against.
std::pair<VectorXd, VectorXd> direct_rollout(
    const AffineLTVSystem& sys, const AffineCausalController& ctrl,
    const VectorXd& x0, const std::vector<VectorXd>& w_seq);

ReducedResponse reduce_noiseless(const SystemResponse& resp,
                                 const LiftedDynamics& lifted,
                                 double gate_tol = kResponseGateTol);

// Residual of [I - Z calA, -Z calB][Phi_x_bar; Phi_u_bar] = [[I_n, 0], [0, s]].
double validate_reduced(const ReducedResponse& red,
                        const LiftedDynamics& lifted);

// [x; u] = [Phi_x_bar; Phi_u_bar] [x0; 1].
std::pair<VectorXd, VectorXd> reduced_rollout(const ReducedResponse& red,
                                              const VectorXd& x0);

// Completes a reduced response to a full one. Columns beyond the first
// block column are filled with the open-loop response, so the result
// satisfies the full subspace equation whenever the reduced one does.
SystemResponse embed_reduced(const ReducedResponse& red,
                             const LiftedDynamics& lifted);

// Flat text form: a shape header followed by each block in row-major order.
std::string serialize_response(const SystemResponse& resp);
SystemResponse deserialize_response(const std::string& text);

}  // namespace affsls
