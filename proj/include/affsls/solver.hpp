#pragma once

// Dense primal-dual interior-point solver for convex quadratic programs
//
//   minimize    1/2 z'Pz + q'z + c
//   subject to  A z  = b
//               C z <= d
//               lb <= z <= ub   (optional)
//
// Sized for the desk-scale programs the MPC builders emit (a few hundred
// variables). Linear programs are the P = 0 special case.

#include <iosfwd>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace affsls {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct ConvexProgram {
  Eigen::Index num_vars = 0;
  SparseMatrix P;  // symmetric PSD, num_vars x num_vars
  Eigen::VectorXd q;
  double objective_constant = 0.0;
  SparseMatrix A_eq;
  Eigen::VectorXd b_eq;
  SparseMatrix C_ineq;
  Eigen::VectorXd d_ineq;
  std::optional<Eigen::VectorXd> lower_bounds;
  std::optional<Eigen::VectorXd> upper_bounds;

  // Empty program over num_vars variables: zero objective, no rows.
  static ConvexProgram Empty(Eigen::Index num_vars);

  // Throws std::invalid_argument on inconsistent shapes or an asymmetric P.
  void validate() const;

  double objective(const Eigen::VectorXd& z) const;
};

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kMaxIter };

const char* to_string(SolveStatus s);

struct SolverSettings {
  double eps_prim = 1e-8;
  double eps_dual = 1e-8;
  double eps_comp = 1e-9;
  int max_iter = 200;
  // Primal/dual regularization of the Newton system; refined away.
  double regularization = 1e-10;
  int refinement_steps = 3;
};

struct Solution {
  SolveStatus status = SolveStatus::kMaxIter;
  Eigen::VectorXd primal;
  Eigen::VectorXd dual_eq;
  Eigen::VectorXd dual_ineq;  // C rows first, then lower bounds, then upper
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double complementarity = 0.0;
  int iterations = 0;
  std::string diagnostics;
};

Solution solve(const ConvexProgram& prog, const SolverSettings& settings = {});

struct KktReport {
  double stationarity = 0.0;
  double primal_feasibility = 0.0;
  double dual_feasibility = 0.0;  // most negative inequality multiplier
  double complementarity = 0.0;

  double max() const;
};

// Recomputes the optimality conditions from scratch, trusting nothing the
// solver reported except the primal and dual vectors.
KktReport kkt_check(const ConvexProgram& prog, const Solution& sol);

// Sparse triplet text form:
//   affsls-qp 1
//   vars <n>
//   objective_constant <c>
//   P <nnz>            followed by nnz lines "i j v"
//   q                  followed by n values
//   A <rows> <nnz>     triplets, then "b" and <rows> values
//   C <rows> <nnz>     triplets, then "d" and <rows> values
//   bounds <0|1>       when 1: "lb" n values then "ub" n values
void write_program(std::ostream& os, const ConvexProgram& prog);
ConvexProgram read_program(std::istream& is);

}  // namespace affsls
