#pragma once

// Receding-horizon execution: solve, apply the first input, step the plant,
// repeat. The plant is always stepped with the true affine dynamics, also
// for the data-driven controller, whose Hankel pair is built once up front.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "affsls/data_driven.hpp"
#include "affsls/ocp.hpp"
#include "affsls/solver.hpp"

namespace affsls {

struct DataRecipe {
  int length = 60;
  std::uint64_t seed = 7;
  InputBox box;
};

struct BenchmarkSpec {
  // Time-invariant plant x+ = A x + B u + s.
  MatrixXd A;
  MatrixXd B;
  VectorXd s;
  CostSpec cost;
  PolytopicConstraints cons;
  int horizon = 0;
  int sim_steps = 0;
  VectorXd x_init;
  Formulation controller = Formulation::kTraditional;
  // dd-sls only; a recorded trajectory takes precedence over the recipe.
  std::optional<TrajectoryData> data;
  std::optional<DataRecipe> recipe;
  SolverSettings solver;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.cols()); }
  // Plant lifted over the MPC horizon.
  AffineLTVSystem plant() const;
  void validate() const;
};

// Swing dynamics with constant Coulomb friction: dt = 0.2, inverse inertia
// 0.8, damping 0.5, friction offset 0.1; track theta = 0.6.
BenchmarkSpec swing_benchmark();

struct StepRecord {
  SolveStatus status = SolveStatus::kMaxIter;
  double objective = 0.0;
  double solve_ms = 0.0;
  int iterations = 0;
  double kkt_residual = 0.0;  // max of the independent kkt_check terms
};

struct ClosedLoopLog {
  std::string controller;
  std::vector<VectorXd> x;  // x(0..k)
  std::vector<VectorXd> u;  // u(0..k-1)
  std::vector<StepRecord> steps;

  int length() const { return static_cast<int>(u.size()); }
};

enum class FailureKind { kModelInfeasible, kSolverFailure };

const char* to_string(FailureKind k);

// Aborted run: carries the log up to (not including) the failing step.
class RecedingHorizonAbort : public std::runtime_error {
 public:
  RecedingHorizonAbort(ClosedLoopLog partial, int step, FailureKind kind,
                       const std::string& detail);
  const ClosedLoopLog& partial_log() const { return partial_; }
  int step() const { return step_; }
  FailureKind kind() const { return kind_; }

 private:
  ClosedLoopLog partial_;
  int step_;
  FailureKind kind_;
};

// Hankel pair for a dd-sls spec: recorded data or the generation recipe.
HankelPair benchmark_hankel(const BenchmarkSpec& spec);

// Builds the spec's formulation from x0 (the Hankel pair is required for
// dd-sls and ignored otherwise).
OcpProgram build_program(const BenchmarkSpec& spec, const VectorXd& x0,
                         const HankelPair* hank);

// Solutions the solver calls optimal are re-verified with kkt_check; a
// residual above this is reported as a solver failure.
inline constexpr double kKktAcceptTol = 1e-6;

ClosedLoopLog run_receding_horizon(const BenchmarkSpec& spec);

struct DeviationReport {
  int steps = 0;
  double state_deviation = 0.0;  // max |x_a(k) - x_b(k)|_inf
  double input_deviation = 0.0;
  double objective_gap = 0.0;    // max per-step |J_a - J_b|
  double tol = 0.0;
  bool pass = false;             // both deviations within tol
};

// Throws DimensionError on mismatched lengths or dimensions.
DeviationReport compare_logs(const ClosedLoopLog& a, const ClosedLoopLog& b,
                             double tol);

// max_k |x(k+1) - A x(k) - B u(k) - s|_inf
double plant_residual(const ClosedLoopLog& log, const MatrixXd& A,
                      const MatrixXd& B, const VectorXd& s);

// Largest violation of the stage constraints along the applied trajectory;
// zero or negative when all hold.
double constraint_violation(const ClosedLoopLog& log,
                            const PolytopicConstraints& cons);

}  // namespace affsls
