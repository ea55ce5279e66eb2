#pragma once

// Finite-horizon optimal control programs in three equivalent forms:
//
//   traditional  decision variables (x, u); the dynamics are equality rows.
//   sls          decision variables are the reduced closed-loop maps
//                (Phi_x_bar, Phi_u_bar); (x, u) = Phi_bar [x0; 1].
//   dd-sls       decision variables (x, u, G, g_hat); no model matrices,
//                only the Hankel pair of recorded data.
//
// All three carry (x, u) as explicit variables so cost and constraint rows
// are shared. Stage constraints apply at t = 0..T-1, the optional terminal
// polyhedron at t = T. The final input u_T has no effect within the horizon
// and is pinned to zero so that optimizers are unique.

#include <optional>
#include <string>

#include "affsls/data_driven.hpp"
#include "affsls/lifted.hpp"
#include "affsls/sls.hpp"
#include "affsls/solver.hpp"

namespace affsls {

enum class PNorm { kOne, kTwo, kInf };

const char* to_string(PNorm p);
PNorm parse_pnorm(const std::string& s);

struct CostSpec {
  MatrixXd Q;
  MatrixXd R;
  MatrixXd P;
  PNorm p_norm = PNorm::kTwo;
  std::optional<VectorXd> x_ref;
  double u_reg = 0.0;

  // For p = 2: Q, P symmetric PSD and R symmetric PD (R PSD is accepted when
  // u_reg > 0, which makes the effective input weight PD). For p in {1, inf}
  // Q, R, P must be full rank.
  void validate(int n, int m) const;
  VectorXd reference(int n) const;
};

struct TerminalSet {
  MatrixXd H;
  VectorXd h;
};

struct PolytopicConstraints {
  MatrixXd H_x;  // d x n
  MatrixXd H_u;  // d x m
  VectorXd h;    // d
  std::optional<TerminalSet> terminal;

  static PolytopicConstraints None(int n, int m);
  // Elementwise boxes; infinite entries produce no row.
  static PolytopicConstraints Box(const VectorXd& x_min, const VectorXd& x_max,
                                  const VectorXd& u_min, const VectorXd& u_max);

  void validate(int n, int m) const;
  int rows() const { return static_cast<int>(h.size()); }
};

enum class Formulation { kTraditional, kSls, kDdSls };

const char* to_string(Formulation f);
Formulation parse_formulation(const std::string& s);

struct ProgramLayout {
  int n = 0;
  int m = 0;
  int T = 0;
  Index x_offset = 0;
  Index u_offset = 0;
  // sls: Phi_x_bar then Phi_u_bar (column-major). dd-sls: G then g_hat.
  Index aux_offset = 0;
  Index data_columns = 0;  // dd-sls only: L - T
  Index epigraph_offset = 0;
  Index epigraph_count = 0;
};

struct OcpProgram {
  Formulation formulation = Formulation::kTraditional;
  ConvexProgram program;
  ProgramLayout layout;
  CostSpec cost;
  VectorXd x0;
  std::optional<LiftedDynamics> lifted;  // sls
  std::optional<MatrixXd> H1;            // dd-sls
};

struct OCPSolutionBundle {
  Formulation formulation = Formulation::kTraditional;
  VectorXd x_traj;
  VectorXd u_traj;
  double objective = 0.0;
  std::optional<ReducedResponse> reduced;
  std::optional<double> subspace_residual;
  std::optional<AffineRepresenter> representer;
  std::optional<MembershipResiduals> membership;
};

class NonOptimalSolve : public std::runtime_error {
 public:
  NonOptimalSolve(SolveStatus status, const std::string& diagnostics)
      : std::runtime_error(std::string("solve did not reach optimality: ") +
                           to_string(status) + " (" + diagnostics + ")"),
        status_(status),
        diagnostics_(diagnostics) {}
  SolveStatus status() const { return status_; }
  const std::string& diagnostics() const { return diagnostics_; }

 private:
  SolveStatus status_;
  std::string diagnostics_;
};

class PersistencyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

double cost_eval(const VectorXd& x_traj, const VectorXd& u_traj,
                 const CostSpec& cost, int n, int m);

OcpProgram build_traditional(const AffineLTVSystem& sys, const CostSpec& cost,
                             const PolytopicConstraints& cons,
                             const VectorXd& x0);

OcpProgram build_sls(const AffineLTVSystem& sys, const CostSpec& cost,
                     const PolytopicConstraints& cons, const VectorXd& x0);

// Throws PersistencyError when the recorded input is not persistently
// exciting of order n + (T+1) + 1.
OcpProgram build_dd_sls(const HankelPair& hank, const CostSpec& cost,
                        const PolytopicConstraints& cons, const VectorXd& x0);

// Throws NonOptimalSolve for any non-optimal status, and std::runtime_error
// if the program objective disagrees with cost_eval by more than 1e-6
// relative.
OCPSolutionBundle extract_bundle(const OcpProgram& prog, const Solution& sol);

}  // namespace affsls
