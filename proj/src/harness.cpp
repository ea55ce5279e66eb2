#include "affsls/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace affsls {

AffineLTVSystem BenchmarkSpec::plant() const {
  return AffineLTVSystem::TimeInvariant(A, B, s, horizon);
}

void BenchmarkSpec::validate() const {
  const Index n = A.rows();
  if (n < 1 || A.cols() != n) throw DimensionError("benchmark: A must be square and nonempty");
  if (B.rows() != n || B.cols() < 1) throw DimensionError("benchmark: B must be n x m with m >= 1");
  if (s.size() != n) throw DimensionError("benchmark: s must have length n");
  if (x_init.size() != n) throw DimensionError("benchmark: x_init must have length n");
  if (horizon < 1) throw std::invalid_argument("benchmark: horizon must be >= 1");
  if (sim_steps < 1) throw std::invalid_argument("benchmark: sim_steps must be >= 1");
  cost.validate(state_dim(), input_dim());
  cons.validate(state_dim(), input_dim());
  if (controller == Formulation::kDdSls && !data && !recipe) {
    throw std::invalid_argument("benchmark: the dd-sls controller needs a data source");
  }
  if (data && (data->state_dim() != n || data->input_dim() != B.cols())) {
    throw DimensionError("benchmark: recorded data dimensions do not match the plant");
  }
  if (recipe && (recipe->box.lower.size() != B.cols() ||
                 recipe->box.upper.size() != B.cols())) {
    throw DimensionError("benchmark: data recipe input box must have length m");
  }
}

BenchmarkSpec swing_benchmark() {
  const double dt = 0.2, inv_inertia = 0.8, damping = 0.5, friction = 0.1;
  BenchmarkSpec spec;
  spec.A.resize(2, 2);
  spec.A << 1.0, dt, -dt * inv_inertia, 1.0 - damping * dt * inv_inertia;
  spec.B.resize(2, 1);
  spec.B << 0.0, 1.0;
  spec.s.resize(2);
  spec.s << 0.0, friction;

  spec.cost.Q = Eigen::Vector2d(1.0, 0.0).asDiagonal();
  spec.cost.P = spec.cost.Q;
  spec.cost.R = MatrixXd::Zero(1, 1);
  spec.cost.p_norm = PNorm::kTwo;
  spec.cost.x_ref = Eigen::Vector2d(0.6, 0.0);
  spec.cost.u_reg = 1e-6;

  spec.cons = PolytopicConstraints::Box(Eigen::Vector2d(-1.2, -0.8),
                                        Eigen::Vector2d(1.2, 0.8),
                                        VectorXd::Constant(1, -0.5),
                                        VectorXd::Constant(1, 0.5));
  spec.horizon = 10;
  spec.sim_steps = 15;
  spec.x_init = VectorXd::Zero(2);
  spec.recipe = DataRecipe{60, 7, {VectorXd::Constant(1, -0.5), VectorXd::Constant(1, 0.5)}};
  return spec;
}

const char* to_string(FailureKind k) {
  switch (k) {
    case FailureKind::kModelInfeasible: return "model infeasible";
    case FailureKind::kSolverFailure: return "solver failure";
  }
  return "?";
}

RecedingHorizonAbort::RecedingHorizonAbort(ClosedLoopLog partial, int step,
                                           FailureKind kind,
                                           const std::string& detail)
    : std::runtime_error("receding horizon aborted at step " +
                         std::to_string(step) + ": " + to_string(kind) + " (" +
                         detail + ")"),
      partial_(std::move(partial)),
      step_(step),
      kind_(kind) {}

HankelPair benchmark_hankel(const BenchmarkSpec& spec) {
  if (spec.data) return make_hankel_pair(*spec.data, spec.horizon);
  if (!spec.recipe) {
    throw std::invalid_argument("benchmark: the dd-sls controller needs a data source");
  }
  const TrajectoryData data = generate_excitation(
      spec.plant(), spec.recipe->length, spec.horizon, spec.recipe->box,
      spec.recipe->seed);
  return make_hankel_pair(data, spec.horizon);
}

OcpProgram build_program(const BenchmarkSpec& spec, const VectorXd& x0,
                         const HankelPair* hank) {
  switch (spec.controller) {
    case Formulation::kTraditional:
      return build_traditional(spec.plant(), spec.cost, spec.cons, x0);
    case Formulation::kSls:
      return build_sls(spec.plant(), spec.cost, spec.cons, x0);
    case Formulation::kDdSls:
      if (hank == nullptr) throw std::invalid_argument("dd-sls needs a Hankel pair");
      return build_dd_sls(*hank, spec.cost, spec.cons, x0);
  }
  throw std::invalid_argument("unknown controller");
}

ClosedLoopLog run_receding_horizon(const BenchmarkSpec& spec) {
  spec.validate();
  std::optional<HankelPair> hank;
  if (spec.controller == Formulation::kDdSls) hank = benchmark_hankel(spec);

  ClosedLoopLog log;
  log.controller = to_string(spec.controller);
  log.x.push_back(spec.x_init);
  for (int k = 0; k < spec.sim_steps; ++k) {
    const VectorXd& xk = log.x.back();
    const OcpProgram prog = build_program(spec, xk, hank ? &*hank : nullptr);

    const auto start = std::chrono::steady_clock::now();
    const Solution sol = solve(prog.program, spec.solver);
    const auto stop = std::chrono::steady_clock::now();

    if (sol.status == SolveStatus::kInfeasible) {
      throw RecedingHorizonAbort(log, k, FailureKind::kModelInfeasible, sol.diagnostics);
    }
    if (sol.status != SolveStatus::kOptimal) {
      throw RecedingHorizonAbort(log, k, FailureKind::kSolverFailure,
                                 std::string(to_string(sol.status)) + ": " + sol.diagnostics);
    }
    const double kkt = kkt_check(prog.program, sol).max();
    if (kkt > kKktAcceptTol) {
      throw RecedingHorizonAbort(log, k, FailureKind::kSolverFailure,
                                 "optimality conditions violated by " + std::to_string(kkt));
    }
    const OCPSolutionBundle bundle = extract_bundle(prog, sol);

    StepRecord rec;
    rec.status = sol.status;
    rec.objective = bundle.objective;
    rec.solve_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    rec.iterations = sol.iterations;
    rec.kkt_residual = kkt;

    const VectorXd u0 = bundle.u_traj.head(spec.input_dim());
    log.u.push_back(u0);
    log.steps.push_back(rec);
    log.x.push_back(spec.A * xk + spec.B * u0 + spec.s);
  }
  return log;
}

DeviationReport compare_logs(const ClosedLoopLog& a, const ClosedLoopLog& b,
                             double tol) {
  if (a.x.size() != b.x.size() || a.u.size() != b.u.size()) {
    throw DimensionError("compare_logs: logs have different lengths (" +
                         std::to_string(a.u.size()) + " vs " +
                         std::to_string(b.u.size()) + " steps)");
  }
  DeviationReport r;
  r.steps = a.length();
  r.tol = tol;
  for (size_t k = 0; k < a.x.size(); ++k) {
    if (a.x[k].size() != b.x[k].size()) throw DimensionError("compare_logs: state dimensions differ");
    r.state_deviation = std::max(r.state_deviation, (a.x[k] - b.x[k]).lpNorm<Eigen::Infinity>());
  }
  for (size_t k = 0; k < a.u.size(); ++k) {
    if (a.u[k].size() != b.u[k].size()) throw DimensionError("compare_logs: input dimensions differ");
    r.input_deviation = std::max(r.input_deviation, (a.u[k] - b.u[k]).lpNorm<Eigen::Infinity>());
  }
  const size_t steps = std::min(a.steps.size(), b.steps.size());
  for (size_t k = 0; k < steps; ++k) {
    r.objective_gap = std::max(r.objective_gap,
                               std::abs(a.steps[k].objective - b.steps[k].objective));
  }
  r.pass = r.state_deviation <= tol && r.input_deviation <= tol;
  return r;
}

double plant_residual(const ClosedLoopLog& log, const MatrixXd& A,
                      const MatrixXd& B, const VectorXd& s) {
  double r = 0.0;
  for (size_t k = 0; k < log.u.size() && k + 1 < log.x.size(); ++k) {
    r = std::max(r, (log.x[k + 1] - A * log.x[k] - B * log.u[k] - s)
                        .lpNorm<Eigen::Infinity>());
  }
  return r;
}

double constraint_violation(const ClosedLoopLog& log,
                            const PolytopicConstraints& cons) {
  double v = 0.0;
  for (size_t k = 0; k < log.u.size(); ++k) {
    if (cons.rows() == 0) break;
    const VectorXd slack = cons.H_x * log.x[k] + cons.H_u * log.u[k] - cons.h;
    v = std::max(v, slack.maxCoeff());
  }
  return v;
}

}  // namespace affsls
