#include "affsls/suites.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "affsls/data_driven.hpp"
#include "affsls/sls.hpp"

namespace affsls {
namespace {

using Rng = std::mt19937_64;

inline constexpr double kForwardTol = 1e-10;
inline constexpr double kRoundTripTol = 1e-8;
inline constexpr double kRolloutTol = 1e-9;
inline constexpr double kDataTol = 1e-8;
inline constexpr double kRejectFloor = 1e-3;
inline constexpr double kStepTol = 1e-9;

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

MatrixXd gaussian(Rng& rng, Index rows, Index cols, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  MatrixXd M(rows, cols);
  for (Index i = 0; i < M.size(); ++i) M.data()[i] = d(rng);
  return M;
}

MatrixXd with_spectral_radius(Rng& rng, int n, double lo, double hi) {
  MatrixXd A = gaussian(rng, n, n);
  const double rho = Eigen::EigenSolver<MatrixXd>(A, false).eigenvalues().cwiseAbs().maxCoeff();
  const double target = std::uniform_real_distribution<double>(lo, hi)(rng);
  return rho > 1e-12 ? MatrixXd(A * (target / rho)) : A;
}

struct Worst {
  PropertyResult r;
  Worst(std::string name, double threshold, bool lower = false) {
    r.property = std::move(name);
    r.threshold = threshold;
    r.lower_bound = lower;
    r.value = lower ? std::numeric_limits<double>::infinity() : 0.0;
  }
  void observe(double v) {
    if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
    r.value = r.lower_bound ? std::min(r.value, v) : std::max(r.value, v);
  }
  PropertyResult finish() {
    r.pass = r.lower_bound ? r.value >= r.threshold : r.value <= r.threshold;
    return r;
  }
};

void model_based(const SuiteConfig& cfg, Rng& rng, std::vector<PropertyResult>& out) {
  Worst forward("response subspace equation", kForwardTol);
  Worst round_trip("controller recovery round trip", kRoundTripTol);
  Worst rollout("closed-loop map rollout", kRolloutTol);
  for (int trial = 0; trial < cfg.trials; ++trial) {
    const int n = uniform_int(rng, 1, cfg.max_state_dim);
    const int m = uniform_int(rng, 1, cfg.max_input_dim);
    const int T = uniform_int(rng, 1, cfg.max_horizon);
    std::vector<MatrixXd> As, Bs;
    for (int t = 0; t < T; ++t) {
      As.push_back(with_spectral_radius(rng, n, 0.1, cfg.max_spectral_radius));
      Bs.push_back(gaussian(rng, n, m));
    }
    const AffineLTVSystem sys(As, Bs, gaussian(rng, n, 1));
    const LiftedDynamics L = lift_system(sys);

    AffineCausalController ctrl;
    ctrl.K = MatrixXd::Zero(L.input_rows(), L.state_rows());
    for (int i = 0; i <= T; ++i) {
      for (int j = 0; j <= i; ++j) ctrl.K.block(i * m, j * n, m, n) = gaussian(rng, m, n, 0.3);
    }
    ctrl.u_s = gaussian(rng, L.input_rows(), 1);

    const SystemResponse resp = responses_from_controller(ctrl, L);
    forward.observe(validate_subspace(resp, L));

    const AffineCausalController back = controller_from_responses(resp, L);
    const SystemResponse again = responses_from_controller(back, L);
    round_trip.observe(std::max({inf_norm(again.Phi_x - resp.Phi_x),
                                 inf_norm(again.Phi_u - resp.Phi_u),
                                 inf_norm(again.phi_x - resp.phi_x),
                                 inf_norm(again.phi_u - resp.phi_u)}));

    for (int k = 0; k < cfg.disturbance_trials; ++k) {
      const VectorXd x0 = gaussian(rng, n, 1);
      std::vector<VectorXd> ws;
      VectorXd w(L.state_rows());
      w.head(n) = x0;
      for (int t = 0; t < T; ++t) {
        ws.push_back(gaussian(rng, n, 1, 0.1));
        w.segment((t + 1) * n, n) = ws.back();
      }
      const auto [xm, um] = closed_loop_rollout(resp, w);
      const auto [xd, ud] = direct_rollout(sys, ctrl, x0, ws);
      const double scale = std::max(1.0, std::max(inf_norm(xd), inf_norm(ud)));
      rollout.observe(std::max(inf_norm(xm - xd), inf_norm(um - ud)) / scale);
    }
  }
  out.push_back(forward.finish());
  out.push_back(round_trip.finish());
  out.push_back(rollout.finish());
}

// Orthonormal basis of the null space of M.
MatrixXd null_space(const MatrixXd& M) {
  Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double tol = std::max(M.rows(), M.cols()) * 1e-12 * (sv.size() ? sv(0) : 1.0);
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  return svd.matrixV().rightCols(M.cols() - rank);
}

void data_driven(const SuiteConfig& cfg, Rng& rng, std::vector<PropertyResult>& out) {
  Worst member("data-driven response membership", kDataTol);
  Worst represent("representer existence", kDataTol);
  Worst fresh("fresh window representability", kDataTol);
  Worst reject("corrupted window rejection", kRejectFloor, true);
  Worst combine("affine combination dynamics", kStepTol);

  for (int trial = 0; trial < cfg.dd_trials; ++trial) {
    const int n = uniform_int(rng, 1, cfg.dd_max_state_dim);
    const int m = uniform_int(rng, 1, cfg.dd_max_input_dim);
    const int T = uniform_int(rng, 1, cfg.dd_max_horizon);
    MatrixXd A, B;
    do {
      A = with_spectral_radius(rng, n, 0.3, 1.0);
      B = gaussian(rng, n, m);
    } while (!is_controllable(A, B));
    const VectorXd s = gaussian(rng, n, 1, 0.5);
    const AffineLTVSystem sys = AffineLTVSystem::TimeInvariant(A, B, s, T);
    const LiftedDynamics L = lift_system(sys);

    const int order = n + (T + 1) + 1;
    const int length = min_length_for_pe(m, order) + 10;
    const InputBox box{VectorXd::Constant(m, -1.0), VectorXd::Constant(m, 1.0)};
    const TrajectoryData data = generate_excitation(sys, length, T, box, rng());
    HankelPair hank = make_hankel_pair(data, T);
    if (cfg.corrupt_hankel && hank.Hx.rows() > n) hank.Hx.row(n) *= 1.5;

    // Random members of the admissible set: particular solution plus a
    // null-space component.
    const Index K = hank.columns();
    MatrixXd Mc(n + 1, K);
    Mc << hank.H1, MatrixXd::Ones(1, K);
    const auto cod = Mc.completeOrthogonalDecomposition();
    const MatrixXd Nul = null_space(Mc);
    MatrixXd rhsG(n + 1, n);
    rhsG << MatrixXd::Identity(n, n), MatrixXd::Ones(1, n);
    VectorXd rhsg = VectorXd::Zero(n + 1);
    rhsg(n) = 1.0;
    for (int k = 0; k < 3; ++k) {
      AffineRepresenter rep;
      rep.G = cod.solve(rhsG) + Nul * gaussian(rng, Nul.cols(), n);
      rep.g_hat = cod.solve(rhsg) + Nul * gaussian(rng, Nul.cols(), 1);
      try {
        member.observe(validate_reduced(dd_response(hank, rep), L));
      } catch (const InvalidResponse& e) {
        member.observe(e.residual());
      }
    }

    // Model-based reduced response from a random causal policy.
    AffineCausalController ctrl;
    ctrl.K = MatrixXd::Zero(L.input_rows(), L.state_rows());
    for (int i = 0; i <= T; ++i) {
      for (int j = 0; j <= i; ++j) ctrl.K.block(i * m, j * n, m, n) = gaussian(rng, m, n, 0.3);
    }
    ctrl.u_s = gaussian(rng, L.input_rows(), 1);
    const ReducedResponse red = reduce_noiseless(responses_from_controller(ctrl, L), L);
    const auto rep = find_representer(hank, red);
    if (rep) {
      const ReducedResponse back = dd_response(hank, *rep);
      represent.observe(std::max(inf_norm(back.Phi_x_bar - red.Phi_x_bar),
                                 inf_norm(back.Phi_u_bar - red.Phi_u_bar)));
    } else {
      represent.observe(std::numeric_limits<double>::infinity());
    }

    // Windows of length T+1.
    std::vector<VectorXd> xw{gaussian(rng, n, 1)}, uw;
    for (int t = 0; t <= T; ++t) {
      uw.push_back(gaussian(rng, m, 1));
      if (t < T) xw.push_back(A * xw.back() + B * uw.back() + s);
    }
    fresh.observe(willems_represent(xw, uw, hank).residual);
    const int hit = uniform_int(rng, 1, T);
    xw[hit](uniform_int(rng, 0, n - 1)) += 0.1;
    reject.observe(willems_represent(xw, uw, hank).residual);

    VectorXd g = gaussian(rng, K, 1);
    g(0) += 1.0 - g.sum();
    const VectorXd xs = hank.Hx * g, us = hank.Hu * g;
    double step = 0.0;
    for (int t = 0; t < T; ++t) {
      step = std::max(step, inf_norm(xs.segment((t + 1) * n, n) - A * xs.segment(t * n, n) -
                                     B * us.segment(t * m, m) - s));
    }
    combine.observe(step);
  }
  out.push_back(member.finish());
  out.push_back(represent.finish());
  out.push_back(fresh.finish());
  out.push_back(reject.finish());
  out.push_back(combine.finish());
}

}  // namespace

void SuiteConfig::validate() const {
  for (const auto& [name, v] : {std::pair<const char*, int>{"trials", trials},
                                 {"disturbance_trials", disturbance_trials},
                                 {"dd_trials", dd_trials}}) {
    if (v < 1) throw std::invalid_argument(std::string("validate.") + name + ": must be >= 1");
  }
  if (max_state_dim < 1 || max_input_dim < 1 || max_horizon < 1 ||
      dd_max_state_dim < 1 || dd_max_input_dim < 1 || dd_max_horizon < 1) {
    throw std::invalid_argument("validate: dimension limits must be positive");
  }
  if (!(max_spectral_radius > 0.1)) {
    throw std::invalid_argument("validate: max_spectral_radius must exceed 0.1");
  }
}

std::vector<PropertyResult> run_suites(const SuiteConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::vector<PropertyResult> out;
  model_based(cfg, rng, out);
  data_driven(cfg, rng, out);
  return out;
}

}  // namespace affsls
