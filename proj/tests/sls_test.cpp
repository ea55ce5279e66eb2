#include "affsls/sls.hpp"

#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace affsls {
namespace {

using test::gaussian;
using test::M;
using test::V;

struct Instance {
  AffineLTVSystem sys;
  LiftedDynamics L;
  AffineCausalController ctrl;
};

AffineCausalController random_controller(std::mt19937_64& rng, int n, int m, int T,
                                          double scale = 0.5) {
  AffineCausalController c;
  c.K = MatrixXd::Zero(m * (T + 1), n * (T + 1));
  for (int i = 0; i <= T; ++i) {
    for (int j = 0; j <= i; ++j) c.K.block(i * m, j * n, m, n) = gaussian(rng, m, n, scale);
  }
  c.u_s = gaussian(rng, m * (T + 1), 1);
  return c;
}

Instance random_instance(std::mt19937_64& rng, int n, int m, int T, bool time_varying = true) {
  std::vector<MatrixXd> As, Bs;
  for (int t = 0; t < T; ++t) {
    if (time_varying || t == 0) {
      As.push_back(gaussian(rng, n, n, 0.6));
      Bs.push_back(gaussian(rng, n, m));
    } else {
      As.push_back(As[0]);
      Bs.push_back(Bs[0]);
    }
  }
  AffineLTVSystem sys(As, Bs, gaussian(rng, n, 1));
  LiftedDynamics L = lift_system(sys);
  return {sys, L, random_controller(rng, n, m, T)};
}

MatrixXd open_loop_phi(const LiftedDynamics& L) {
  const MatrixXd ZA = L.Z * L.calA;
  MatrixXd sum = MatrixXd::Identity(ZA.rows(), ZA.cols());
  MatrixXd power = sum;
  for (int k = 1; k <= L.T; ++k) {
    power = power * ZA;
    sum += power;
  }
  return sum;
}

GTEST_TEST(ResponsesFromControllerTest, OpenLoopIsNeumannSeries) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = random_instance(rng, 2, 1, 4);
    AffineCausalController zero{MatrixXd::Zero(5, 10), VectorXd::Zero(5)};
    const auto r = responses_from_controller(zero, inst.L);
    const MatrixXd expected = open_loop_phi(inst.L);
    EXPECT_LE(inf_norm(r.Phi_x - expected), 1e-12);
    EXPECT_TRUE(r.Phi_u.isZero(0));
    EXPECT_TRUE(r.phi_u.isZero(0));
    EXPECT_LE(inf_norm(r.phi_x - expected * inst.L.Z * inst.L.s_stack), 1e-12);
  }
}

// n = m = 1, T = 1, A = 2, B = 1, s = 1 with u_0 = k x_0. Inverting the 2x2
// unitriangular [[1, 0], [-(2 + k), 1]] by hand gives Phi_x = [[1, 0], [2 + k, 1]].
GTEST_TEST(ResponsesFromControllerTest, HandInvertedScalarExample) {
  const auto L = lift_system(AffineLTVSystem::TimeInvariant(M({{2}}), M({{1}}), V({1}), 1));
  for (double k : {-1.5, 0.0, 3.0}) {
    AffineCausalController c{M({{k, 0}, {0, 0}}), V({0, 0})};
    const auto r = responses_from_controller(c, L);
    EXPECT_EQ(r.Phi_x, M({{1, 0}, {2 + k, 1}})) << "k=" << k;
    EXPECT_EQ(r.Phi_u, M({{k, 0}, {0, 0}})) << "k=" << k;
    EXPECT_EQ(r.phi_x, V({0, 1})) << "k=" << k;
    EXPECT_EQ(r.phi_u, V({0, 0})) << "k=" << k;
  }
}

// Same system, but the gain sits on the final input u_1 = k x_1, which never
// reaches a state inside the horizon.
GTEST_TEST(ResponsesFromControllerTest, FinalInputGainDoesNotReachStates) {
  const auto L = lift_system(AffineLTVSystem::TimeInvariant(M({{2}}), M({{1}}), V({1}), 1));
  const double k = 3.0;
  AffineCausalController c{M({{0, 0}, {0, k}}), V({0, 0})};
  const auto r = responses_from_controller(c, L);
  EXPECT_EQ(r.Phi_x, M({{1, 0}, {2, 1}}));
  EXPECT_EQ(r.Phi_u, M({{0, 0}, {2 * k, k}}));
  EXPECT_EQ(r.phi_x, V({0, 1}));
  EXPECT_EQ(r.phi_u, V({0, k}));
}

GTEST_TEST(ResponsesFromControllerTest, RandomInstanceResidual) {
  std::mt19937_64 rng(2);
  auto inst = random_instance(rng, 3, 2, 5);
  const auto r = responses_from_controller(inst.ctrl, inst.L);
  EXPECT_LE(validate_subspace(r, inst.L), 1e-12);
}

GTEST_TEST(ResponsesFromControllerTest, StructureOfRandomResponses) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + trial % 4, m = 1 + trial % 2, T = 1 + trial % 8;
    auto inst = random_instance(rng, n, m, T);
    const auto r = responses_from_controller(inst.ctrl, inst.L);
    EXPECT_TRUE(is_causal(r.Phi_x, n, n, T, true));
    EXPECT_TRUE(is_causal(r.Phi_u, m, n, T));
    EXPECT_TRUE(r.phi_x.head(n).isZero(0));
    for (int t = 0; t <= T; ++t) {
      EXPECT_LE(inf_norm(r.Phi_x.block(t * n, t * n, n, n) - MatrixXd::Identity(n, n)), 1e-12);
    }
  }
}

GTEST_TEST(ValidateSubspaceTest, PerturbationIsDetectedWithItsWeight) {
  // Two-step scalar system; Phi_u(0,0) enters row 1 of the residual through B.
  const double b = 0.7;
  const auto L = lift_system(AffineLTVSystem::TimeInvariant(M({{1.1}}), M({{b}}), V({0.3}), 2));
  std::mt19937_64 rng(4);
  auto c = random_controller(rng, 1, 1, 2);
  auto r = responses_from_controller(c, L);
  ASSERT_LE(validate_subspace(r, L), 1e-12);
  r.Phi_u(0, 0) += 1.0;
  EXPECT_GE(validate_subspace(r, L), b - 1e-12);
}

GTEST_TEST(ValidateSubspaceTest, LinearCaseWithoutOffsets) {
  std::mt19937_64 rng(5);
  std::vector<MatrixXd> As{gaussian(rng, 2, 2), gaussian(rng, 2, 2), gaussian(rng, 2, 2)};
  std::vector<MatrixXd> Bs{gaussian(rng, 2, 1), gaussian(rng, 2, 1), gaussian(rng, 2, 1)};
  const auto L = lift_system(AffineLTVSystem(As, Bs, VectorXd::Zero(2)));
  auto c = random_controller(rng, 2, 1, 3);
  c.u_s.setZero();
  const auto r = responses_from_controller(c, L);
  EXPECT_TRUE(r.phi_x.isZero(0));
  EXPECT_TRUE(r.phi_u.isZero(0));
  EXPECT_LE(validate_subspace(r, L), 1e-12);
}

GTEST_TEST(ControllerFromResponsesTest, RoundTripRecoversController) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 3, m = 1 + trial % 2, T = 1 + trial % 6;
    auto inst = random_instance(rng, n, m, T);
    const auto r = responses_from_controller(inst.ctrl, inst.L);
    const auto back = controller_from_responses(r, inst.L);
    EXPECT_LE((back.K - inst.ctrl.K).cwiseAbs().maxCoeff(), 1e-10) << "trial " << trial;
    EXPECT_LE((back.u_s - inst.ctrl.u_s).cwiseAbs().maxCoeff(), 1e-10) << "trial " << trial;
    EXPECT_TRUE(is_causal(back.K, m, n, T));
  }
}

GTEST_TEST(ControllerFromResponsesTest, OpenLoopResponseGivesZeroController) {
  std::mt19937_64 rng(7);
  auto inst = random_instance(rng, 2, 2, 3);
  AffineCausalController zero{MatrixXd::Zero(8, 8), VectorXd::Zero(8)};
  const auto back = controller_from_responses(responses_from_controller(zero, inst.L), inst.L);
  EXPECT_LE(back.K.cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE(back.u_s.cwiseAbs().maxCoeff(), 1e-14);
}

// A feedback response paired with the open-loop affine column (phi_u = 0) is
// realized by an offset that exactly cancels the feedback on the offset path.
GTEST_TEST(ControllerFromResponsesTest, PureAffineCorrection) {
  std::mt19937_64 rng(8);
  auto inst = random_instance(rng, 2, 1, 4);
  auto c = inst.ctrl;
  c.u_s.setZero();
  auto r = responses_from_controller(c, inst.L);
  r.phi_x = open_loop_phi(inst.L) * inst.L.Z * inst.L.s_stack;
  r.phi_u.setZero();
  ASSERT_LE(validate_subspace(r, inst.L), 1e-12);
  const auto back = controller_from_responses(r, inst.L);
  const VectorXd expected = -r.Phi_u * invert_unit_lower_block(r.Phi_x, 2) * r.phi_x;
  EXPECT_LE(inf_norm(back.u_s - expected), 1e-12);
  EXPECT_FALSE(back.u_s.isZero(1e-6));
}

GTEST_TEST(ControllerFromResponsesTest, RejectsInvalidResponses) {
  std::mt19937_64 rng(9);
  auto inst = random_instance(rng, 2, 1, 3);
  auto r = responses_from_controller(inst.ctrl, inst.L);
  auto bad = r;
  bad.phi_x(3) += 1e-3;
  EXPECT_THROW(controller_from_responses(bad, inst.L), InvalidResponse);
  auto acausal = r;
  acausal.Phi_u(0, 7) = 1.0;
  EXPECT_THROW(controller_from_responses(acausal, inst.L), InvalidResponse);
}

GTEST_TEST(ClosedLoopRolloutTest, ZeroDisturbanceGivesAffineColumn) {
  std::mt19937_64 rng(10);
  auto inst = random_instance(rng, 3, 2, 4);
  const auto r = responses_from_controller(inst.ctrl, inst.L);
  const auto [x, u] = closed_loop_rollout(r, VectorXd::Zero(15));
  EXPECT_EQ(x, r.phi_x);
  EXPECT_EQ(u, r.phi_u);
}

GTEST_TEST(ClosedLoopRolloutTest, ImpulseResponseWithoutOffsets) {
  std::mt19937_64 rng(11);
  std::vector<MatrixXd> As{gaussian(rng, 2, 2), gaussian(rng, 2, 2)};
  std::vector<MatrixXd> Bs{gaussian(rng, 2, 1), gaussian(rng, 2, 1)};
  const auto L = lift_system(AffineLTVSystem(As, Bs, VectorXd::Zero(2)));
  auto c = random_controller(rng, 2, 1, 2);
  c.u_s.setZero();
  const auto r = responses_from_controller(c, L);
  VectorXd e1 = VectorXd::Zero(6);
  e1(0) = 1.0;
  EXPECT_LE(inf_norm(closed_loop_rollout(r, e1).first - r.Phi_x.col(0)), 1e-15);
}

GTEST_TEST(ClosedLoopRolloutTest, MatchesDirectRollout) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 4, m = 1 + trial % 2, T = 1 + trial % 7;
    auto inst = random_instance(rng, n, m, T);
    const auto r = responses_from_controller(inst.ctrl, inst.L);
    const auto ctrl = controller_from_responses(r, inst.L);
    VectorXd w(n * (T + 1));
    for (Index i = 0; i < w.size(); ++i) w(i) = unit(rng);
    std::vector<VectorXd> ws;
    for (int t = 0; t < T; ++t) ws.push_back(w.segment((t + 1) * n, n));
    const auto [xm, um] = closed_loop_rollout(r, w);
    const auto [xd, ud] = direct_rollout(inst.sys, ctrl, w.head(n), ws);
    EXPECT_LE(inf_norm(xm - xd), 1e-9) << "trial " << trial;
    EXPECT_LE(inf_norm(um - ud), 1e-9) << "trial " << trial;
  }
}

GTEST_TEST(DirectRolloutTest, IdentityDynamicsHoldState) {
  const auto sys = AffineLTVSystem::TimeInvariant(MatrixXd::Identity(2, 2), M({{1}, {0}}),
                                                  VectorXd::Zero(2), 3);
  AffineCausalController zero{MatrixXd::Zero(4, 8), VectorXd::Zero(4)};
  const auto [x, u] = direct_rollout(sys, zero, V({0.5, -2}), {VectorXd::Zero(2), VectorXd::Zero(2),
                                                               VectorXd::Zero(2)});
  for (int t = 0; t <= 3; ++t) EXPECT_EQ(VectorXd(x.segment(2 * t, 2)), V({0.5, -2}));
  EXPECT_TRUE(u.isZero(0));
}

GTEST_TEST(DirectRolloutTest, OffsetAccumulates) {
  const auto sys = AffineLTVSystem::TimeInvariant(M({{1}}), M({{1}}), V({1}), 3);
  AffineCausalController zero{MatrixXd::Zero(4, 4), VectorXd::Zero(4)};
  const auto [x, u] = direct_rollout(sys, zero, V({0}), {V({0}), V({0}), V({0})});
  EXPECT_EQ(x, V({0, 1, 2, 3}));
}

GTEST_TEST(DirectRolloutTest, SwingSystemMatchesClosedLoopMaps) {
  const auto sys = AffineLTVSystem::TimeInvariant(M({{1, 0.2}, {-0.16, 0.92}}), M({{0}, {1}}),
                                                  V({0, 0.1}), 10);
  const auto L = lift_system(sys);
  std::mt19937_64 rng(13);
  const auto c = random_controller(rng, 2, 1, 10, 0.2);
  const auto r = responses_from_controller(c, L);
  VectorXd w = gaussian(rng, 22, 1, 0.1);
  std::vector<VectorXd> ws;
  for (int t = 0; t < 10; ++t) ws.push_back(w.segment(2 * (t + 1), 2));
  const auto [xm, um] = closed_loop_rollout(r, w);
  const auto [xd, ud] = direct_rollout(sys, c, w.head(2), ws);
  EXPECT_LE(inf_norm(xm - xd), 1e-9);
  EXPECT_LE(inf_norm(um - ud), 1e-9);
}

GTEST_TEST(ReduceNoiselessTest, OpenLoopWithoutOffsetHasZeroAffineColumn) {
  std::mt19937_64 rng(14);
  std::vector<MatrixXd> As{gaussian(rng, 2, 2), gaussian(rng, 2, 2)};
  std::vector<MatrixXd> Bs{gaussian(rng, 2, 1), gaussian(rng, 2, 1)};
  const auto L = lift_system(AffineLTVSystem(As, Bs, VectorXd::Zero(2)));
  AffineCausalController zero{MatrixXd::Zero(3, 6), VectorXd::Zero(3)};
  const auto red = reduce_noiseless(responses_from_controller(zero, L), L);
  EXPECT_TRUE(red.Phi_x_bar.col(2).isZero(0));
}

GTEST_TEST(ReduceNoiselessTest, ReducedRolloutMatchesFullRollout) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 3, m = 1 + trial % 2, T = 1 + trial % 5;
    auto inst = random_instance(rng, n, m, T);
    const auto r = responses_from_controller(inst.ctrl, inst.L);
    const auto red = reduce_noiseless(r, inst.L);
    EXPECT_LE(validate_reduced(red, inst.L), 1e-12);
    const VectorXd x0 = gaussian(rng, n, 1);
    VectorXd w = VectorXd::Zero(n * (T + 1));
    w.head(n) = x0;
    const auto [xf, uf] = closed_loop_rollout(r, w);
    const auto [xr, ur] = reduced_rollout(red, x0);
    EXPECT_LE(inf_norm(xf - xr), 1e-12);
    EXPECT_LE(inf_norm(uf - ur), 1e-12);
  }
}

GTEST_TEST(ReduceNoiselessTest, SwingShapes) {
  const auto L = lift_system(AffineLTVSystem::TimeInvariant(
      M({{1, 0.2}, {-0.16, 0.92}}), M({{0}, {1}}), V({0, 0.1}), 10));
  AffineCausalController zero{MatrixXd::Zero(11, 22), VectorXd::Zero(11)};
  const auto red = reduce_noiseless(responses_from_controller(zero, L), L);
  EXPECT_EQ(red.Phi_x_bar.rows(), 22);
  EXPECT_EQ(red.Phi_x_bar.cols(), 3);
  EXPECT_EQ(red.Phi_u_bar.rows(), 11);
  EXPECT_EQ(red.Phi_u_bar.cols(), 3);
}

GTEST_TEST(EmbedReducedTest, EmbeddingIsValidAndKeepsReducedColumns) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 3, m = 1 + trial % 2, T = 1 + trial % 5;
    auto inst = random_instance(rng, n, m, T, false);
    const auto red = reduce_noiseless(responses_from_controller(inst.ctrl, inst.L), inst.L);
    const auto full = embed_reduced(red, inst.L);
    EXPECT_LE(validate_subspace(full, inst.L), 1e-10);
    EXPECT_EQ(MatrixXd(full.Phi_x.leftCols(n)), MatrixXd(red.Phi_x_bar.leftCols(n)));
    EXPECT_EQ(full.phi_x, red.Phi_x_bar.col(n));
    // The recovered policy reproduces the reduced trajectory.
    const auto ctrl = controller_from_responses(full, inst.L);
    const VectorXd x0 = gaussian(rng, n, 1);
    std::vector<VectorXd> ws(T, VectorXd::Zero(n));
    const auto [xd, ud] = direct_rollout(inst.sys, ctrl, x0, ws);
    const auto [xr, ur] = reduced_rollout(red, x0);
    EXPECT_LE(inf_norm(xd - xr), 1e-9);
    EXPECT_LE(inf_norm(ud - ur), 1e-9);
  }
}

GTEST_TEST(InvertUnitLowerBlockTest, RejectsNonUnitDiagonal) {
  EXPECT_THROW(invert_unit_lower_block(M({{2, 0}, {1, 1}}), 1), std::invalid_argument);
  EXPECT_THROW(invert_unit_lower_block(M({{1, 1}, {0, 1}}), 1), std::invalid_argument);
  EXPECT_EQ(invert_unit_lower_block(M({{1, 0}, {3, 1}}), 1), M({{1, 0}, {-3, 1}}));
}

GTEST_TEST(SerializeTest, GoldenFileForHandExample) {
  const auto L = lift_system(AffineLTVSystem::TimeInvariant(M({{2}}), M({{1}}), V({1}), 1));
  const auto r = responses_from_controller({M({{3, 0}, {0, 0}}), V({0, 0})}, L);
  std::ifstream f(std::string(AFFSLS_TEST_DATA_DIR) + "/hand_response_k3.txt");
  ASSERT_TRUE(f.good());
  std::stringstream golden;
  golden << f.rdbuf();
  EXPECT_EQ(serialize_response(r), golden.str());
  const auto back = deserialize_response(golden.str());
  EXPECT_EQ(back.Phi_x, r.Phi_x);
  EXPECT_EQ(back.phi_u, r.phi_u);
}

GTEST_TEST(SerializeTest, RoundTripIsExact) {
  std::mt19937_64 rng(17);
  auto inst = random_instance(rng, 3, 2, 4);
  const auto r = responses_from_controller(inst.ctrl, inst.L);
  const auto back = deserialize_response(serialize_response(r));
  EXPECT_EQ(back.Phi_x, r.Phi_x);
  EXPECT_EQ(back.Phi_u, r.Phi_u);
  EXPECT_EQ(back.phi_x, r.phi_x);
  EXPECT_EQ(back.phi_u, r.phi_u);
  EXPECT_THROW(deserialize_response("affsls-system-response 2\n"), std::runtime_error);
  EXPECT_THROW(deserialize_response("affsls-system-response 1\nPhi_x 2 2\n1 0\n"),
               std::runtime_error);
}

}  // namespace
}  // namespace affsls
