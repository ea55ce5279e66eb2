#pragma once

// Behavioral representation of noiseless time-invariant affine systems from
// a single recorded trajectory: Hankel matrices, persistency of excitation,
// the affine fundamental lemma, and the data-driven reduced response.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "affsls/lifted.hpp"
#include "affsls/sls.hpp"

namespace affsls {

struct TrajectoryData {
  std::vector<VectorXd> x_data;
  std::vector<VectorXd> u_data;
  std::string generated_by;

  int length() const { return static_cast<int>(x_data.size()); }
  int state_dim() const { return x_data.empty() ? 0 : static_cast<int>(x_data[0].size()); }
  int input_dim() const { return u_data.empty() ? 0 : static_cast<int>(u_data[0].size()); }
};

// Depth-(T+1) Hankel matrices of a recorded trajectory.
struct HankelPair {
  int n = 0;
  int m = 0;
  int T = 0;
  MatrixXd Hx;  // n(T+1) x (L-T)
  MatrixXd Hu;  // m(T+1) x (L-T)
  MatrixXd H1;  // first n rows of Hx
  // Excitation of the input at the order the data-driven characterization
  // needs, n + (T+1) + 1.
  int required_pe_order = 0;
  bool input_pe = false;
  double pe_sv_ratio = 0.0;

  Index columns() const { return Hx.cols(); }
};

// Columns are data windows, the representer picks combinations of them.
struct AffineRepresenter {
  MatrixXd G;      // (L-T) x n
  VectorXd g_hat;  // L-T
};

struct MembershipResiduals {
  double H1G_minus_I = 0.0;
  double onesG_minus_ones = 0.0;
  double H1_ghat = 0.0;
  double ones_ghat_minus_one = 0.0;

  double max() const;
};

struct PeReport {
  bool persistently_exciting = false;
  double sigma_min = 0.0;
  double sigma_max = 0.0;

  double ratio() const { return sigma_max > 0.0 ? sigma_min / sigma_max : 0.0; }
};

struct InputBox {
  VectorXd lower;
  VectorXd upper;
};

class ExcitationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RepresentStatus { kRepresented, kNotATrajectory, kNumericalFailure };

struct RepresentResult {
  RepresentStatus status = RepresentStatus::kNumericalFailure;
  VectorXd g;
  double residual = 0.0;
};

inline constexpr double kPeRankTolRatio = 1e-9;
inline constexpr double kMembershipTol = 1e-8;
inline constexpr double kRepresentTol = 1e-8;

MatrixXd hankel(const std::vector<VectorXd>& signal, int depth);

PeReport is_pe(const std::vector<VectorXd>& signal, int order,
               double rank_tol_ratio = kPeRankTolRatio);

// Smallest data length for which an m-channel input can be persistently
// exciting of the given order.
int min_length_for_pe(int input_dim, int order);

struct ExcitationOptions {
  int max_retries = 20;
  double initial_state_scale = 1.0;
};

// Rolls the noiseless dynamics from a seeded random initial state under
// independent uniform inputs, resampling until the input is persistently
// exciting of order n + (horizon+1) + 1.
TrajectoryData generate_excitation(const AffineLTVSystem& sys, int length,
                                   int horizon, const InputBox& box,
                                   std::uint64_t seed,
                                   const ExcitationOptions& opts = {});

// Max deviation of the recorded samples from the given dynamics.
double dynamics_residual(const TrajectoryData& data, const MatrixXd& A,
                         const MatrixXd& B, const VectorXd& s);

HankelPair make_hankel_pair(const TrajectoryData& data, int horizon);

// Least-squares search for g with [Hu; Hx; 1^T] g = [u; x; 1] over a
// Hankel pair whose depth equals the window length.
RepresentResult willems_represent(const std::vector<VectorXd>& x_window,
                                  const std::vector<VectorXd>& u_window,
                                  const HankelPair& hank,
                                  double tol = kRepresentTol);

MembershipResiduals representer_membership(const AffineRepresenter& rep,
                                           const MatrixXd& H1);

// [Hx; Hu] [G - g_hat 1^T, g_hat]. Throws InvalidResponse if the representer
// is not a member of the admissible set.
ReducedResponse dd_response(const HankelPair& hank, const AffineRepresenter& rep,
                            double tol = kMembershipTol);

// Representer reproducing a given reduced response, found by least squares
// against the Hankel pair with the membership rows appended. Returns nullopt
// if the best fit misses by more than tol.
std::optional<AffineRepresenter> find_representer(const HankelPair& hank,
                                                  const ReducedResponse& red,
                                                  double tol = kMembershipTol);

// Delimited text, one sample per row: x1..xn,u1..um with a header row.
void write_trajectory_csv(std::ostream& os, const TrajectoryData& data);
TrajectoryData read_trajectory_csv(std::istream& is, const std::string& source);

}  // namespace affsls
