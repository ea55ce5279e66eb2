#include "affsls/data_driven.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace affsls {
namespace {

int check_signal(const std::vector<VectorXd>& signal, const char* who) {
  if (signal.empty()) return 0;
  const Index p = signal[0].size();
  for (size_t k = 0; k < signal.size(); ++k) {
    if (signal[k].size() != p) {
      throw DimensionError(std::string(who) + ": sample " + std::to_string(k) +
                           " has length " + std::to_string(signal[k].size()) +
                           ", expected " + std::to_string(p));
    }
  }
  return static_cast<int>(p);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

double MembershipResiduals::max() const {
  return std::max({H1G_minus_I, onesG_minus_ones, H1_ghat, ones_ghat_minus_one});
}

MatrixXd hankel(const std::vector<VectorXd>& signal, int depth) {
  const int p = check_signal(signal, "hankel");
  const int L = static_cast<int>(signal.size());
  if (depth < 1) throw DimensionError("hankel: depth must be >= 1");
  if (L < depth) {
    throw DimensionError("hankel: signal length " + std::to_string(L) +
                         " is shorter than depth " + std::to_string(depth));
  }
  const int cols = L - depth + 1;
  MatrixXd H(static_cast<Index>(p) * depth, cols);
  for (int j = 0; j < cols; ++j) {
    for (int k = 0; k < depth; ++k) {
      H.block(static_cast<Index>(k) * p, j, p, 1) = signal[j + k];
    }
  }
  return H;
}

PeReport is_pe(const std::vector<VectorXd>& signal, int order,
               double rank_tol_ratio) {
  PeReport rep;
  if (order < 1 || static_cast<int>(signal.size()) < order) return rep;
  const MatrixXd H = hankel(signal, order);
  if (H.rows() == 0) return rep;
  Eigen::JacobiSVD<MatrixXd> svd(H);
  const VectorXd& sv = svd.singularValues();
  rep.sigma_max = sv.size() ? sv(0) : 0.0;
  if (H.cols() < H.rows()) {
    rep.sigma_min = 0.0;  // cannot have full row rank
    return rep;
  }
  rep.sigma_min = sv(sv.size() - 1);
  rep.persistently_exciting =
      rep.sigma_max > 0.0 && rep.sigma_min > rank_tol_ratio * rep.sigma_max;
  return rep;
}

int min_length_for_pe(int input_dim, int order) {
  return (input_dim + 1) * order - 1;
}

TrajectoryData generate_excitation(const AffineLTVSystem& sys, int length,
                                   int horizon, const InputBox& box,
                                   std::uint64_t seed,
                                   const ExcitationOptions& opts) {
  if (!sys.is_time_invariant()) {
    throw ExcitationError("generate_excitation: system must be time-invariant");
  }
  const int n = sys.state_dim(), m = sys.input_dim();
  const MatrixXd& A = sys.A(0);
  const MatrixXd& B = sys.B(0);
  if (!is_controllable(A, B)) {
    throw ExcitationError("generate_excitation: (A, B) is not controllable");
  }
  if (horizon < 1) throw ExcitationError("generate_excitation: horizon must be >= 1");
  if (box.lower.size() != m || box.upper.size() != m ||
      (box.upper - box.lower).minCoeff() <= 0.0) {
    throw ExcitationError("generate_excitation: input box must have " +
                          std::to_string(m) + " nonempty intervals");
  }
  const int order = n + (horizon + 1) + 1;
  const int min_len = min_length_for_pe(m, order);
  if (length < min_len) {
    throw ExcitationError("generate_excitation: length " +
                          std::to_string(length) +
                          " cannot be persistently exciting of order " +
                          std::to_string(order) + " (need at least " +
                          std::to_string(min_len) + " samples)");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
    TrajectoryData d;
    VectorXd x(n);
    for (int i = 0; i < n; ++i) {
      x(i) = opts.initial_state_scale * (2.0 * unit(rng) - 1.0);
    }
    for (int k = 0; k < length; ++k) {
      VectorXd u(m);
      for (int i = 0; i < m; ++i) {
        u(i) = box.lower(i) + (box.upper(i) - box.lower(i)) * unit(rng);
      }
      d.x_data.push_back(x);
      d.u_data.push_back(u);
      x = A * x + B * u + sys.s();
    }
    if (is_pe(d.u_data, order).persistently_exciting) {
      d.generated_by = "seed=" + std::to_string(seed) +
                       " attempt=" + std::to_string(attempt);
      return d;
    }
  }
  throw ExcitationError("generate_excitation: input not persistently exciting "
                        "of order " + std::to_string(order) + " after " +
                        std::to_string(opts.max_retries) +
                        " retries; use a longer data length");
}

double dynamics_residual(const TrajectoryData& data, const MatrixXd& A,
                         const MatrixXd& B, const VectorXd& s) {
  double worst = 0.0;
  for (int k = 0; k + 1 < data.length(); ++k) {
    const VectorXd e =
        data.x_data[k + 1] - A * data.x_data[k] - B * data.u_data[k] - s;
    worst = std::max(worst, inf_norm(e));
  }
  return worst;
}

HankelPair make_hankel_pair(const TrajectoryData& data, int horizon) {
  if (data.x_data.size() != data.u_data.size()) {
    throw DimensionError("make_hankel_pair: state and input records differ in length");
  }
  if (horizon < 1) throw DimensionError("make_hankel_pair: horizon must be >= 1");
  HankelPair h;
  h.n = check_signal(data.x_data, "make_hankel_pair");
  h.m = check_signal(data.u_data, "make_hankel_pair");
  h.T = horizon;
  h.Hx = hankel(data.x_data, horizon + 1);
  h.Hu = hankel(data.u_data, horizon + 1);
  h.H1 = h.Hx.topRows(h.n);
  h.required_pe_order = h.n + (horizon + 1) + 1;
  const PeReport pe = is_pe(data.u_data, h.required_pe_order);
  h.input_pe = pe.persistently_exciting;
  h.pe_sv_ratio = pe.ratio();
  return h;
}

RepresentResult willems_represent(const std::vector<VectorXd>& x_window,
                                  const std::vector<VectorXd>& u_window,
                                  const HankelPair& hank, double tol) {
  const int Lw = hank.T + 1;
  if (static_cast<int>(x_window.size()) != Lw ||
      static_cast<int>(u_window.size()) != Lw) {
    throw DimensionError("willems_represent: window length must equal the "
                         "Hankel depth " + std::to_string(Lw));
  }
  const VectorXd x = stack(x_window);
  const VectorXd u = stack(u_window);
  if (x.size() != hank.Hx.rows() || u.size() != hank.Hu.rows()) {
    throw DimensionError("willems_represent: window dimensions do not match");
  }
  const Index cols = hank.columns();
  MatrixXd M(hank.Hu.rows() + hank.Hx.rows() + 1, cols);
  M << hank.Hu, hank.Hx, MatrixXd::Ones(1, cols);
  VectorXd rhs(M.rows());
  rhs << u, x, 1.0;

  RepresentResult res;
  res.g = M.completeOrthogonalDecomposition().solve(rhs);
  if (!res.g.allFinite()) {
    res.status = RepresentStatus::kNumericalFailure;
    res.residual = std::numeric_limits<double>::infinity();
    return res;
  }
  res.residual = inf_norm(M * res.g - rhs);
  if (res.residual <= tol) {
    res.status = RepresentStatus::kRepresented;
  } else if (!hank.input_pe) {
    // Without excitation a miss says nothing about the window.
    res.status = RepresentStatus::kNumericalFailure;
  } else {
    res.status = RepresentStatus::kNotATrajectory;
  }
  return res;
}

MembershipResiduals representer_membership(const AffineRepresenter& rep,
                                           const MatrixXd& H1) {
  const Index n = H1.rows(), cols = H1.cols();
  if (rep.G.rows() != cols || rep.G.cols() != n || rep.g_hat.size() != cols) {
    throw DimensionError("representer_membership: G must be " +
                         std::to_string(cols) + "x" + std::to_string(n) +
                         " and g_hat of length " + std::to_string(cols));
  }
  MembershipResiduals r;
  r.H1G_minus_I = inf_norm(H1 * rep.G - MatrixXd::Identity(n, n));
  r.onesG_minus_ones =
      inf_norm(rep.G.colwise().sum() - Eigen::RowVectorXd::Ones(n));
  r.H1_ghat = inf_norm(H1 * rep.g_hat);
  r.ones_ghat_minus_one = std::abs(rep.g_hat.sum() - 1.0);
  return r;
}

ReducedResponse dd_response(const HankelPair& hank, const AffineRepresenter& rep,
                            double tol) {
  const MembershipResiduals mr = representer_membership(rep, hank.H1);
  if (!(mr.max() <= tol)) {
    throw InvalidResponse("dd_response: representer violates the membership "
                          "constraints (residual " + std::to_string(mr.max()) +
                          ")",
                          mr.max());
  }
  MatrixXd W(hank.columns(), hank.n + 1);
  W.leftCols(hank.n) =
      rep.G - rep.g_hat * Eigen::RowVectorXd::Ones(hank.n);
  W.col(hank.n) = rep.g_hat;
  ReducedResponse red;
  red.Phi_x_bar = hank.Hx * W;
  red.Phi_u_bar = hank.Hu * W;
  return red;
}

std::optional<AffineRepresenter> find_representer(const HankelPair& hank,
                                                  const ReducedResponse& red,
                                                  double tol) {
  const int n = hank.n;
  if (red.Phi_x_bar.rows() != hank.Hx.rows() ||
      red.Phi_u_bar.rows() != hank.Hu.rows() || red.Phi_x_bar.cols() != n + 1 ||
      red.Phi_u_bar.cols() != n + 1) {
    throw DimensionError("find_representer: reduced response shape mismatch");
  }
  const Index cols = hank.columns();
  MatrixXd M(hank.Hx.rows() + hank.Hu.rows() + 1, cols);
  M << hank.Hx, hank.Hu, MatrixXd::Ones(1, cols);

  // Column j < n targets the response to (e_j, 1); column n the affine part.
  const Eigen::RowVectorXd ones_n = Eigen::RowVectorXd::Ones(n);
  MatrixXd rhs(M.rows(), n + 1);
  rhs.topRows(hank.Hx.rows()) << red.Phi_x_bar.leftCols(n) +
                                     red.Phi_x_bar.col(n) * ones_n,
      red.Phi_x_bar.col(n);
  rhs.middleRows(hank.Hx.rows(), hank.Hu.rows())
      << red.Phi_u_bar.leftCols(n) + red.Phi_u_bar.col(n) * ones_n,
      red.Phi_u_bar.col(n);
  rhs.bottomRows(1).setOnes();

  const MatrixXd X = M.completeOrthogonalDecomposition().solve(rhs);
  if (!X.allFinite()) return std::nullopt;
  AffineRepresenter rep{X.leftCols(n), X.col(n)};

  if (representer_membership(rep, hank.H1).max() > tol) return std::nullopt;
  const ReducedResponse back = dd_response(hank, rep, tol);
  const double err = std::max(inf_norm(back.Phi_x_bar - red.Phi_x_bar),
                              inf_norm(back.Phi_u_bar - red.Phi_u_bar));
  if (!(err <= tol)) return std::nullopt;
  return rep;
}

void write_trajectory_csv(std::ostream& os, const TrajectoryData& data) {
  const int n = data.state_dim(), m = data.input_dim();
  for (int i = 0; i < n; ++i) os << (i ? "," : "") << 'x' << (i + 1);
  for (int i = 0; i < m; ++i) os << ',' << 'u' << (i + 1);
  os << '\n';
  os << std::setprecision(17);
  for (int k = 0; k < data.length(); ++k) {
    for (int i = 0; i < n; ++i) os << (i ? "," : "") << data.x_data[k](i);
    for (int i = 0; i < m; ++i) os << ',' << data.u_data[k](i);
    os << '\n';
  }
}

TrajectoryData read_trajectory_csv(std::istream& is, const std::string& source) {
  std::string line;
  if (!std::getline(is, line)) {
    throw std::runtime_error(source + ": empty trajectory file");
  }
  const auto header = split_csv(line);
  int n = 0, m = 0;
  for (const auto& raw : header) {
    const std::string h = trim(raw);
    const bool is_x = !h.empty() && h[0] == 'x';
    const bool is_u = !h.empty() && h[0] == 'u';
    if (is_x && m == 0 && h == "x" + std::to_string(n + 1)) {
      ++n;
    } else if (is_u && h == "u" + std::to_string(m + 1)) {
      ++m;
    } else {
      throw std::runtime_error(source + ": unexpected column '" + h +
                               "' (expected x1..xn,u1..um)");
    }
  }
  if (n == 0 || m == 0) {
    throw std::runtime_error(source + ": header must name x1..xn and u1..um");
  }
  TrajectoryData d;
  d.generated_by = "file:" + source;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (static_cast<int>(fields.size()) != n + m) {
      throw std::runtime_error(source + ": row " + std::to_string(row) +
                               " has " + std::to_string(fields.size()) +
                               " fields, expected " + std::to_string(n + m));
    }
    VectorXd x(n), u(m);
    try {
      for (int i = 0; i < n; ++i) x(i) = std::stod(fields[i]);
      for (int i = 0; i < m; ++i) u(i) = std::stod(fields[n + i]);
    } catch (const std::exception&) {
      throw std::runtime_error(source + ": row " + std::to_string(row) +
                               " is not numeric");
    }
    d.x_data.push_back(std::move(x));
    d.u_data.push_back(std::move(u));
  }
  return d;
}

}  // namespace affsls
