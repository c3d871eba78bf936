#pragma once

// Time-varying functional ARMA(m, n) processes in a truncated basis:
//   X_t = sum_j B_{t/T,j} X_{t-j} + sum_l Phi_{t/T,l} C_{(t-l)/T} eps_{t-l} + C_{t/T} eps_t.
// Operator curves are clamped outside their knot range, which gives the
// convention B_{u,j} = B_{0,j} for u < 0 and B_{1,j} for u > 1.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "funspace.hpp"

namespace lsfts {

class OperatorCurve {
 public:
  enum class Mode { constant, grid };

  OperatorCurve() = default;

  static OperatorCurve constant(Eigen::MatrixXd value);
  // Piecewise-linear interpolation between strictly increasing knots.
  static OperatorCurve grid(std::vector<double> knots, std::vector<Eigen::MatrixXd> values);

  Mode mode() const noexcept { return mode_; }
  const std::vector<double>& knots() const noexcept { return knots_; }
  const std::vector<Eigen::MatrixXd>& values() const noexcept { return values_; }
  int dim() const { return values_.empty() ? 0 : static_cast<int>(values_.front().rows()); }
  bool empty() const noexcept { return values_.empty(); }

  Eigen::MatrixXd at(double u) const;
  void at_into(double u, Eigen::MatrixXd& out) const;

 private:
  Mode mode_ = Mode::constant;
  std::vector<double> knots_;
  std::vector<Eigen::MatrixXd> values_;
};

// Independent zero-mean Gaussian coefficients; C_eps = diag(sigma^2).
struct InnovationSpec {
  Eigen::VectorXd sigma;

  Eigen::MatrixXd covariance() const { return sigma.array().square().matrix().asDiagonal(); }
  double trace() const { return sigma.squaredNorm(); }
};

struct TvFarmaModel {
  int K = 0;
  std::vector<OperatorCurve> ar;  // B_{u,1..m}
  std::vector<OperatorCurve> ma;  // Phi_{u,1..n}
  OperatorCurve c;                // C_u
  InnovationSpec innovations;
  std::string name;
  std::uint64_t seed = 0;

  int ar_order() const noexcept { return static_cast<int>(ar.size()); }
  int ma_order() const noexcept { return static_cast<int>(ma.size()); }

  // Throws InvalidArgument on dimension mismatches or negative sigmas.
  void validate() const;
  // Same model with every curve replaced by its value at u.
  TvFarmaModel frozen_at(double u) const;
  // True if every curve is constant in u.
  bool is_time_invariant() const;
};

// Fills in C = I when c is empty, then validates.
TvFarmaModel make_model(int K, std::vector<OperatorCurve> ar, std::vector<OperatorCurve> ma,
                        OperatorCurve c, InnovationSpec innovations, std::string name = "custom");

// State-space companion operator B*_u, an (mK x mK) block matrix with top
// block row [B_{u,1} ... B_{u,m}] and identity blocks on the sub-diagonal.
OpMatrix build_companion(const TvFarmaModel& model, double u);
Eigen::MatrixXd companion_matrix(const TvFarmaModel& model, double u);

struct StabilityEntry {
  double u = 0.0;
  double norm_sum = 0.0;  // sum_j ||B_{u,j}||_inf
  bool norm_sum_pass = false;
  double spectral_radius = 0.0;  // of the companion operator
  bool radius_pass = false;
  bool c_invertible = false;
};

struct StabilityReport {
  double delta = 1e-6;
  std::vector<StabilityEntry> entries;
  bool passed = false;

  std::vector<double> failing_u() const;
  double max_radius() const;
  std::string to_json() const;
};

// The authoritative criterion is spectral radius < 1 - delta at every u; the
// sum-of-norms criterion is reported as the sufficient condition.
StabilityReport check_stability(const TvFarmaModel& model, std::span<const double> u_grid,
                                double delta = 1e-6);
// All curve knots plus 101 equispaced points of [0,1].
std::vector<double> default_stability_grid(const TvFarmaModel& model);
// Throws StabilityError carrying the report when the check fails.
void require_stable(const TvFarmaModel& model, double delta = 1e-6);

// Causal MA expansion X_{t,T} = sum_l A_{t,T}(l) eps_{t-l}, computed from the
// top block row of the (augmented) companion products
//   A_{t,T}(l) = [B*_{t/T} ... B*_{(t-l+1)/T}]_{top} G_{(t-l)/T}.
// The operator-norm l1 tail sum_{l > L} ||A(l)||_inf is evaluated by
// continuing the recursion until the terms become negligible.
struct MaExpansion {
  std::vector<OpMatrix> coeffs;
  double tail = 0.0;
};
struct MaExpansionReal {
  std::vector<Eigen::MatrixXd> coeffs;
  double tail = 0.0;
};

MaExpansion ma_coefficients(const TvFarmaModel& model, long t, long T, int L);
// with_tail = false skips the tail evaluation (tail is then reported as -1).
MaExpansionReal ma_coefficients_real(const TvFarmaModel& model, long t, long T, int L, bool with_tail = true);
// Smallest L whose tail is below tol.
int ma_truncation(const TvFarmaModel& model, long t, long T, double tol);

// Coefficient series of length T; column t-1 holds X_t.
struct Series {
  Eigen::MatrixXd coeffs;

  long length() const noexcept { return static_cast<long>(coeffs.cols()); }
  int dim() const noexcept { return static_cast<int>(coeffs.rows()); }
  // 1-based time index as in X_1, ..., X_T.
  FunctionVec at(long t) const;
};

// K x count matrix of innovation draws sigma_i * z, z ~ N(0,1) i.i.d.
Eigen::MatrixXd draw_innovations(const InnovationSpec& spec, long count, std::uint64_t seed);

// Innovation columns cover times 1-burn_in, ..., T; the state starts at zero
// before the first burn-in step and curves are clamped at u = 0 while t <= 0.
Series simulate_with_innovations(const TvFarmaModel& model, long T, long burn_in,
                                 const Eigen::MatrixXd& innovations);
// Same innovations pushed through the truncated MA expansion.
Series simulate_via_ma(const TvFarmaModel& model, long T, long burn_in,
                       const Eigen::MatrixXd& innovations, int L);

inline constexpr long kDefaultBurnIn = 500;

// Checks stability, then simulates with innovations drawn from the
// innovation sub-stream of seed.
Series simulate(const TvFarmaModel& model, long T, std::uint64_t seed, long burn_in = kDefaultBurnIn);

// FAR(1) example: per knot, A_u has independent N(0, u i^{-2c} + (1-u) e^{-i-j})
// entries, B_{u,1} = eta A_u / ||A_u||_inf; innovation sd 1/|(l-1.5) pi|.
TvFarmaModel build_far1_example(double c = 3.0, double eta = 0.4, int K = 15,
                                std::uint64_t seed = 1, int knots = 64);
// FAR(2) example with eta_{u,1} = 0.4 cos(1.5 - cos(pi u)), eta_{u,2} = -0.5.
TvFarmaModel build_far2_example(int K = 15, std::uint64_t seed = 1, int knots = 64);
// eps_t itself (all operators zero); sigma defaults to the FAR(1) innovation law.
TvFarmaModel build_white_noise(int K, Eigen::VectorXd sigma = {});
// Scalar tvAR(1) with b_u = intercept + slope * u and unit innovation variance.
TvFarmaModel build_scalar_tvar1(double intercept, double slope);

Eigen::VectorXd far1_innovation_sd(int K);
Eigen::VectorXd far2_innovation_sd(int K);
double far2_peak_frequency(double u);

}  // namespace lsfts
