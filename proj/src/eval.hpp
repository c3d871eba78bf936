#pragma once

// Monte Carlo validation of the estimator: IMSE, bias expansion, covariance
// limits, Gaussianity of the centred estimator and the local stationarity
// coupling bound.
//
// Replication r simulates with seed derive_seed(seed, stream::replication, r);
// results are written into per-replication slots and reduced in index order,
// so reports do not depend on the thread count.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "estimator.hpp"
#include "json.hpp"
#include "model.hpp"
#include "spectrum.hpp"

namespace lsfts {

struct McQuantity {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double reference = 0.0;
  std::string rule;
  bool passed = true;
};

struct McReport {
  std::string name;
  long replications = 0;
  std::uint64_t seed = 0;
  std::vector<McQuantity> quantities;
  nlohmann::json details = nlohmann::json::object();
  bool passed = true;

  const McQuantity& quantity(const std::string& name) const;
  nlohmann::json to_json() const;
};

struct ImseResult {
  double imse = 0.0;                   // mean over u of the per-u IMSE
  std::vector<double> per_u;           // int E||Fhat - F||_2^2 dw
  std::vector<double> pointwise_mse;   // u-major, aligned with the grids
};

// Periodic rule when omega_grid is a full uniform grid of [-pi, pi), else the
// trapezoid rule over the given points. Throws InvalidArgument on mismatched grids.
ImseResult imse(const SpectralGrid& est, const SpectralGrid& truth);
ImseResult imse(const std::vector<SpectralGrid>& estimates, const SpectralGrid& truth);

std::uint64_t replication_seed(std::uint64_t seed, long r);

// E[Fhat_{u,w}] computed exactly from the MA expansion of the simulated
// process (zero start burn_in steps before t = 1).
OpMatrix exact_estimator_mean(const TvFarmaModel& model, long T, double u, double omega,
                              const EstimatorConfig& cfg, long burn_in = kDefaultBurnIn);

struct SecondOrderTruth {
  double value = 0.0;
  double d2u = 0.0;
  double d2w = 0.0;
  bool richardson_ok = true;
};

// Real part of entry (m, n) of F and its second derivatives by 5-point central
// differences with step h, checked against step h/2 to 1%.
SecondOrderTruth truth_derivatives(const TvFarmaModel& model, double u, double omega, int m, int n,
                                   double h = 1e-3);

struct McOptions {
  long T = 4096;
  long R = 500;
  std::uint64_t seed = 1;
  long burn_in = kDefaultBurnIn;
  int threads = 1;
};

// Monte Carlo mean of Re Fhat_{mn} at each (u, w) against the zeroth-order
// prediction F and the second-order prediction
//   F + b_t^2 kappa_t d2u F / 2 + b_f^2 kappa_f d2w F / 2.
// With control_variate, each replication is coupled with the frozen process at
// u on identical innovations, whose estimator mean is known exactly.
McReport mc_mean_bias(const TvFarmaModel& model, const EstimatorConfig& cfg, const McOptions& opt,
                      const std::vector<std::pair<double, double>>& points, int m = 0, int n = 0,
                      bool control_variate = false);

// Covariance limit 2 pi ||K_t||^2 ||K_f||^2 [eta(w1 - w2) F_{mm'}(w1) F_{nn'}(-w1)
//                                              + eta(w1 + w2) F_{mn'}(w1) F_{nm'}(-w1)].
cplx covariance_limit(const TvFarmaModel& model, const EstimatorConfig& cfg, double u, double w1, double w2,
                      std::pair<int, int> p1, std::pair<int, int> p2);

// b_t b_f T cov(Fhat_{p1}(w1), Fhat_{p2}(w2)) against covariance_limit; each
// spec is (w1, w2, p1, p2).
struct CovarianceSpec {
  double w1 = 0.0;
  double w2 = 0.0;
  std::pair<int, int> p1{0, 0};
  std::pair<int, int> p2{0, 0};
};
McReport mc_covariance(const TvFarmaModel& model, const EstimatorConfig& cfg, const McOptions& opt, double u,
                       const std::vector<CovarianceSpec>& specs, double rel_band = 0.25);

struct MomentTest {
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double z_skew = 0.0;
  double z_kurt = 0.0;
  double p_skew = 1.0;
  double p_kurt = 1.0;
};
MomentTest moment_test(const std::vector<double>& x);

// Skewness and excess-kurtosis z-tests on the real and imaginary parts of
// sqrt(b_t b_f T) (Fhat_{mn} - mean). Imaginary parts of diagonal entries are
// identically zero and skipped. The level alpha is split over all tests when
// bonferroni is set.
McReport mc_normality(const TvFarmaModel& model, const EstimatorConfig& cfg, const McOptions& opt, double u,
                      double omega, const std::vector<std::pair<int, int>>& projections, double alpha = 0.01,
                      bool bonferroni = true);

// Couples X_{t,T} with the frozen process at u on identical innovations and
// reports, per T, the mean and max over t of E|P_t|^2 with
// P_t = ||X_{t,T} - X_t^(u)|| / (|t/T - u| + 1/T), plus the slope of
// log mean E|P|^2 against log T.
McReport local_stationarity_check(const TvFarmaModel& model, double u, const std::vector<long>& T_list, long R,
                                  std::uint64_t seed, int threads = 1, double slope_tol = 0.15,
                                  long burn_in = kDefaultBurnIn);

// Least-squares slope of y against x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace lsfts
