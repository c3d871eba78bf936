#include <cmath>
#include <random>

#include "doctest.h"
#include "errors.hpp"
#include "eval.hpp"
#include "rng.hpp"

using namespace lsfts;

namespace {

TvFarmaModel white(int K) { return make_model(K, {}, {}, {}, InnovationSpec{Eigen::VectorXd::LinSpaced(K, 1.0, 0.5)}); }

std::vector<double> periodic_grid(int n) {
  std::vector<double> w(n);
  for (int k = 0; k < n; ++k) w[k] = -kPi + kTwoPi * k / n;
  return w;
}

McOptions options(long T, long R, std::uint64_t seed = 3) {
  McOptions o;
  o.T = T;
  o.R = R;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_CASE("imse basics") {
  const TvFarmaModel m = build_far1_example(3.0, 0.4, 4);
  const SpectralGrid g = truth_grid(m, {0.3, 0.6}, periodic_grid(32));
  CHECK(imse(g, g).imse == 0.0);

  SpectralGrid p = g;
  const double delta = 0.01;
  for (auto& v : p.values) v.mat += delta * CMatrix::Identity(4, 4);
  const ImseResult r = imse(p, g);
  CHECK(r.imse == doctest::Approx(kTwoPi * delta * delta * 4).epsilon(1e-12));
  CHECK(r.per_u.size() == 2);
  CHECK(r.pointwise_mse.size() == 64);
  CHECK(imse(g, p).imse == r.imse);

  // trapezoid rule on a closed grid gives the same closed form
  const SpectralGrid c = truth_grid(m, {0.5}, linspace(-kPi, kPi, 33));
  SpectralGrid cp = c;
  for (auto& v : cp.values) v.mat += delta * CMatrix::Identity(4, 4);
  CHECK(imse(cp, c).imse == doctest::Approx(kTwoPi * delta * delta * 4).epsilon(1e-12));

  // expectation over several estimates
  SpectralGrid q = g;
  for (auto& v : q.values) v.mat -= delta * CMatrix::Identity(4, 4);
  CHECK(imse(std::vector<SpectralGrid>{p, q}, g).imse == doctest::Approx(r.imse).epsilon(1e-12));

  const SpectralGrid other = truth_grid(m, {0.3, 0.7}, periodic_grid(32));
  CHECK_THROWS_AS(imse(other, g), InvalidArgument);
}

TEST_CASE("imse is nonnegative and symmetric") {
  const TvFarmaModel m = build_far1_example(3.0, 0.4, 4);
  const auto w = periodic_grid(16);
  const SpectralGrid g = truth_grid(m, {0.5}, w);
  const Series X = simulate(m, 512, 4);
  const SpectralGrid e = estimate_grid(X, make_estimator_config(512), {0.5}, w);
  CHECK(imse(e, g).imse > 0.0);
  CHECK(imse(e, g).imse == doctest::Approx(imse(g, e).imse).epsilon(1e-14));
}

TEST_CASE("second derivatives of the truth") {
  const TvFarmaModel m = build_scalar_tvar1(0.2, 0.4);
  const double b = 0.4;
  const SecondOrderTruth t = truth_derivatives(m, 0.5, 0.0, 0, 0);
  CHECK(t.value == doctest::Approx(1.0 / (kTwoPi * (1 - b) * (1 - b))).epsilon(1e-12));
  CHECK(t.d2u == doctest::Approx(6.0 * 0.16 / (kTwoPi * std::pow(1 - b, 4))).epsilon(1e-6));
  CHECK(t.d2w == doctest::Approx(-2.0 * b / (kTwoPi * std::pow(1 - b, 4))).epsilon(1e-6));
  CHECK(t.richardson_ok);

  const TvFarmaModel frozen = build_far1_example(3.0, 0.4, 4).frozen_at(0.4);
  CHECK(std::abs(truth_derivatives(frozen, 0.4, 0.7, 1, 1).d2u) <= 1e-8);
}

TEST_CASE("exact estimator mean") {
  const TvFarmaModel wn = white(3);
  const EstimatorConfig cfg = make_estimator_config(1024);
  const OpMatrix e = exact_estimator_mean(wn, 1024, 0.5, 0.8, cfg);
  CHECK((e.mat - wn.innovations.covariance().cast<cplx>() / kTwoPi).cwiseAbs().maxCoeff() <= 1e-14);

  // Monte Carlo check on a persistent scalar AR(1)
  const auto ar = make_model(1, {OperatorCurve::constant(Eigen::MatrixXd::Constant(1, 1, 0.6))}, {}, {},
                             InnovationSpec{Eigen::VectorXd::Ones(1)});
  const long T = 512, R = 600;
  const EstimatorConfig c = make_estimator_config(T);
  const double exact = exact_estimator_mean(ar, T, 0.5, 0.3, c).mat(0, 0).real();
  double s = 0.0, s2 = 0.0;
  for (long r = 0; r < R; ++r) {
    const double x = smooth_estimate(simulate(ar, T, replication_seed(9, r)), 0.5, 0.3, c)(0, 0).real();
    s += x;
    s2 += x * x;
  }
  const double mean = s / R, se = std::sqrt((s2 / R - mean * mean) / (R - 1));
  CHECK(std::abs(mean - exact) <= 3.0 * se);
}

TEST_CASE("mean bias on white noise uses the flat rule") {
  const McReport r = mc_mean_bias(white(2), make_estimator_config(1024), options(1024, 300), {{0.5, 1.0}, {0.3, 2.0}});
  CHECK(r.passed);
  REQUIRE(r.quantities.size() == 2);
  CHECK(r.quantities[0].rule == "|mean - F| <= 3 SE");
  CHECK(r.quantities[0].reference == doctest::Approx(1.0 / kTwoPi));
}

TEST_CASE("mean bias control variate is consistent with the plain mean") {
  const TvFarmaModel m = build_scalar_tvar1(0.2, 0.4);
  const McReport r =
      mc_mean_bias(m, make_estimator_config(1024), options(1024, 200), {{0.5, 0.0}}, 0, 0, true);
  const auto& p = r.details["points"][0];
  const double cv = p["cv_mean"], cv_se = p["cv_se"], exact = p["exact_mean"];
  const double mc = p["mc_mean"], mc_se = p["mc_se"];
  CHECK(cv_se < mc_se);
  CHECK(std::abs(cv - exact) <= 4.0 * cv_se);
  CHECK(std::abs(mc - exact) <= 4.0 * mc_se);
}

TEST_CASE("covariance limits on white noise") {
  const std::vector<CovarianceSpec> specs = {{kPi / 2, kPi / 2, {0, 0}, {0, 0}},
                                             {kPi / 2, -kPi / 2, {0, 0}, {0, 0}},
                                             {kPi / 2, kPi / 4, {0, 0}, {0, 0}},
                                             {kPi / 2, kPi / 4, {0, 1}, {1, 2}}};
  const TvFarmaModel wn = white(3);
  const EstimatorConfig cfg = make_estimator_config(2048);
  const McReport r = mc_covariance(wn, cfg, options(2048, 600), 0.5, specs);
  CHECK(r.passed);
  const double F00 = 1.0 / kTwoPi;
  const double lim = kTwoPi * kernel_constants(cfg.taper).l2sq * kernel_constants(cfg.fkernel).l2sq * F00 * F00;
  CHECK(std::abs(covariance_limit(wn, cfg, 0.5, kPi / 2, kPi / 2, {0, 0}, {0, 0}) - lim) <= 1e-14);
  CHECK(std::abs(covariance_limit(wn, cfg, 0.5, kPi / 2, -kPi / 2, {0, 0}, {0, 0}) - lim) <= 1e-14);
  CHECK(std::abs(covariance_limit(wn, cfg, 0.5, kPi / 2, kPi / 4, {0, 0}, {0, 0})) == 0.0);
}

TEST_CASE("moment tests") {
  std::mt19937_64 g(1);
  std::normal_distribution<double> n;
  std::exponential_distribution<double> e;
  std::vector<double> a(2000), b(2000);
  for (auto& x : a) x = n(g);
  for (auto& x : b) x = e(g);
  const MomentTest ta = moment_test(a), tb = moment_test(b);
  CHECK(ta.p_skew > 0.01);
  CHECK(ta.p_kurt > 0.01);
  CHECK(tb.skewness == doctest::Approx(2.0).epsilon(0.25));
  CHECK(tb.p_skew < 1e-6);
  CHECK_THROWS_AS(moment_test({1.0, 2.0}), InvalidArgument);
}

TEST_CASE("normality of off-diagonal projections on white noise") {
  const TvFarmaModel wn = white(3);
  const McReport r =
      mc_normality(wn, make_estimator_config(4096), options(4096, 400), 0.5, 1.0, {{0, 1}, {0, 2}, {1, 2}});
  CHECK(r.passed);
  CHECK(r.details["tests"].size() == 6);

  // small T with wide bandwidths: the report is produced, kurtosis is informational
  EstimatorConfig tiny;
  tiny.N = 16;
  tiny.b_t = 0.5;
  tiny.b_f = 1.0;
  const McReport s = mc_normality(wn, tiny, options(32, 400), 0.5, 1.0, {{0, 0}});
  CHECK(s.details["tests"].size() == 1);
  CHECK(s.details["tests"][0].contains("excess_kurtosis"));
}

TEST_CASE("local stationarity check") {
  const TvFarmaModel frozen = build_far1_example(3.0, 0.4, 5).frozen_at(0.5);
  const McReport z = local_stationarity_check(frozen, 0.5, {256, 1024}, 5, 1);
  for (const auto& p : z.details["per_T"]) CHECK(p["max_E_P2"].get<double>() == 0.0);
  CHECK(z.passed);

  const McReport r = local_stationarity_check(build_far1_example(), 0.5, {256, 1024, 4096}, 30, 2);
  CHECK(std::isfinite(r.details["per_T"][0]["max_E_P2"].get<double>()));
  CHECK(std::abs(r.details["slope_mean"].get<double>()) <= 0.15);
  CHECK(r.passed);
}

TEST_CASE("reports are deterministic and thread-count independent") {
  const TvFarmaModel m = build_far1_example(3.0, 0.4, 4);
  const EstimatorConfig cfg = make_estimator_config(512);
  McOptions a = options(512, 24), b = options(512, 24);
  b.threads = 3;
  const auto ja = mc_normality(m, cfg, a, 0.5, 1.0, {{0, 1}}).to_json();
  const auto jb = mc_normality(m, cfg, b, 0.5, 1.0, {{0, 1}}).to_json();
  CHECK(ja == jb);
  CHECK(mc_covariance(m, cfg, a, 0.5, {{1.0, 1.0, {0, 0}, {0, 0}}}).to_json() ==
        mc_covariance(m, cfg, a, 0.5, {{1.0, 1.0, {0, 0}, {0, 0}}}).to_json());
  CHECK(replication_seed(1, 0) == derive_seed(1, stream::replication, 0));
  CHECK(replication_seed(1, 0) != replication_seed(1, 1));
  CHECK(ls_slope({0.0, 1.0, 2.0}, {1.0, 3.0, 5.0}) == doctest::Approx(2.0));
}
