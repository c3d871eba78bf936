#include <cmath>
#include <numeric>

#include "doctest.h"
#include "errors.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "spectrum.hpp"
#include "test_util.hpp"

using namespace lsfts;

namespace {

Eigen::MatrixXd scalar(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

TvFarmaModel scalar_ar(std::vector<double> b, double sigma = 1.0) {
  std::vector<OperatorCurve> ar;
  for (double x : b) ar.push_back(OperatorCurve::constant(scalar(x)));
  return make_model(1, ar, {}, {}, InnovationSpec{Eigen::VectorXd::Constant(1, sigma)});
}

// A_{t,T}(l) by brute force: feed a unit impulse in coordinate k at time t-l
// through the recursion and read off X_t.
Eigen::MatrixXd impulse_response(const TvFarmaModel& m, long t, long T, int l, long burn_in) {
  Eigen::MatrixXd A(m.K, m.K);
  for (int k = 0; k < m.K; ++k) {
    Eigen::MatrixXd eps = Eigen::MatrixXd::Zero(m.K, burn_in + T);
    eps(k, t - l + burn_in - 1) = 1.0;
    A.col(k) = simulate_with_innovations(m, T, burn_in, eps).coeffs.col(t - 1);
  }
  return A;
}

TvFarmaModel random_tvarma(int K) {
  auto curve = [&](std::uint64_t s, double scale) {
    Eigen::MatrixXd a = testutil::random_rmatrix(K, K, s), b = testutil::random_rmatrix(K, K, s + 1);
    a *= scale / op_norm(a);
    b *= scale / op_norm(b);
    return OperatorCurve::grid({0.0, 0.4, 1.0}, {a, 0.5 * (a + b), b});
  };
  Eigen::MatrixXd c0 = Eigen::MatrixXd::Identity(K, K) + 0.1 * testutil::random_rmatrix(K, K, 90);
  Eigen::MatrixXd c1 = Eigen::MatrixXd::Identity(K, K) * 1.5;
  return make_model(K, {curve(1, 0.3), curve(3, 0.2)}, {curve(5, 0.4)}, OperatorCurve::grid({0.0, 1.0}, {c0, c1}),
                    InnovationSpec{Eigen::VectorXd::LinSpaced(K, 1.0, 0.5)});
}

}  // namespace

TEST_CASE("operator curves clamp and interpolate") {
  const auto c = OperatorCurve::grid({0.2, 0.6}, {scalar(1.0), scalar(3.0)});
  CHECK(c.at(0.0)(0, 0) == 1.0);
  CHECK(c.at(1.0)(0, 0) == 3.0);
  CHECK(c.at(0.4)(0, 0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(OperatorCurve::grid({0.5, 0.2}, {scalar(1.0), scalar(2.0)}), InvalidArgument);
}

TEST_CASE("companion operator") {
  const Eigen::MatrixXd B = testutil::random_rmatrix(3, 3, 1);
  const auto m1 = make_model(3, {OperatorCurve::constant(B)}, {}, {}, InnovationSpec{Eigen::VectorXd::Ones(3)});
  CHECK(companion_matrix(m1, 0.5) == B);

  const auto m2 = scalar_ar({-0.6, -0.45});
  Eigen::Matrix2d expect;
  expect << -0.6, -0.45, 1.0, 0.0;
  CHECK(companion_matrix(m2, 0.3) == expect);

  const int K = 2;
  std::vector<OperatorCurve> ar;
  for (int j = 0; j < 3; ++j) ar.push_back(OperatorCurve::constant(testutil::random_rmatrix(K, K, 10 + j)));
  const auto m3 = make_model(K, ar, {}, {}, InnovationSpec{Eigen::VectorXd::Ones(K)});
  const Eigen::MatrixXd C = companion_matrix(m3, 0.5);
  CHECK(C.rows() == 6);
  Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(4, 6);
  lower.leftCols(4) = Eigen::MatrixXd::Identity(4, 4);
  CHECK(C.bottomRows(4) == lower);
  for (int j = 0; j < 3; ++j) CHECK(C.block(0, j * K, K, K) == ar[j].at(0.5));

  CHECK_THROWS_AS(companion_matrix(make_model(1, {}, {}, {}, InnovationSpec{Eigen::VectorXd::Ones(1)}), 0.5),
                  InvalidArgument);
}

TEST_CASE("stability report") {
  const std::vector<double> grid{0.0, 0.5, 1.0};
  {
    const auto r = check_stability(scalar_ar({0.4}), grid);
    CHECK(r.passed);
    CHECK(r.entries[1].norm_sum == doctest::Approx(0.4));
    CHECK(r.entries[1].norm_sum_pass);
    CHECK(r.entries[1].spectral_radius == doctest::Approx(0.4));
  }
  {
    const auto r = check_stability(scalar_ar({0.6, 0.5}), grid);
    const double root = (0.6 + std::sqrt(0.36 + 2.0)) / 2.0;  // largest root of x^2 - 0.6x - 0.5
    CHECK_FALSE(r.passed);
    CHECK(r.entries[0].norm_sum == doctest::Approx(1.1));
    CHECK_FALSE(r.entries[0].norm_sum_pass);
    CHECK(r.entries[0].spectral_radius == doctest::Approx(root).epsilon(1e-12));
    CHECK(r.failing_u().size() == 3);
  }
  {
    const auto r = check_stability(scalar_ar({-0.6, -0.45}), grid);
    CHECK(r.passed);
    CHECK(r.entries[0].norm_sum == doctest::Approx(1.05));
    CHECK_FALSE(r.entries[0].norm_sum_pass);
    // complex pair of x^2 + 0.6x + 0.45 has modulus sqrt(0.45)
    CHECK(r.entries[0].spectral_radius == doctest::Approx(std::sqrt(0.45)).epsilon(1e-12));
  }
}

TEST_CASE("unstable models are refused with the failing u") {
  const auto m = make_model(1, {OperatorCurve::grid({0.0, 1.0}, {scalar(0.5), scalar(1.2)})}, {}, {},
                            InnovationSpec{Eigen::VectorXd::Ones(1)});
  try {
    simulate(m, 100, 1);
    FAIL("expected StabilityError");
  } catch (const StabilityError& e) {
    CHECK(std::string(e.report()).find("failing_u") != std::string::npos);
  }
  const auto r = check_stability(m, default_stability_grid(m));
  REQUIRE_FALSE(r.failing_u().empty());
  // B_u = 0.5 + 0.7u reaches radius 1 at u = 5/7
  CHECK(r.failing_u().front() == doctest::Approx(5.0 / 7.0).epsilon(0.02));
}

TEST_CASE("MA coefficients of a constant AR(1) are powers of B") {
  Eigen::MatrixXd B = testutil::random_rmatrix(3, 3, 4);
  B *= 0.7 / op_norm(B);
  const auto m = make_model(3, {OperatorCurve::constant(B)}, {}, {}, InnovationSpec{Eigen::VectorXd::Ones(3)});
  const MaExpansion e = ma_coefficients(m, 50, 100, 6);
  REQUIRE(e.coeffs.size() == 7);
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(3, 3);
  for (int l = 0; l <= 6; ++l) {
    CHECK((e.coeffs[l].mat.real() - P).cwiseAbs().maxCoeff() <= 1e-14);
    P = P * B;
  }
  CHECK(e.tail > 0.0);
  CHECK_THROWS_AS(ma_coefficients(m, 50, 100, -1), InvalidArgument);
}

TEST_CASE("A(0) is C at t/T") {
  const TvFarmaModel m = random_tvarma(3);
  const long T = 200;
  for (long t : {1L, 77L, 200L}) {
    const MaExpansion e = ma_coefficients(m, t, T, 0);
    CHECK((e.coeffs[0].mat.real() - m.c.at(static_cast<double>(t) / T)).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("MA coefficients match a brute-force impulse recursion") {
  SUBCASE("scalar tvAR(1), B_u = 0.3 + 0.4u") {
    const TvFarmaModel m = build_scalar_tvar1(0.3, 0.4);
    const long T = 100, t = 50;
    const MaExpansion e = ma_coefficients(m, t, T, 2);
    const double b = (0.3 + 0.4 * 0.5) * (0.3 + 0.4 * 0.49);
    CHECK(e.coeffs[2](0, 0).real() == doctest::Approx(b).epsilon(1e-14));
    CHECK(e.coeffs[2](0, 0).real() == doctest::Approx(impulse_response(m, t, T, 2, 10)(0, 0)).epsilon(1e-14));
  }
  SUBCASE("K=3 tvARMA(2,1) with time-varying C") {
    const TvFarmaModel m = random_tvarma(3);
    const long T = 64, t = 40;
    const MaExpansion e = ma_coefficients(m, t, T, 12);
    for (int l = 0; l <= 12; ++l)
      CHECK((e.coeffs[l].mat.real() - impulse_response(m, t, T, l, 30)).cwiseAbs().maxCoeff() <= 1e-13);
  }
}

TEST_CASE("recursion and truncated MA simulations agree") {
  const TvFarmaModel m = build_far1_example(3.0, 0.4, 5);
  const long T = 512, burn = 200;
  const Eigen::MatrixXd eps = draw_innovations(m.innovations, burn + T, 99);
  int L = 0;
  for (long t = 1 - burn; t <= T; ++t) L = std::max(L, ma_truncation(m, t, T, 1e-10));
  const MaExpansion tail_check = ma_coefficients(m, T / 2, T, L);
  CHECK(tail_check.tail < 1e-10);
  const double d = (simulate_with_innovations(m, T, burn, eps).coeffs - simulate_via_ma(m, T, burn, eps, L).coeffs)
                       .cwiseAbs()
                       .maxCoeff();
  CHECK(d < 1e-8);

  const TvFarmaModel arma = random_tvarma(3);
  const Eigen::MatrixXd e2 = draw_innovations(arma.innovations, burn + T, 5);
  int L2 = 0;
  for (long t = 1 - burn; t <= T; ++t) L2 = std::max(L2, ma_truncation(arma, t, T, 1e-10));
  CHECK((simulate_with_innovations(arma, T, burn, e2).coeffs - simulate_via_ma(arma, T, burn, e2, L2).coeffs)
            .cwiseAbs()
            .maxCoeff() < 1e-8);
}

TEST_CASE("zero operators give C-scaled white noise") {
  const Eigen::MatrixXd C = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  const auto m = make_model(2, {}, {}, OperatorCurve::constant(C), InnovationSpec{Eigen::Vector2d(1.0, 0.5)});
  const long T = 50, burn = 20;
  const Series X = simulate(m, T, 3, burn);
  const Eigen::MatrixXd eps = draw_innovations(m.innovations, burn + T, derive_seed(3, stream::innovations));
  CHECK(X.coeffs == C * eps.rightCols(T));
}

TEST_CASE("simulation is deterministic per seed") {
  const TvFarmaModel m = build_far1_example(3.0, 0.4, 7);
  const Series a = simulate(m, 256, 11), b = simulate(m, 256, 11), c = simulate(m, 256, 12);
  CHECK(a.coeffs == b.coeffs);
  CHECK(a.coeffs != c.coeffs);
}

TEST_CASE("scalar AR(1) lag-1 autocorrelation") {
  const Series X = simulate(scalar_ar({0.5}), 20000, 2024);
  const Eigen::VectorXd x = X.coeffs.row(0).transpose();
  const double mean = x.mean();
  double c0 = 0.0, c1 = 0.0;
  for (Eigen::Index t = 0; t < x.size(); ++t) {
    c0 += (x(t) - mean) * (x(t) - mean);
    if (t > 0) c1 += (x(t) - mean) * (x(t - 1) - mean);
  }
  CHECK(std::abs(c1 / c0 - 0.5) <= 0.02);
}

TEST_CASE("frozen FAR(1) output is stationary with the exact autocovariance") {
  const TvFarmaModel m = build_far1_example(3.0, 0.4, 5).frozen_at(0.3);
  const long T = 50000;
  const Series X = simulate(m, T, 8);
  const Eigen::VectorXd x = X.coeffs.row(0).transpose();
  // Long-run variance of coefficient 1 is 2 pi F_00(0).
  const double lrv = kTwoPi * true_spectral_density(m, 0.3, 0.0)(0, 0).real();
  CHECK(std::abs(x.mean()) <= 3.0 * std::sqrt(lrv / T));

  for (long s : {0L, 1L, 3L}) {
    const double c_true = local_autocov(m, T, 0.3, s)(0, 0).real();
    double c = 0.0;
    for (long t = s; t < T; ++t) c += x(t) * x(t - s);
    c /= static_cast<double>(T - s);
    // Bartlett variance of the lag-s sample autocovariance.
    double v = 0.0;
    for (long k = -40; k <= 40; ++k) {
      const double g = local_autocov(m, T, 0.3, k)(0, 0).real();
      const double gp = local_autocov(m, T, 0.3, k + s)(0, 0).real();
      const double gm = local_autocov(m, T, 0.3, k - s)(0, 0).real();
      v += g * g + gp * gm;
    }
    CHECK(std::abs(c - c_true) <= 4.0 * std::sqrt(v / T));
  }
}

TEST_CASE("FAR(1) example") {
  const TvFarmaModel m = build_far1_example(3.0, 0.4, 15, 1);
  REQUIRE(m.ar_order() == 1);
  for (const auto& B : m.ar[0].values()) CHECK(op_norm(B) == doctest::Approx(0.4).epsilon(1e-12));
  const auto r = check_stability(m, default_stability_grid(m));
  CHECK(r.passed);
  for (const auto& e : r.entries) CHECK(e.norm_sum_pass);
  const Eigen::VectorXd sd = far1_innovation_sd(15);
  for (int l = 1; l <= 15; ++l) CHECK(sd(l - 1) == doctest::Approx(1.0 / std::abs((l - 1.5) * kPi)));
  CHECK_THROWS_AS(build_far1_example(3.0, 1.2), InvalidArgument);
  // matrices depend only on the seed
  CHECK(build_far1_example(3.0, 0.4, 15, 1).ar[0].values()[5] == m.ar[0].values()[5]);
  CHECK(build_far1_example(3.0, 0.4, 15, 2).ar[0].values()[5] != m.ar[0].values()[5]);
}

TEST_CASE("FAR(2) example") {
  const TvFarmaModel m = build_far2_example(15, 1, 65);
  REQUIRE(m.ar_order() == 2);
  const auto& knots = m.ar[1].knots();
  for (std::size_t k = 0; k < knots.size(); ++k) {
    CHECK(op_norm(m.ar[1].values()[k]) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(op_norm(m.ar[0].values()[k]) ==
          doctest::Approx(std::abs(0.4 * std::cos(1.5 - std::cos(kPi * knots[k])))).epsilon(1e-12));
  }
  CHECK(knots[32] == doctest::Approx(0.5));
  CHECK(op_norm(m.ar[0].at(0.5)) == doctest::Approx(0.4 * std::cos(1.5)).epsilon(1e-12));
  const TvFarmaModel d = build_far2_example();
  const auto r = check_stability(d, d.ar[0].knots());
  CHECK(r.entries.size() == 64);
  CHECK(r.passed);
  const Eigen::VectorXd sd = far2_innovation_sd(15);
  for (int l = 1; l <= 15; ++l) CHECK(sd(l - 1) == doctest::Approx(1.0 / std::abs((l - 2.65) * kPi)));
}

TEST_CASE("seed splitting") {
  CHECK(derive_seed(1, stream::innovations) != derive_seed(1, stream::matrices));
  CHECK(derive_seed(1, stream::replication, 0) != derive_seed(1, stream::replication, 1));
  CHECK(derive_seed(7, stream::matrices) == derive_seed(7, stream::matrices));
}
