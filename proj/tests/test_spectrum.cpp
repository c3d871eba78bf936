#include <cmath>
#include <random>

#include "doctest.h"
#include "errors.hpp"
#include "model.hpp"
#include "spectrum.hpp"
#include "test_util.hpp"

using namespace lsfts;

namespace {

TvFarmaModel scalar_ar1(double b, double sigma = 1.0) {
  return make_model(1, {OperatorCurve::constant(Eigen::MatrixXd::Constant(1, 1, b))}, {}, {},
                    InnovationSpec{Eigen::VectorXd::Constant(1, sigma)});
}

TvFarmaModel white(int K, Eigen::VectorXd sigma) { return make_model(K, {}, {}, {}, InnovationSpec{sigma}); }

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("transfer operator") {
  const TvFarmaModel wn = white(4, Eigen::VectorXd::Ones(4));
  for (double w : {-2.0, 0.0, 1.3})
    CHECK(max_abs(transfer_operator(wn, 0.4, w).mat - CMatrix::Identity(4, 4) / std::sqrt(kTwoPi)) <= 1e-15);

  CHECK(std::abs(transfer_operator(scalar_ar1(0.5), 0.5, 0.0)(0, 0) - 2.0 / std::sqrt(kTwoPi)) <= 1e-14);

  const TvFarmaModel far2 = build_far2_example(6, 3);
  for (double w : {-1.0, 0.4, 2.9})
    CHECK(max_abs(transfer_operator(far2, 0.3, w).mat - transfer_operator(far2, 0.3, w + kTwoPi).mat) <= 1e-12);

  CHECK_THROWS_AS(transfer_operator(scalar_ar1(1.0), 0.5, 0.0), NumericError);
}

TEST_CASE("true spectral density closed forms") {
  const TvFarmaModel wn = white(3, Eigen::VectorXd::Ones(3));
  CHECK(max_abs(true_spectral_density(wn, 0.5, 0.7).mat - CMatrix::Identity(3, 3) / kTwoPi) <= 1e-15);
  CHECK(std::abs(true_spectral_density(scalar_ar1(0.5), 0.5, kPi)(0, 0) - 1.0 / (4.5 * kPi)) <= 1e-14);

  // tvARMA(1,1) with time-varying coefficients against the scalar formula.
  const auto m = make_model(1, {OperatorCurve::grid({0.0, 1.0}, {Eigen::MatrixXd::Constant(1, 1, 0.1),
                                                                 Eigen::MatrixXd::Constant(1, 1, 0.7)})},
                            {OperatorCurve::constant(Eigen::MatrixXd::Constant(1, 1, -0.4))},
                            OperatorCurve::constant(Eigen::MatrixXd::Constant(1, 1, 1.3)),
                            InnovationSpec{Eigen::VectorXd::Constant(1, 0.8)});
  for (double w : {0.0, 1.1, -2.5}) {
    const double b = 0.1 + 0.6 * 0.25;
    const cplx z = std::exp(cplx(0.0, -w));
    const double f = 1.3 * 1.3 * 0.64 * std::norm(1.0 - 0.4 * z) / (kTwoPi * std::norm(1.0 - b * z));
    CHECK(std::abs(true_spectral_density(m, 0.25, w)(0, 0) - f) <= 1e-14);
  }
}

TEST_CASE("spectral density symmetries at random (u, omega)") {
  const TvFarmaModel m = build_far2_example(8, 2);
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> U(0.0, 1.0), W(-kPi, kPi);
  for (int k = 0; k < 200; ++k) {
    const double u = U(g), w = W(g);
    const OpMatrix F = true_spectral_density(m, u, w);
    CHECK(is_hermitian(F, 1e-12 * std::max(1.0, op_norm(F))));
    CHECK(min_eigenvalue(F) >= -1e-10 * op_norm(F));
    CHECK(max_abs(true_spectral_density(m, u, w + kTwoPi).mat - F.mat) <= 1e-12);
    CHECK(max_abs(true_spectral_density(m, u, -w).mat - F.mat.conjugate()) <= 1e-10);
  }
}

TEST_CASE("local autocovariance closed forms") {
  const Eigen::Vector3d sd(1.0, 0.5, 2.0);
  const TvFarmaModel wn = white(3, sd);
  CHECK(max_abs(local_autocov(wn, 100, 0.5, 0).mat - CMatrix(wn.innovations.covariance().cast<cplx>())) <= 1e-15);
  for (long s : {-3L, 1L, 7L}) CHECK(max_abs(local_autocov(wn, 100, 0.5, s).mat) == 0.0);
  CHECK(std::abs(local_autocov(scalar_ar1(0.5), 1000, 0.5, 2)(0, 0) - 1.0 / 3.0) <= 1e-10);
}

TEST_CASE("local autocovariance is adjoint-symmetric in s") {
  const TvFarmaModel m = build_far1_example(3.0, 0.4, 5);
  for (long s : {1L, 2L, 5L}) {
    const OpMatrix a = local_autocov(m, 256, 0.4, s), b = local_autocov(m, 256, 0.4, -s);
    CHECK(max_abs(b.mat - a.mat.adjoint()) <= 1e-14);
  }
  CHECK(local_time_lo(0.5, 100, 3) == 48);
  CHECK(local_time_hi(0.5, 100, 3) == 51);
}

TEST_CASE("autocovariance and spectral density form a Fourier pair") {
  const TvFarmaModel m = build_far1_example(3.0, 0.4, 6).frozen_at(0.5);
  constexpr int M = 4096;
  std::vector<CMatrix> F(M);
  for (int k = 0; k < M; ++k) F[k] = true_spectral_density(m, 0.5, -kPi + kTwoPi * k / M).mat;
  for (long s = -20; s <= 20; s += 4) {
    CMatrix q = CMatrix::Zero(m.K, m.K);
    for (int k = 0; k < M; ++k) q += F[k] * std::exp(cplx(0.0, (-kPi + kTwoPi * k / M) * static_cast<double>(s)));
    q *= kTwoPi / M;
    CHECK(max_abs(local_autocov(m, 512, 0.5, s).mat - q) <= 1e-6);
  }
}

TEST_CASE("Wigner-Ville operator") {
  const Eigen::Vector2d sd(1.0, 0.3);
  const TvFarmaModel wn = white(2, sd);
  for (double w : {0.0, 1.0, 3.0})
    CHECK(max_abs(wigner_ville(wn, 128, 0.5, w).value.mat - CMatrix(wn.innovations.covariance().cast<cplx>()) / kTwoPi) <=
          1e-15);

  const TvFarmaModel frozen = build_far1_example(3.0, 0.4, 5).frozen_at(0.6);
  for (long S : {3L, 10L}) {
    const WignerVille wv = wigner_ville(frozen, 1024, 0.6, 0.8, S, -1, 1.0);
    const double d = hs_norm(OpMatrix(wv.value.mat - true_spectral_density(frozen, 0.6, 0.8).mat));
    CHECK(wv.tail_bound > 0.0);
    CHECK(d <= wv.tail_bound);
  }
  CHECK(is_hermitian(wigner_ville(frozen, 1024, 0.6, 0.8).value, 1e-12));
}

TEST_CASE("Wigner-Ville operator converges to the spectral density") {
  const TvFarmaModel m = build_far1_example(3.0, 0.4, 5);
  const int M = 64;
  auto dist = [&](long T) {
    double q = 0.0;
    for (int k = 0; k < M; ++k) {
      const double w = -kPi + kTwoPi * k / M;
      q += std::pow(hs_norm(OpMatrix(wigner_ville(m, T, 0.5, w).value.mat - true_spectral_density(m, 0.5, w).mat)), 2);
    }
    return q * kTwoPi / M;
  };
  CHECK(dist(256) > dist(4096));
}

TEST_CASE("truncated Parseval identity") {
  const TvFarmaModel m = build_far1_example(3.0, 0.4, 4);
  const long T = 512, S = 12;
  const double u = 0.5;
  double lhs = 0.0;
  for (long s = -S; s <= S; ++s) lhs += std::pow(hs_norm(local_autocov(m, T, u, s)), 2);
  // Exact for a trigonometric polynomial of degree S on M > 2S periodic points.
  const int M = 64;
  double rhs = 0.0;
  for (int k = 0; k < M; ++k)
    rhs += std::pow(hs_norm(wigner_ville(m, T, u, -kPi + kTwoPi * k / M, S, -1, 1.0).value), 2);
  rhs *= kTwoPi * kTwoPi / M;
  CHECK(std::abs(lhs - rhs) <= 1e-10 * lhs);

  // Untruncated sums differ by at most the declared tail.
  const WignerVille full = wigner_ville(m, T, u, 0.0);
  CHECK(full.tail_bound < 1e-6);
}

TEST_CASE("default lag cutoff reflects persistence") {
  CHECK(default_lag_cutoff(scalar_ar1(0.9)) > default_lag_cutoff(scalar_ar1(0.3)));
  CHECK(default_lag_cutoff(white(2, Eigen::VectorXd::Ones(2))) == 0);
}

TEST_CASE("spectral grids") {
  const TvFarmaModel m = build_far1_example(3.0, 0.4, 5);
  const auto u = linspace(0.1, 0.9, 3), w = linspace(-kPi, kPi, 9);
  const SpectralGrid g = truth_grid(m, u, w, 2);
  CHECK(g.values.size() == 27);
  CHECK(g.dim() == 5);
  CHECK(g.provenance == Provenance::truth);
  CHECK(max_abs(g.at(2, 4).mat - true_spectral_density(m, 0.9, 0.0).mat) == 0.0);
  const GridChecks c = check_grid(g);
  CHECK(c.hermitian);
  CHECK(c.psd);
  CHECK(truth_grid(m, u, w, 1).values[13].mat == g.values[13].mat);

  for (auto p : {Provenance::truth, Provenance::wigner_ville, Provenance::periodogram, Provenance::smoothed})
    CHECK(provenance_from_string(to_string(p)) == p);
  CHECK_THROWS_AS(provenance_from_string("bogus"), InvalidArgument);

  SpectralGrid bad = g;
  bad.values.pop_back();
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  CHECK(linspace(0.0, 1.0, 5)[1] == 0.25);
}
