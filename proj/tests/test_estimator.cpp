#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "errors.hpp"
#include "estimator.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "test_util.hpp"

using namespace lsfts;

namespace {

Series random_series(int K, long T, std::uint64_t seed) {
  Series s;
  s.coeffs = testutil::random_rmatrix(K, T, seed);
  return s;
}

EstimatorConfig config(int N, double b_t, double b_f, TaperSpec taper) {
  EstimatorConfig c;
  c.N = N;
  c.b_t = b_t;
  c.b_f = b_f;
  c.taper = taper;
  return c;
}

double mean(const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / x.size(); }

double variance(const std::vector<double>& x) {
  const double m = mean(x);
  double v = 0.0;
  for (double a : x) v += (a - m) * (a - m);
  return v / (x.size() - 1);
}

double median(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

}  // namespace

TEST_CASE("tapers") {
  const TaperSpec c = TaperSpec::cosine_flat(0.1);
  for (double x : {0.0, 0.03, 0.1, 0.4}) CHECK(c(x) == doctest::Approx(c(1.0 - x)));
  CHECK(c(0.5) == 1.0);
  CHECK(c(0.0) == 0.0);
  CHECK(c(1.5) == 0.0);
  CHECK(taper_h2(TaperSpec::flat()) == doctest::Approx(1.0));
  CHECK(taper_h2(TaperSpec::parabolic()) == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
  CHECK(taper_from_string("parabolic").kind == TaperSpec::Kind::parabolic);
  CHECK(taper_from_string("cosine_flat", 0.2).rho == 0.2);
  CHECK_THROWS_AS(taper_from_string("hann"), InvalidArgument);
  CHECK_THROWS_AS(TaperSpec::cosine_flat(0.0), InvalidArgument);
}

TEST_CASE("taper transforms") {
  CHECK(std::abs(taper_fft(TaperSpec::flat(), 1, 64, 0.0) - 64.0) <= 1e-12);
  CHECK(std::abs(taper_fft(TaperSpec::flat(), 1, 64, kTwoPi / 64)) <= 1e-12);

  // direct 64-term summation of the cosine-flat taper written out here
  const double rho = 0.1, w = 0.3;
  cplx direct = 0.0;
  for (int s = 0; s < 64; ++s) {
    const double x = s / 64.0, y = std::min(x, 1.0 - x);
    const double h = y < rho ? 0.5 * (1.0 - std::cos(kPi * y / rho)) : 1.0;
    direct += h * h * std::exp(cplx(0.0, -w * s));
  }
  CHECK(std::abs(taper_fft(TaperSpec::cosine_flat(rho), 2, 64, w) - direct) <= 1e-12);
}

TEST_CASE("taper transform bounds") {
  const TaperSpec t = TaperSpec::cosine_flat(0.1);
  // fit the 1/|w| envelope constant at N = 64, then assert it at larger N
  double C = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double w = 0.2 + (kPi - 0.2) * k / 200.0;
    C = std::max(C, std::abs(taper_fft(t, 1, 64, w)) * w);
  }
  for (int N : {64, 256, 1024})
    for (int k = 0; k <= 400; ++k) {
      const double w = 0.2 + (kPi - 0.2) * k / 400.0;
      const double a = std::abs(taper_fft(t, 1, N, w));
      CHECK(a <= N + 1e-9);
      CHECK(a <= 1.5 * C / w);
    }
}

TEST_CASE("taper transform convolution identity") {
  const TaperSpec t = TaperSpec::cosine_flat(0.2);
  for (int N : {64, 256, 1024}) {
    const double a = 0.37, b = -1.1;
    cplx sum = 0.0;
    for (int j = 0; j < N; ++j) {
      const double g = kTwoPi * j / N;
      sum += taper_fft(t, 1, N, a + g) * taper_fft(t, 2, N, b - g);
    }
    sum *= (kTwoPi / N) / kTwoPi;
    const cplx target = taper_fft(t, 3, N, a + b);
    CHECK(std::abs(sum - target) <= 1e-9 * std::max(1.0, std::abs(target)));
  }
}

TEST_CASE("kernel constants") {
  const KernelConstants f = kernel_constants(FreqKernelSpec{0.5});
  CHECK(std::abs(f.mass - 1.0) <= 1e-10);
  CHECK(std::abs(f.first_moment) <= 1e-10);
  CHECK(std::abs(f.kappa - 1.0 / 20.0) <= 1e-10);
  CHECK(std::abs(f.l2sq - 6.0 / 5.0) <= 1e-10);
  CHECK(FreqKernelSpec{0.5}(0.0) == doctest::Approx(1.5));
  CHECK(FreqKernelSpec{0.5}(0.6) == 0.0);

  const KernelConstants p = kernel_constants(TaperSpec::parabolic());
  CHECK(std::abs(p.kappa - 1.0 / 20.0) <= 1e-10);
  CHECK(std::abs(p.l2sq - 6.0 / 5.0) <= 1e-10);
  for (double x : {-0.4, 0.0, 0.3}) CHECK(time_kernel(TaperSpec::parabolic(), x) == doctest::Approx(6.0 * (0.25 - x * x)));

  const KernelConstants fl = kernel_constants(TaperSpec::flat());
  CHECK(std::abs(fl.mass - 1.0) <= 1e-10);
  CHECK(std::abs(fl.kappa - 1.0 / 12.0) <= 1e-10);
  CHECK(std::abs(fl.l2sq - 1.0) <= 1e-10);

  const KernelConstants c = kernel_constants(TaperSpec::cosine_flat(0.1));
  CHECK(std::abs(c.mass - 1.0) <= 1e-10);
  CHECK(std::abs(c.first_moment) <= 1e-10);
}

TEST_CASE("default bandwidths") {
  const Bandwidths b = default_bandwidths(4096);
  CHECK(b.N == 1024);
  CHECK(b.b_t == 0.25);
  CHECK(b.b_f == doctest::Approx(2.0 * std::pow(4096.0, -0.2) - 0.25));
  CHECK(default_bandwidths(512).N % 2 == 0);
  double prev = 0.0;
  for (long T : {512L, 4096L, 65536L}) {
    const Bandwidths d = default_bandwidths(T);
    const double v = d.b_t * d.b_f * static_cast<double>(T);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("estimator config validation and band") {
  CHECK_THROWS_AS(config(63, 0.1, 0.1, TaperSpec::flat()).validate(), InvalidArgument);
  CHECK_THROWS_AS(config(64, 0.1, 0.0, TaperSpec::flat()).validate(), InvalidArgument);
  const EstimatorConfig c = make_estimator_config(512);
  const auto [lo, hi] = c.band(512);
  CHECK(lo == doctest::Approx(c.N / 1024.0));
  CHECK(hi == doctest::Approx(1.0 - c.N / 1024.0));
  const auto f = c.fourier_frequencies();
  CHECK(f.size() == static_cast<std::size_t>(c.N));
  CHECK(f.front() == doctest::Approx(-kPi));
  CHECK(f[c.N / 2] == 0.0);

  const EstimatorConfig e = config(256, 0.25, 0.1, TaperSpec::flat());
  CHECK(segment_start(0.5, 1024, e) == 512 - 128 + 1);
  CHECK_THROWS_AS(segment_start(0.01, 1024, e), BoundaryError);
  CHECK_THROWS_AS(segment_start(0.99, 1024, e), BoundaryError);
  try {
    segment_start(0.01, 1024, e);
  } catch (const BoundaryError& err) {
    CHECK(err.band_lo() == doctest::Approx(0.125));
    CHECK(std::string(err.what()).find("0.125") != std::string::npos);
  }
  CHECK(wrap_angle(3.5 * kPi) == doctest::Approx(-0.5 * kPi));
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
}

TEST_CASE("local fDFT") {
  const EstimatorConfig c = config(64, 0.25, 0.2, TaperSpec::flat());
  const long T = 256;
  Series zero;
  zero.coeffs = Eigen::MatrixXd::Zero(3, T);
  CHECK(local_fdft(zero, 0.5, 0.7, c).coeffs.norm() == 0.0);

  const double w0 = kTwoPi * 5 / 64;
  Series cosine;
  cosine.coeffs.resize(1, T);
  for (long t = 1; t <= T; ++t) cosine.coeffs(0, t - 1) = std::cos(w0 * t);
  const double u = 0.4;
  const long t0 = static_cast<long>(std::floor(u * T)) - 32 + 1;
  const cplx expect = 32.0 * std::exp(cplx(0.0, w0 * t0));
  CHECK(std::abs(local_fdft(cosine, u, w0, c).coeffs(0) - expect) <= 1e-10);

  const Series X = random_series(4, T, 3);
  const EstimatorConfig cf = config(64, 0.25, 0.2, TaperSpec::cosine_flat());
  for (double w : {0.3, 1.7}) {
    const CVector a = local_fdft(X, 0.5, w, cf).coeffs, b = local_fdft(X, 0.5, -w, cf).coeffs;
    CHECK((a - b.conjugate()).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK_THROWS_AS(local_fdft(X, 0.05, 0.3, cf), BoundaryError);

  // FFT path against the direct sum at every Fourier frequency
  const SegmentTransform tr(X, 0.5, cf);
  const auto f = cf.fourier_frequencies();
  for (int j = 0; j < cf.N; j += 7)
    CHECK((tr.dft().col(j) - local_fdft(X, 0.5, f[j], cf).coeffs).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("local periodogram") {
  const EstimatorConfig c = config(64, 0.25, 0.2, TaperSpec::cosine_flat());
  Series zero;
  zero.coeffs = Eigen::MatrixXd::Zero(3, 256);
  CHECK(hs_norm(local_periodogram(zero, 0.5, 1.0, c)) == 0.0);

  const Series X = random_series(5, 256, 8);
  const OpMatrix I = local_periodogram(X, 0.5, 1.0, c);
  const Eigen::VectorXd sv = singular_values(I);
  CHECK(sv(0) > 0.0);
  CHECK(sv(1) <= 1e-12 * sv(0));
  CHECK(is_hermitian(I, 1e-14));
  CHECK(is_psd(I));

  const SegmentTransform tr(X, 0.5, c);
  const auto f = c.fourier_frequencies();
  CHECK((tr.periodogram(40).mat - local_periodogram(X, 0.5, f[40], c).mat).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("mean periodogram of scalar white noise is 1/(2 pi)") {
  const auto wn = make_model(1, {}, {}, {}, InnovationSpec{Eigen::VectorXd::Ones(1)});
  const EstimatorConfig c = config(64, 0.5, 0.2, TaperSpec::flat());
  std::vector<double> x;
  for (long r = 0; r < 5000; ++r) {
    const Series X = simulate(wn, 128, derive_seed(77, stream::replication, r), 0);
    x.push_back(local_periodogram(X, 0.5, kPi / 2, c)(0, 0).real());
  }
  CHECK(std::abs(mean(x) - 1.0 / kTwoPi) <= 3.0 * std::sqrt(variance(x) / x.size()));
}

TEST_CASE("smoothing") {
  const EstimatorConfig c = config(64, 0.25, 0.3, TaperSpec::cosine_flat());
  const auto w = smoothing_weights(0.4, c);
  CHECK(w.size() == 64);
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
  for (double x : w) CHECK(x >= 0.0);
  // circular wrap: weights at pi and -pi coincide with those near the seam
  const auto a = smoothing_weights(kPi - 0.01, c), b = smoothing_weights(-kPi - 0.01 + kTwoPi, c);
  for (int j = 0; j < 64; ++j) CHECK(a[j] == doctest::Approx(b[j]));
  CHECK(a[0] > 0.0);

  const OpMatrix K(testutil::random_cmatrix(3, 3, 2));
  const std::vector<OpMatrix> constant(64, K);
  CHECK((smooth_periodograms(constant, 1.1, c).mat - K.mat).cwiseAbs().maxCoeff() <= 1e-14);

  const Series X = random_series(4, 512, 12);
  const OpMatrix F = smooth_estimate(X, 0.5, 0.9, c);
  CHECK(is_hermitian(F, 1e-13));
  CHECK(is_psd(F));
  const SegmentTransform tr(X, 0.5, c);
  CHECK((tr.smoothed(0.9).mat - F.mat).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(std::abs(tr.smoothed_entry(0.9, 1, 2) - F(1, 2)) <= 1e-12);
}

TEST_CASE("estimate grid") {
  const Series X = random_series(3, 512, 21);
  const EstimatorConfig c = make_estimator_config(512);
  const std::vector<double> u{0.3, 0.5, 0.7}, w{-1.0, 0.0, 2.0};
  const SpectralGrid g = estimate_grid(X, c, u, w, 2);
  CHECK(g.provenance == Provenance::smoothed);
  CHECK((g.at(1, 2).mat - smooth_estimate(X, 0.5, 2.0, c).mat).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(estimate_grid(X, c, u, w, 1).values[4].mat == g.values[4].mat);
  const GridChecks chk = check_grid(g);
  CHECK(chk.hermitian);
  CHECK(chk.psd);
  const SpectralGrid p = periodogram_grid(X, c, u, w, 1);
  CHECK(p.provenance == Provenance::periodogram);
  CHECK_THROWS_AS(estimate_grid(X, c, {0.01}, w), BoundaryError);
}

TEST_CASE("estimator error shrinks with T for the FAR(1) example") {
  const TvFarmaModel m = build_far1_example();
  const OpMatrix F = true_spectral_density(m, 0.25, 0.0);
  auto med = [&](long T) {
    const EstimatorConfig c = make_estimator_config(T, TaperSpec::parabolic());
    std::vector<double> e;
    for (long r = 0; r < 20; ++r) {
      const Series X = simulate(m, T, derive_seed(5, stream::replication, r));
      e.push_back(hs_norm(OpMatrix(smooth_estimate(X, 0.25, 0.0, c).mat - F.mat)) / hs_norm(F));
    }
    return median(e);
  };
  CHECK(med(512) < med(64));
}

TEST_CASE("white-noise estimator mean is flat at every Fourier frequency") {
  const auto wn = make_model(1, {}, {}, {}, InnovationSpec{Eigen::VectorXd::Ones(1)});
  const long T = 512;
  const EstimatorConfig c = make_estimator_config(T);
  const long R = 400;
  Eigen::MatrixXd v(R, c.N);
  for (long r = 0; r < R; ++r) {
    const Series X = simulate(wn, T, derive_seed(31, stream::replication, r));
    const SegmentTransform tr(X, 0.5, c);
    const auto f = c.fourier_frequencies();
    for (int j = 0; j < c.N; ++j) v(r, j) = tr.smoothed_entry(f[j], 0, 0).real();
  }
  int outside = 0;
  for (int j = 0; j < c.N; ++j) {
    const Eigen::VectorXd col = v.col(j);
    const double m = col.mean();
    const double se = std::sqrt((col.array() - m).square().sum() / (R - 1) / R);
    outside += std::abs(m - 1.0 / kTwoPi) > 3.0 * se;
  }
  CHECK(outside == 0);
}

TEST_CASE("the raw periodogram is not consistent") {
  const auto wn = make_model(1, {}, {}, {}, InnovationSpec{Eigen::VectorXd::Ones(1)});
  auto var_at = [&](long T) {
    const EstimatorConfig c = config(static_cast<int>(T / 8), 0.125, 0.1, TaperSpec::cosine_flat());
    std::vector<double> x;
    for (long r = 0; r < 400; ++r) {
      const Series X = simulate(wn, T, derive_seed(T, stream::replication, r), 0);
      x.push_back(local_periodogram(X, 0.5, 1.0, c)(0, 0).real());
    }
    return variance(x);
  };
  const double ratio = var_at(4096) / var_at(512);
  CHECK(ratio >= 0.5);
  CHECK(ratio <= 2.0);
}
