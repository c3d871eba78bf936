#pragma once

// Tapered segmented functional DFT estimator of the time-varying spectral
// density operator.
//
//   D_{u,w}  = sum_{s=0}^{N-1} h(s/N) X_{floor(uT)-N/2+s+1} e^{-iws}
//   I_{u,w}  = D_{u,w} D_{u,w}^H / (2 pi H_{2,N}(0))
//   Fhat_{u,w} = sum_j W_j I_{u,lambda_j},  W_j ∝ K_f(wrap(w - lambda_j) / b_f)
//
// with lambda_j = 2 pi (j - N/2) / N the Fourier frequencies and the weights
// normalized to sum to one.

#include <string>
#include <utility>
#include <vector>

#include "funspace.hpp"
#include "model.hpp"
#include "spectrum.hpp"

namespace lsfts {

struct TaperSpec {
  enum class Kind { flat, cosine_flat, parabolic };

  Kind kind = Kind::cosine_flat;
  double rho = 0.1;  // rise fraction of the cosine-flat taper

  static TaperSpec flat() { return {Kind::flat, 0.0}; }
  static TaperSpec cosine_flat(double rho = 0.1);
  // h(x) = 2 sqrt(x (1 - x)); its time kernel is 6 (1/4 - x^2).
  static TaperSpec parabolic() { return {Kind::parabolic, 0.0}; }

  std::string name() const;
  // h(x), zero outside [0,1].
  double operator()(double x) const;
  // Points of [0,1] where h is not smooth.
  std::vector<double> breakpoints() const;
};

TaperSpec taper_from_string(const std::string& name, double rho = 0.1);

// Epanechnikov kernel with half-width w: 3/(4w) (1 - (x/w)^2) on [-w, w].
// The default w = 1/2 gives 6 (1/4 - x^2).
struct FreqKernelSpec {
  double half_width = 0.5;

  std::string name() const { return "epanechnikov"; }
  double operator()(double x) const;
};

struct KernelConstants {
  double mass = 0.0;
  double first_moment = 0.0;
  double kappa = 0.0;  // int x^2 K
  double l2sq = 0.0;   // int K^2
};

KernelConstants kernel_constants(const FreqKernelSpec& kernel);
// Constants of the induced time kernel K_t(x) = h(x + 1/2)^2 / H_2 on [-1/2, 1/2].
KernelConstants kernel_constants(const TaperSpec& taper);
// H_2 = int_0^1 h(x)^2 dx.
double taper_h2(const TaperSpec& taper);
double time_kernel(const TaperSpec& taper, double x);

// H_{k,N}(w) = sum_{s=0}^{N-1} h(s/N)^k e^{-iws}.
cplx taper_fft(const TaperSpec& taper, int k, int N, double omega);

struct Bandwidths {
  int N = 0;
  double b_t = 0.0;
  double b_f = 0.0;
};

// N = nearest even integer to T^{5/6}, b_t = N/T, b_f = 2 T^{-1/5} - b_t.
Bandwidths default_bandwidths(long T);

struct EstimatorConfig {
  int N = 0;
  double b_t = 0.0;
  double b_f = 0.0;
  TaperSpec taper;
  FreqKernelSpec fkernel;

  // Throws InvalidArgument on odd or non-positive N or bandwidths outside (0,1].
  void validate() const;
  // Valid estimation band [N/(2T), 1 - N/(2T)].
  std::pair<double, double> band(long T) const;
  std::vector<double> fourier_frequencies() const;
};

EstimatorConfig make_estimator_config(long T, TaperSpec taper = TaperSpec::cosine_flat());

// First time index (1-based) of the segment centred at u; throws BoundaryError
// when the segment leaves [1, T].
long segment_start(double u, long T, const EstimatorConfig& cfg);

// Wraps to (-pi, pi].
double wrap_angle(double x);

FunctionVec local_fdft(const Series& X, double u, double omega, const EstimatorConfig& cfg);
OpMatrix local_periodogram(const Series& X, double u, double omega, const EstimatorConfig& cfg);

// Normalized frequency weights over the N Fourier frequencies; throws
// InvalidArgument if all vanish.
std::vector<double> smoothing_weights(double omega, const EstimatorConfig& cfg);

// Smooths periodogram values given on the Fourier frequencies.
OpMatrix smooth_periodograms(const std::vector<OpMatrix>& periodograms, double omega, const EstimatorConfig& cfg);

// fDFTs of one segment at all Fourier frequencies (column j <-> lambda_j),
// computed with one FFT per coefficient.
class SegmentTransform {
 public:
  SegmentTransform(const Series& X, double u, const EstimatorConfig& cfg);
  // Uses only the given coefficients (0-based rows of X).
  SegmentTransform(const Series& X, double u, const EstimatorConfig& cfg, const std::vector<int>& rows);

  const CMatrix& dft() const noexcept { return d_; }
  double h2() const noexcept { return h2_; }

  OpMatrix periodogram(int j) const;
  OpMatrix smoothed(double omega) const;
  // Smoothed entry (a, b) for row positions a, b of this transform.
  cplx smoothed_entry(double omega, int a, int b) const;

 private:
  void compute(const Series& X, double u, const std::vector<int>& rows);

  EstimatorConfig cfg_;
  CMatrix d_;
  double h2_ = 0.0;
};

OpMatrix smooth_estimate(const Series& X, double u, double omega, const EstimatorConfig& cfg);

SpectralGrid estimate_grid(const Series& X, const EstimatorConfig& cfg, const std::vector<double>& u_grid,
                           const std::vector<double>& omega_grid, int threads = 1);
SpectralGrid periodogram_grid(const Series& X, const EstimatorConfig& cfg, const std::vector<double>& u_grid,
                              const std::vector<double>& omega_grid, int threads = 1);

}  // namespace lsfts
