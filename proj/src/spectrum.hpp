#pragma once

// Exact second-order objects of a tvFARMA model.
//
// Normalization: the transfer operator carries the factor (2pi)^{-1/2} and
// F_{u,w} = A_{u,w} C_eps A_{u,w}^dagger, so a scalar AR(1) gives the classical
// sigma^2 / (2 pi |1 - b e^{-iw}|^2).

#include <string>
#include <vector>

#include "funspace.hpp"
#include "model.hpp"

namespace lsfts {

// (2pi)^{-1/2} P(u,w)^{-1} Phi(u,w) C_u with P(u,w) = I - sum_j e^{-iwj} B_{u,j}
// and Phi(u,w) = I + sum_l e^{-iwl} Phi_{u,l}. Throws NumericError when
// P(u,w) is numerically singular.
OpMatrix transfer_operator(const TvFarmaModel& model, double u, double omega);
OpMatrix true_spectral_density(const TvFarmaModel& model, double u, double omega);

// Rounded segment times t1 = floor(uT - s/2), t2 = floor(uT + s/2).
long local_time_lo(double u, long T, long s);
long local_time_hi(double u, long T, long s);

// Local autocovariance C_{u,s} = E[X_{t2} X_{t1}^H] from the MA expansion
// truncated at lag L (L < 0 picks the lag automatically). Satisfies
// C_{u,-s} = C_{u,s}^dagger. Throws NumericError when the MA tail at either
// time exceeds tol.
OpMatrix local_autocov(const TvFarmaModel& model, long T, double u, long s, int L = -1,
                       double tol = 1e-8);

// Lag at which the MA tail at time t drops below 1e-13.
int default_ma_lag(const TvFarmaModel& model, long t, long T);
// Smallest S with a geometric tail bound from the companion radius below tol.
long default_lag_cutoff(const TvFarmaModel& model, double tol = 1e-8);

struct WignerVille {
  OpMatrix value;
  // Bound on (2pi)^{-1} sum_{|s| > S_max} ||C_{u,s}||_2.
  double tail_bound = 0.0;
};

// (2pi)^{-1} sum_{|s| <= S_max} C_{u,s} e^{-iws}; S_max < 0 picks the default
// cutoff. Throws NumericError when the tail bound exceeds tol.
WignerVille wigner_ville(const TvFarmaModel& model, long T, double u, double omega,
                         long S_max = -1, int L = -1, double tol = 1e-6);

enum class Provenance { truth, wigner_ville, periodogram, smoothed };
std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

// Values stored u-major: value(iu, iw) = values[iu * omega_grid.size() + iw].
struct SpectralGrid {
  std::vector<double> u_grid;
  std::vector<double> omega_grid;
  std::vector<OpMatrix> values;
  Provenance provenance = Provenance::truth;

  int dim() const { return values.empty() ? 0 : values.front().size(); }
  std::size_t index(std::size_t iu, std::size_t iw) const { return iu * omega_grid.size() + iw; }
  const OpMatrix& at(std::size_t iu, std::size_t iw) const { return values.at(index(iu, iw)); }
  OpMatrix& at(std::size_t iu, std::size_t iw) { return values.at(index(iu, iw)); }
  // Throws InvalidArgument if the value count does not match the grids.
  void validate() const;
};

SpectralGrid truth_grid(const TvFarmaModel& model, const std::vector<double>& u_grid,
                        const std::vector<double>& omega_grid, int threads = 1);
SpectralGrid wigner_ville_grid(const TvFarmaModel& model, long T, const std::vector<double>& u_grid,
                               const std::vector<double>& omega_grid, long S_max = -1, int threads = 1);

struct GridChecks {
  bool hermitian = true;
  bool psd = true;
  double max_hermitian_defect = 0.0;
  double min_relative_eigenvalue = 0.0;
};
GridChecks check_grid(const SpectralGrid& grid, double herm_tol = 1e-10, double psd_tol = 1e-10);

// n equispaced points of [a, b] including both ends.
std::vector<double> linspace(double a, double b, std::size_t n);

}  // namespace lsfts
