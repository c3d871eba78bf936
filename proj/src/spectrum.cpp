#include "spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/LU>

#include "errors.hpp"
#include "parallel.hpp"

namespace lsfts {

OpMatrix transfer_operator(const TvFarmaModel& model, double u, double omega) {
  const int K = model.K;
  CMatrix P = CMatrix::Identity(K, K);
  for (int j = 1; j <= model.ar_order(); ++j)
    P -= std::polar(1.0, -omega * j) * model.ar[static_cast<std::size_t>(j - 1)].at(u).cast<cplx>();
  CMatrix Phi = CMatrix::Identity(K, K);
  for (int l = 1; l <= model.ma_order(); ++l)
    Phi += std::polar(1.0, -omega * l) * model.ma[static_cast<std::size_t>(l - 1)].at(u).cast<cplx>();
  const CMatrix C = model.c.at(u).cast<cplx>();
  Eigen::PartialPivLU<CMatrix> lu(P);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-13)) {
    throw NumericError("AR polynomial is singular at u=" + std::to_string(u) + ", omega=" +
                       std::to_string(omega) + " (condition number ~ " + std::to_string(1.0 / rcond) + ")");
  }
  return OpMatrix(lu.solve(Phi * C) / std::sqrt(kTwoPi));
}

OpMatrix true_spectral_density(const TvFarmaModel& model, double u, double omega) {
  const OpMatrix A = transfer_operator(model, u, omega);
  const Eigen::VectorXcd var = model.innovations.sigma.array().square().matrix().cast<cplx>();
  CMatrix F = A.mat * var.asDiagonal() * A.mat.adjoint();
  // Exact Hermitian symmetry.
  F = 0.5 * (F + F.adjoint()).eval();
  return OpMatrix(std::move(F));
}

long local_time_lo(double u, long T, long s) {
  return static_cast<long>(std::floor(u * static_cast<double>(T) - 0.5 * static_cast<double>(s) + 1e-9));
}

long local_time_hi(double u, long T, long s) {
  return static_cast<long>(std::floor(u * static_cast<double>(T) + 0.5 * static_cast<double>(s) + 1e-9));
}

int default_ma_lag(const TvFarmaModel& model, long t, long T) { return ma_truncation(model, t, T, 1e-13); }

long default_lag_cutoff(const TvFarmaModel& model, double tol) {
  if (!(tol > 0.0)) throw InvalidArgument("lag cutoff tolerance must be positive");
  const long n = model.ma_order();
  if (model.ar_order() == 0) return n;
  const auto grid = default_stability_grid(model);
  const StabilityReport rep = check_stability(model, grid);
  const double r = rep.max_radius();
  if (!(r < 1.0)) throw StabilityError("lag cutoff needs a stable model", rep.to_json());
  const double reff = std::max(r, 1e-3);
  double cmax = 0.0;
  for (double u : grid) cmax = std::max(cmax, op_norm(model.c.at(u)));
  const double scale = 10.0 * std::max(model.innovations.trace(), 1e-300) * cmax * cmax /
                       ((1.0 - reff) * (1.0 - reff));
  const double S = std::log(tol * (1.0 - reff) / scale) / std::log(reff);
  return n + std::clamp(static_cast<long>(std::ceil(S)), 0L, 100000L);
}

namespace {

// MA coefficient lists keyed by time.
class MaCache {
 public:
  MaCache(const TvFarmaModel& model, long T, int L, double tol) : model_(model), T_(T), L_(L), tol_(tol) {}

  const std::vector<Eigen::MatrixXd>& at(long t) {
    auto it = cache_.find(t);
    if (it != cache_.end()) return it->second;
    const int L = L_ >= 0 ? L_ : default_ma_lag(model_, t, T_);
    MaExpansionReal ex = ma_coefficients_real(model_, t, T_, L);
    if (ex.tail > tol_)
      throw NumericError("MA truncation tail " + std::to_string(ex.tail) + " exceeds tolerance at t=" +
                         std::to_string(t));
    return cache_.emplace(t, std::move(ex.coeffs)).first->second;
  }

 private:
  const TvFarmaModel& model_;
  long T_;
  int L_;
  double tol_;
  std::map<long, std::vector<Eigen::MatrixXd>> cache_;
};

// E[X_{t2} X_{t1}^H] = sum_l A_{t2}(l + d) C_eps A_{t1}(l)^T with d = t2 - t1.
Eigen::MatrixXd cross_cov(const std::vector<Eigen::MatrixXd>& a2, const std::vector<Eigen::MatrixXd>& a1,
                          long d, const Eigen::VectorXd& var) {
  const Eigen::Index K = var.size();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(K, K);
  const long l0 = std::max(0L, -d);
  for (long l = l0; l < static_cast<long>(a1.size()) && l + d < static_cast<long>(a2.size()); ++l)
    out.noalias() += a2[static_cast<std::size_t>(l + d)] * var.asDiagonal() * a1[static_cast<std::size_t>(l)].transpose();
  return out;
}

Eigen::MatrixXd autocov_real(MaCache& cache, const TvFarmaModel& model, long T, double u, long s) {
  const long t1 = local_time_lo(u, T, s);
  const long t2 = local_time_hi(u, T, s);
  const Eigen::VectorXd var = model.innovations.sigma.array().square();
  const auto& a1 = cache.at(t1);
  const auto& a2 = cache.at(t2);
  return cross_cov(a2, a1, t2 - t1, var);
}

struct AutocovSequence {
  std::vector<Eigen::MatrixXd> nonneg;  // C_{u,0..S}
  double tail_bound = 0.0;               // (2pi)^{-1} sum_{|s|>S} ||C_s||_2
};

AutocovSequence autocov_sequence(const TvFarmaModel& model, long T, double u, long S, int L, double ma_tol) {
  MaCache cache(model, T, L, ma_tol);
  AutocovSequence out;
  for (long s = 0; s <= S; ++s) out.nonneg.push_back(autocov_real(cache, model, T, u, s));
  // Tail: explicit terms beyond S plus a geometric remainder.
  double r = 0.0;
  if (model.ar_order() > 0) {
    const auto grid = default_stability_grid(model);
    r = check_stability(model, grid).max_radius();
  }
  const long extra = std::max(8L, S / 2) + model.ma_order();
  double tail = 0.0;
  double last = 0.0;
  for (long s = S + 1; s <= S + extra; ++s) {
    last = autocov_real(cache, model, T, u, s).norm();
    tail += 2.0 * last;  // C_{-s} = C_s^dagger has the same norm
  }
  if (r > 0.0) tail += 2.0 * last * r / (1.0 - r);
  out.tail_bound = tail / kTwoPi;
  return out;
}

CMatrix wv_sum(const AutocovSequence& seq, double omega) {
  CMatrix out = seq.nonneg.front().cast<cplx>();
  for (std::size_t s = 1; s < seq.nonneg.size(); ++s) {
    const cplx e = std::polar(1.0, -omega * static_cast<double>(s));
    out += e * seq.nonneg[s].cast<cplx>() + std::conj(e) * seq.nonneg[s].transpose().cast<cplx>();
  }
  out /= kTwoPi;
  return 0.5 * (out + out.adjoint());
}

}  // namespace

OpMatrix local_autocov(const TvFarmaModel& model, long T, double u, long s, int L, double tol) {
  if (T < 1) throw InvalidArgument("T must be >= 1");
  MaCache cache(model, T, L, tol);
  return OpMatrix::from_real(autocov_real(cache, model, T, u, s));
}

WignerVille wigner_ville(const TvFarmaModel& model, long T, double u, double omega, long S_max, int L,
                         double tol) {
  if (T < 1) throw InvalidArgument("T must be >= 1");
  const long S = S_max >= 0 ? S_max : default_lag_cutoff(model);
  const AutocovSequence seq = autocov_sequence(model, T, u, S, L, 1e-8);
  if (seq.tail_bound > tol)
    throw NumericError("Wigner-Ville lag tail " + std::to_string(seq.tail_bound) + " exceeds tolerance");
  return WignerVille{OpMatrix(wv_sum(seq, omega)), seq.tail_bound};
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::truth: return "truth";
    case Provenance::wigner_ville: return "wigner_ville";
    case Provenance::periodogram: return "periodogram";
    case Provenance::smoothed: return "smoothed";
  }
  return "truth";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "truth") return Provenance::truth;
  if (s == "wigner_ville") return Provenance::wigner_ville;
  if (s == "periodogram") return Provenance::periodogram;
  if (s == "smoothed") return Provenance::smoothed;
  throw InvalidArgument("unknown provenance '" + s + "'");
}

void SpectralGrid::validate() const {
  if (values.size() != u_grid.size() * omega_grid.size())
    throw InvalidArgument("spectral grid has " + std::to_string(values.size()) + " values for " +
                          std::to_string(u_grid.size()) + " x " + std::to_string(omega_grid.size()) + " cells");
  for (const auto& v : values)
    if (v.size() != dim() || v.mat.cols() != v.mat.rows()) throw InvalidArgument("spectral grid values differ in size");
}

SpectralGrid truth_grid(const TvFarmaModel& model, const std::vector<double>& u_grid,
                        const std::vector<double>& omega_grid, int threads) {
  model.validate();
  SpectralGrid g;
  g.u_grid = u_grid;
  g.omega_grid = omega_grid;
  g.provenance = Provenance::truth;
  g.values.resize(u_grid.size() * omega_grid.size());
  parallel_for(g.values.size(), threads, [&](std::size_t k) {
    const std::size_t iu = k / omega_grid.size();
    const std::size_t iw = k % omega_grid.size();
    g.values[k] = true_spectral_density(model, u_grid[iu], omega_grid[iw]);
  });
  return g;
}

SpectralGrid wigner_ville_grid(const TvFarmaModel& model, long T, const std::vector<double>& u_grid,
                               const std::vector<double>& omega_grid, long S_max, int threads) {
  model.validate();
  const long S = S_max >= 0 ? S_max : default_lag_cutoff(model);
  SpectralGrid g;
  g.u_grid = u_grid;
  g.omega_grid = omega_grid;
  g.provenance = Provenance::wigner_ville;
  g.values.resize(u_grid.size() * omega_grid.size());
  parallel_for(u_grid.size(), threads, [&](std::size_t iu) {
    const AutocovSequence seq = autocov_sequence(model, T, u_grid[iu], S, -1, 1e-8);
    for (std::size_t iw = 0; iw < omega_grid.size(); ++iw)
      g.values[g.index(iu, iw)] = OpMatrix(wv_sum(seq, omega_grid[iw]));
  });
  return g;
}

GridChecks check_grid(const SpectralGrid& grid, double herm_tol, double psd_tol) {
  GridChecks out;
  out.min_relative_eigenvalue = grid.values.empty() ? 0.0 : 1e300;
  for (const auto& v : grid.values) {
    const double scale = std::max(op_norm(v), 1e-300);
    const double defect = (v.mat - v.mat.adjoint()).cwiseAbs().maxCoeff();
    out.max_hermitian_defect = std::max(out.max_hermitian_defect, defect);
    if (defect > herm_tol * std::max(scale, 1.0)) out.hermitian = false;
    const double rel = min_eigenvalue(v) / scale;
    out.min_relative_eigenvalue = std::min(out.min_relative_eigenvalue, rel);
    if (rel < -psd_tol) out.psd = false;
  }
  return out;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = a;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

}  // namespace lsfts
