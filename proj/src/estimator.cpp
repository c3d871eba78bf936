#include "estimator.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <unsupported/Eigen/FFT>

#include "errors.hpp"
#include "parallel.hpp"

namespace lsfts {

TaperSpec TaperSpec::cosine_flat(double rho) {
  if (!(rho > 0.0 && rho <= 0.5)) throw InvalidArgument("cosine-flat taper: rho must lie in (0, 1/2]");
  return {Kind::cosine_flat, rho};
}

std::string TaperSpec::name() const {
  switch (kind) {
    case Kind::flat: return "flat";
    case Kind::cosine_flat: return "cosine_flat";
    case Kind::parabolic: return "parabolic";
  }
  return "flat";
}

double TaperSpec::operator()(double x) const {
  if (x < 0.0 || x > 1.0) return 0.0;
  switch (kind) {
    case Kind::flat:
      return 1.0;
    case Kind::cosine_flat: {
      const double y = std::min(x, 1.0 - x);
      return y < rho ? 0.5 * (1.0 - std::cos(kPi * y / rho)) : 1.0;
    }
    case Kind::parabolic:
      return 2.0 * std::sqrt(x * (1.0 - x));
  }
  return 0.0;
}

std::vector<double> TaperSpec::breakpoints() const {
  if (kind == Kind::cosine_flat && rho < 0.5) return {rho, 1.0 - rho};
  if (kind == Kind::cosine_flat) return {0.5};
  return {};
}

TaperSpec taper_from_string(const std::string& name, double rho) {
  if (name == "flat") return TaperSpec::flat();
  if (name == "cosine_flat") return TaperSpec::cosine_flat(rho);
  if (name == "parabolic") return TaperSpec::parabolic();
  throw InvalidArgument("unknown taper '" + name + "' (expected flat, cosine_flat or parabolic)");
}

double FreqKernelSpec::operator()(double x) const {
  const double w = half_width;
  if (std::abs(x) > w) return 0.0;
  const double z = x / w;
  return 0.75 / w * (1.0 - z * z);
}

namespace {

template <class F>
double integrate(F f, std::vector<double> cuts) {
  using boost::math::quadrature::gauss_kronrod;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    total += gauss_kronrod<double, 61>::integrate(f, cuts[i], cuts[i + 1], 15, 1e-14);
  return total;
}

template <class F>
KernelConstants constants_of(F k, const std::vector<double>& cuts) {
  KernelConstants c;
  c.mass = integrate(k, cuts);
  c.first_moment = integrate([&](double x) { return x * k(x); }, cuts);
  c.kappa = integrate([&](double x) { return x * x * k(x); }, cuts);
  c.l2sq = integrate([&](double x) { const double v = k(x); return v * v; }, cuts);
  return c;
}

std::vector<double> taper_cuts(const TaperSpec& taper, double shift) {
  std::vector<double> cuts{0.0};
  for (double b : taper.breakpoints()) cuts.push_back(b);
  cuts.push_back(1.0);
  for (double& c : cuts) c += shift;
  return cuts;
}

}  // namespace

KernelConstants kernel_constants(const FreqKernelSpec& kernel) {
  return constants_of([&](double x) { return kernel(x); }, {-kernel.half_width, 0.0, kernel.half_width});
}

double taper_h2(const TaperSpec& taper) {
  return integrate([&](double x) { const double h = taper(x); return h * h; }, taper_cuts(taper, 0.0));
}

double time_kernel(const TaperSpec& taper, double x) {
  const double h = taper(x + 0.5);
  return h * h / taper_h2(taper);
}

KernelConstants kernel_constants(const TaperSpec& taper) {
  const double h2 = taper_h2(taper);
  return constants_of([&](double x) { const double h = taper(x + 0.5); return h * h / h2; },
                      taper_cuts(taper, -0.5));
}

cplx taper_fft(const TaperSpec& taper, int k, int N, double omega) {
  if (N < 1) throw InvalidArgument("taper_fft: N must be >= 1");
  cplx sum = 0.0;
  for (int s = 0; s < N; ++s) sum += std::pow(taper(static_cast<double>(s) / N), k) * std::polar(1.0, -omega * s);
  return sum;
}

Bandwidths default_bandwidths(long T) {
  if (T < 2) throw InvalidArgument("default_bandwidths: T must be >= 2");
  const double Td = static_cast<double>(T);
  Bandwidths b;
  b.N = 2 * static_cast<int>(std::lround(std::pow(Td, 5.0 / 6.0) / 2.0));
  if (b.N < 2) b.N = 2;
  b.b_t = b.N / Td;
  b.b_f = 2.0 * std::pow(Td, -0.2) - b.b_t;
  if (!(b.b_f > 0.0)) throw InvalidArgument("default_bandwidths: b_f = " + std::to_string(b.b_f) + " <= 0 at T=" +
                                            std::to_string(T));
  return b;
}

void EstimatorConfig::validate() const {
  if (N < 2 || N % 2 != 0) throw InvalidArgument("segment length N must be even and >= 2, got " + std::to_string(N));
  if (!(b_t > 0.0 && b_t <= 1.0)) throw InvalidArgument("b_t must lie in (0,1]");
  if (!(b_f > 0.0 && b_f <= 1.0)) throw InvalidArgument("b_f must lie in (0,1]");
  if (!(fkernel.half_width > 0.0)) throw InvalidArgument("frequency kernel half-width must be positive");
}

std::pair<double, double> EstimatorConfig::band(long T) const {
  const double h = static_cast<double>(N) / (2.0 * static_cast<double>(T));
  return {h, 1.0 - h};
}

std::vector<double> EstimatorConfig::fourier_frequencies() const {
  std::vector<double> out(static_cast<std::size_t>(N));
  for (int j = 0; j < N; ++j) out[static_cast<std::size_t>(j)] = kTwoPi * (j - N / 2) / N;
  return out;
}

EstimatorConfig make_estimator_config(long T, TaperSpec taper) {
  const Bandwidths b = default_bandwidths(T);
  EstimatorConfig cfg;
  cfg.N = b.N;
  cfg.b_t = b.b_t;
  cfg.b_f = b.b_f;
  cfg.taper = taper;
  return cfg;
}

long segment_start(double u, long T, const EstimatorConfig& cfg) {
  cfg.validate();
  const long t0 = static_cast<long>(std::floor(u * static_cast<double>(T) + 1e-9)) - cfg.N / 2 + 1;
  if (!(u >= 0.0 && u <= 1.0) || t0 < 1 || t0 + cfg.N - 1 > T) {
    const auto [lo, hi] = cfg.band(T);
    throw BoundaryError("u=" + std::to_string(u) + " is outside the valid estimation band [" + std::to_string(lo) +
                            ", " + std::to_string(hi) + "] for N=" + std::to_string(cfg.N) + ", T=" +
                            std::to_string(T),
                        lo, hi);
  }
  return t0;
}

double wrap_angle(double x) {
  double y = std::fmod(x + kPi, kTwoPi);
  if (y <= 0.0) y += kTwoPi;
  return y - kPi;
}

FunctionVec local_fdft(const Series& X, double u, double omega, const EstimatorConfig& cfg) {
  const long t0 = segment_start(u, X.length(), cfg);
  CVector d = CVector::Zero(X.dim());
  for (int s = 0; s < cfg.N; ++s) {
    const double w = cfg.taper(static_cast<double>(s) / cfg.N);
    if (w == 0.0) continue;
    d += (w * std::polar(1.0, -omega * s)) * X.coeffs.col(t0 + s - 1).cast<cplx>();
  }
  return FunctionVec(std::move(d));
}

namespace {

double h2_sum(const EstimatorConfig& cfg) {
  double h2 = 0.0;
  for (int s = 0; s < cfg.N; ++s) {
    const double w = cfg.taper(static_cast<double>(s) / cfg.N);
    h2 += w * w;
  }
  if (!(h2 > 0.0)) throw InvalidArgument("taper has zero energy on the segment");
  return h2;
}

struct Weight {
  int j;
  double w;
};

std::vector<Weight> sparse_weights(double omega, const EstimatorConfig& cfg) {
  cfg.validate();
  std::vector<Weight> out;
  double total = 0.0;
  for (int j = 0; j < cfg.N; ++j) {
    const double lambda = kTwoPi * (j - cfg.N / 2) / cfg.N;
    const double w = cfg.fkernel(wrap_angle(omega - lambda) / cfg.b_f);
    if (w > 0.0) {
      out.push_back({j, w});
      total += w;
    }
  }
  if (!(total > 0.0))
    throw InvalidArgument("frequency bandwidth b_f=" + std::to_string(cfg.b_f) +
                          " leaves no Fourier frequency inside the kernel support");
  for (auto& w : out) w.w /= total;
  return out;
}

}  // namespace

OpMatrix local_periodogram(const Series& X, double u, double omega, const EstimatorConfig& cfg) {
  const FunctionVec d = local_fdft(X, u, omega, cfg);
  CMatrix I = d.coeffs * d.coeffs.adjoint() / (kTwoPi * h2_sum(cfg));
  return OpMatrix(std::move(I));
}

std::vector<double> smoothing_weights(double omega, const EstimatorConfig& cfg) {
  std::vector<double> out(static_cast<std::size_t>(cfg.N), 0.0);
  for (const auto& w : sparse_weights(omega, cfg)) out[static_cast<std::size_t>(w.j)] = w.w;
  return out;
}

OpMatrix smooth_periodograms(const std::vector<OpMatrix>& periodograms, double omega, const EstimatorConfig& cfg) {
  if (periodograms.size() != static_cast<std::size_t>(cfg.N))
    throw InvalidArgument("smooth_periodograms: need one periodogram per Fourier frequency");
  const auto weights = sparse_weights(omega, cfg);
  CMatrix out = CMatrix::Zero(periodograms.front().size(), periodograms.front().size());
  for (const auto& w : weights) out += w.w * periodograms[static_cast<std::size_t>(w.j)].mat;
  return OpMatrix(std::move(out));
}

SegmentTransform::SegmentTransform(const Series& X, double u, const EstimatorConfig& cfg) : cfg_(cfg) {
  std::vector<int> rows(static_cast<std::size_t>(X.dim()));
  for (int i = 0; i < X.dim(); ++i) rows[static_cast<std::size_t>(i)] = i;
  compute(X, u, rows);
}

SegmentTransform::SegmentTransform(const Series& X, double u, const EstimatorConfig& cfg,
                                   const std::vector<int>& rows)
    : cfg_(cfg) {
  for (int r : rows)
    if (r < 0 || r >= X.dim()) throw InvalidArgument("SegmentTransform: coefficient index out of range");
  compute(X, u, rows);
}

void SegmentTransform::compute(const Series& X, double u, const std::vector<int>& rows) {
  const long t0 = segment_start(u, X.length(), cfg_);
  const int N = cfg_.N;
  h2_ = h2_sum(cfg_);
  std::vector<double> taper(static_cast<std::size_t>(N));
  for (int s = 0; s < N; ++s) taper[static_cast<std::size_t>(s)] = cfg_.taper(static_cast<double>(s) / N);
  d_.resize(static_cast<Eigen::Index>(rows.size()), N);
  Eigen::FFT<double> fft;
  std::vector<cplx> in(static_cast<std::size_t>(N));
  std::vector<cplx> out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int s = 0; s < N; ++s) in[static_cast<std::size_t>(s)] = taper[static_cast<std::size_t>(s)] * X.coeffs(rows[r], t0 + s - 1);
    fft.fwd(out, in);
    // lambda_j = 2 pi (j - N/2) / N sits in FFT bin (j + N/2) mod N.
    for (int j = 0; j < N; ++j) d_(static_cast<Eigen::Index>(r), j) = out[static_cast<std::size_t>((j + N / 2) % N)];
  }
}

OpMatrix SegmentTransform::periodogram(int j) const {
  if (j < 0 || j >= cfg_.N) throw InvalidArgument("Fourier index out of range");
  return OpMatrix(d_.col(j) * d_.col(j).adjoint() / (kTwoPi * h2_));
}

OpMatrix SegmentTransform::smoothed(double omega) const {
  const auto weights = sparse_weights(omega, cfg_);
  CMatrix dw(d_.rows(), static_cast<Eigen::Index>(weights.size()));
  for (std::size_t k = 0; k < weights.size(); ++k)
    dw.col(static_cast<Eigen::Index>(k)) = std::sqrt(weights[k].w) * d_.col(weights[k].j);
  CMatrix out = dw * dw.adjoint() / (kTwoPi * h2_);
  return OpMatrix(0.5 * (out + out.adjoint()));
}

cplx SegmentTransform::smoothed_entry(double omega, int a, int b) const {
  const auto weights = sparse_weights(omega, cfg_);
  cplx sum = 0.0;
  for (const auto& w : weights) sum += w.w * d_(a, w.j) * std::conj(d_(b, w.j));
  return sum / (kTwoPi * h2_);
}

OpMatrix smooth_estimate(const Series& X, double u, double omega, const EstimatorConfig& cfg) {
  return SegmentTransform(X, u, cfg).smoothed(omega);
}

SpectralGrid estimate_grid(const Series& X, const EstimatorConfig& cfg, const std::vector<double>& u_grid,
                           const std::vector<double>& omega_grid, int threads) {
  cfg.validate();
  for (double u : u_grid) segment_start(u, X.length(), cfg);
  SpectralGrid g;
  g.u_grid = u_grid;
  g.omega_grid = omega_grid;
  g.provenance = Provenance::smoothed;
  g.values.resize(u_grid.size() * omega_grid.size());
  parallel_for(u_grid.size(), threads, [&](std::size_t iu) {
    const SegmentTransform tr(X, u_grid[iu], cfg);
    for (std::size_t iw = 0; iw < omega_grid.size(); ++iw) g.values[g.index(iu, iw)] = tr.smoothed(omega_grid[iw]);
  });
  return g;
}

SpectralGrid periodogram_grid(const Series& X, const EstimatorConfig& cfg, const std::vector<double>& u_grid,
                              const std::vector<double>& omega_grid, int threads) {
  cfg.validate();
  for (double u : u_grid) segment_start(u, X.length(), cfg);
  SpectralGrid g;
  g.u_grid = u_grid;
  g.omega_grid = omega_grid;
  g.provenance = Provenance::periodogram;
  g.values.resize(u_grid.size() * omega_grid.size());
  parallel_for(g.values.size(), threads, [&](std::size_t k) {
    g.values[k] = local_periodogram(X, u_grid[k / omega_grid.size()], omega_grid[k % omega_grid.size()], cfg);
  });
  return g;
}

}  // namespace lsfts
