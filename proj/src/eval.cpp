#include "eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace lsfts {

const McQuantity& McReport::quantity(const std::string& qname) const {
  for (const auto& q : quantities)
    if (q.name == qname) return q;
  throw InvalidArgument("report '" + name + "' has no quantity '" + qname + "'");
}

nlohmann::json McReport::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["replications"] = replications;
  j["seed"] = seed;
  j["passed"] = passed;
  nlohmann::json qs = nlohmann::json::array();
  for (const auto& q : quantities) {
    qs.push_back({{"name", q.name},
                  {"estimate", q.estimate},
                  {"se", q.se},
                  {"reference", q.reference},
                  {"rule", q.rule},
                  {"passed", q.passed}});
  }
  j["quantities"] = std::move(qs);
  j["details"] = details;
  return j;
}

namespace {

void require_aligned(const SpectralGrid& a, const SpectralGrid& b) {
  a.validate();
  b.validate();
  auto same = [](const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (std::abs(x[i] - y[i]) > 1e-12) return false;
    return true;
  };
  if (!same(a.u_grid, b.u_grid) || !same(a.omega_grid, b.omega_grid))
    throw InvalidArgument("imse: estimate and truth grids are not aligned");
  if (a.dim() != b.dim()) throw InvalidArgument("imse: operator dimensions differ");
}

std::vector<double> omega_weights(const std::vector<double>& w) {
  const std::size_t n = w.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) {
    if (n == 1) out[0] = kTwoPi;
    return out;
  }
  const double d = kTwoPi / static_cast<double>(n);
  bool periodic = std::abs(w.front() + kPi) < 1e-9 && std::abs(w.back() - (kPi - d)) < 1e-9;
  for (std::size_t i = 1; periodic && i < n; ++i) periodic = std::abs(w[i] - w[i - 1] - d) < 1e-9;
  if (periodic) {
    std::fill(out.begin(), out.end(), d);
    return out;
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = w[i + 1] - w[i];
    if (!(h > 0.0)) throw InvalidArgument("imse: omega grid must be strictly increasing");
    out[i] += 0.5 * h;
    out[i + 1] += 0.5 * h;
  }
  return out;
}

ImseResult integrate_mse(const SpectralGrid& truth, std::vector<double> pointwise) {
  ImseResult res;
  const auto wts = omega_weights(truth.omega_grid);
  res.pointwise_mse = std::move(pointwise);
  for (std::size_t iu = 0; iu < truth.u_grid.size(); ++iu) {
    double v = 0.0;
    for (std::size_t iw = 0; iw < truth.omega_grid.size(); ++iw) v += wts[iw] * res.pointwise_mse[truth.index(iu, iw)];
    res.per_u.push_back(v);
  }
  double total = 0.0;
  for (double v : res.per_u) total += v;
  res.imse = res.per_u.empty() ? 0.0 : total / static_cast<double>(res.per_u.size());
  return res;
}

double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

// Standard error of the mean.
double se_of(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const double m = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

}  // namespace

ImseResult imse(const SpectralGrid& est, const SpectralGrid& truth) {
  return imse(std::vector<SpectralGrid>{est}, truth);
}

ImseResult imse(const std::vector<SpectralGrid>& estimates, const SpectralGrid& truth) {
  if (estimates.empty()) throw InvalidArgument("imse: no estimates");
  std::vector<double> pointwise(truth.values.size(), 0.0);
  for (const auto& est : estimates) {
    require_aligned(est, truth);
    for (std::size_t k = 0; k < truth.values.size(); ++k)
      pointwise[k] += (est.values[k].mat - truth.values[k].mat).squaredNorm();
  }
  for (double& v : pointwise) v /= static_cast<double>(estimates.size());
  return integrate_mse(truth, std::move(pointwise));
}

std::uint64_t replication_seed(std::uint64_t seed, long r) {
  return derive_seed(seed, stream::replication, static_cast<std::uint64_t>(r));
}

OpMatrix exact_estimator_mean(const TvFarmaModel& model, long T, double u, double omega,
                              const EstimatorConfig& cfg, long burn_in) {
  model.validate();
  const long t0 = segment_start(u, T, cfg);
  const int N = cfg.N;
  const int K = model.K;
  std::vector<std::vector<Eigen::MatrixXd>> A(static_cast<std::size_t>(N));
  std::vector<double> h(static_cast<std::size_t>(N));
  double h2 = 0.0;
  long Lmax = 0;
  for (int s = 0; s < N; ++s) {
    const long t = t0 + s;
    const long L = std::min<long>(default_ma_lag(model, t, T), t + burn_in - 1);
    A[static_cast<std::size_t>(s)] = ma_coefficients_real(model, t, T, static_cast<int>(L), false).coeffs;
    Lmax = std::max(Lmax, L);
    h[static_cast<std::size_t>(s)] = cfg.taper(static_cast<double>(s) / N);
    h2 += h[static_cast<std::size_t>(s)] * h[static_cast<std::size_t>(s)];
  }
  const auto dense = smoothing_weights(omega, cfg);
  const Eigen::VectorXd var = model.innovations.sigma.array().square();
  CMatrix acc = CMatrix::Zero(K, K);
  CMatrix G(K, K);
  std::vector<cplx> phase(static_cast<std::size_t>(N));
  for (int j = 0; j < N; ++j) {
    const double w = dense[static_cast<std::size_t>(j)];
    if (w == 0.0) continue;
    const double lambda = kTwoPi * (j - N / 2) / N;
    for (int s = 0; s < N; ++s) phase[static_cast<std::size_t>(s)] = h[static_cast<std::size_t>(s)] * std::polar(1.0, -lambda * s);
    // D_j = sum_tau G_tau eps_tau with G_tau = sum_s h_s e^{-i lambda s} A_{t0+s}(t0+s-tau).
    for (long tau = t0 - Lmax; tau <= t0 + N - 1; ++tau) {
      G.setZero();
      const long s_lo = std::max<long>(0, tau - t0);
      const long s_hi = std::min<long>(N - 1, tau - t0 + Lmax);
      for (long s = s_lo; s <= s_hi; ++s) {
        const auto& a = A[static_cast<std::size_t>(s)];
        const long lag = t0 + s - tau;
        if (lag >= static_cast<long>(a.size())) continue;
        G += phase[static_cast<std::size_t>(s)] * a[static_cast<std::size_t>(lag)].cast<cplx>();
      }
      acc.noalias() += w * (G * var.cast<cplx>().asDiagonal() * G.adjoint());
    }
  }
  acc /= kTwoPi * h2;
  return OpMatrix(0.5 * (acc + acc.adjoint()));
}

SecondOrderTruth truth_derivatives(const TvFarmaModel& model, double u, double omega, int m, int n, double h) {
  if (!(u - 2.0 * h >= 0.0 && u + 2.0 * h <= 1.0))
    throw InvalidArgument("truth_derivatives: u too close to the boundary for the difference stencil");
  auto f = [&](double uu, double ww) { return true_spectral_density(model, uu, ww).mat(m, n).real(); };
  auto d2 = [&](auto g, double x, double step) {
    return (-g(x + 2 * step) + 16 * g(x + step) - 30 * g(x) + 16 * g(x - step) - g(x - 2 * step)) / (12 * step * step);
  };
  auto fu = [&](double uu) { return f(uu, omega); };
  auto fw = [&](double ww) { return f(u, ww); };
  SecondOrderTruth out;
  out.value = f(u, omega);
  out.d2u = d2(fu, u, h);
  out.d2w = d2(fw, omega, h);
  const double d2u_half = d2(fu, u, 0.5 * h);
  const double d2w_half = d2(fw, omega, 0.5 * h);
  auto agree = [&](double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return std::abs(a - b) <= 0.01 * scale || scale <= 1e-8 * std::max(1.0, std::abs(out.value));
  };
  out.richardson_ok = agree(out.d2u, d2u_half) && agree(out.d2w, d2w_half);
  return out;
}

namespace {

std::vector<int> rows_for(const std::vector<std::pair<int, int>>& pairs, int K, std::map<int, int>& pos) {
  std::set<int> rows;
  for (const auto& [a, b] : pairs) {
    if (a < 0 || a >= K || b < 0 || b >= K) throw InvalidArgument("projection index out of range");
    rows.insert(a);
    rows.insert(b);
  }
  std::vector<int> out(rows.begin(), rows.end());
  for (std::size_t i = 0; i < out.size(); ++i) pos[out[i]] = static_cast<int>(i);
  return out;
}

Eigen::MatrixXd replication_innovations(const TvFarmaModel& model, const McOptions& opt, long r) {
  return draw_innovations(model.innovations, opt.burn_in + opt.T,
                          derive_seed(replication_seed(opt.seed, r), stream::innovations));
}

}  // namespace

McReport mc_mean_bias(const TvFarmaModel& model, const EstimatorConfig& cfg, const McOptions& opt,
                      const std::vector<std::pair<double, double>>& points, int m, int n, bool control_variate) {
  model.validate();
  cfg.validate();
  if (opt.R < 2) throw InvalidArgument("mc_mean_bias: need R >= 2");
  require_stable(model);
  for (const auto& p : points) segment_start(p.first, opt.T, cfg);
  const double kappa_t = kernel_constants(cfg.taper).kappa;
  const double kappa_f = kernel_constants(cfg.fkernel).kappa;
  std::map<int, int> pos;
  const std::vector<int> rows = rows_for({{m, n}}, model.K, pos);

  std::vector<TvFarmaModel> frozen;
  if (control_variate)
    for (const auto& p : points) frozen.push_back(model.frozen_at(p.first));

  const std::size_t P = points.size();
  const std::size_t R = static_cast<std::size_t>(opt.R);
  std::vector<double> xs(R * P), ys(control_variate ? R * P : 0);
  parallel_for(R, opt.threads, [&](std::size_t r) {
    const Eigen::MatrixXd eps = replication_innovations(model, opt, static_cast<long>(r));
    const Series X = simulate_with_innovations(model, opt.T, opt.burn_in, eps);
    for (std::size_t p = 0; p < P; ++p) {
      const SegmentTransform tr(X, points[p].first, cfg, rows);
      xs[r * P + p] = tr.smoothed_entry(points[p].second, pos[m], pos[n]).real();
      if (control_variate) {
        const Series Y = simulate_with_innovations(frozen[p], opt.T, opt.burn_in, eps);
        const SegmentTransform ty(Y, points[p].first, cfg, rows);
        ys[r * P + p] = ty.smoothed_entry(points[p].second, pos[m], pos[n]).real();
      }
    }
  });

  McReport rep;
  rep.name = "mean_bias";
  rep.replications = opt.R;
  rep.seed = opt.seed;
  rep.details["kappa_t"] = kappa_t;
  rep.details["kappa_f"] = kappa_f;
  rep.details["N"] = cfg.N;
  rep.details["b_t"] = cfg.b_t;
  rep.details["b_f"] = cfg.b_f;
  rep.details["T"] = opt.T;
  rep.details["projection"] = {m, n};
  rep.details["control_variate"] = control_variate;
  rep.details["points"] = nlohmann::json::array();
  for (std::size_t p = 0; p < P; ++p) {
    const auto [u, w] = points[p];
    const SecondOrderTruth tr = truth_derivatives(model, u, w, m, n);
    const double pred0 = tr.value;
    const double pred2 = tr.value + 0.5 * cfg.b_t * cfg.b_t * kappa_t * tr.d2u + 0.5 * cfg.b_f * cfg.b_f * kappa_f * tr.d2w;
    std::vector<double> x(R), d(R);
    for (std::size_t r = 0; r < R; ++r) x[r] = xs[r * P + p];
    const double mc_mean = mean_of(x);
    const double mc_se = se_of(x);
    double mean = mc_mean;
    double se = mc_se;
    nlohmann::json pj = {{"u", u}, {"omega", w}, {"truth", pred0}, {"d2u", tr.d2u}, {"d2w", tr.d2w},
                         {"richardson_ok", tr.richardson_ok}, {"pred0", pred0}, {"pred2", pred2},
                         {"mc_mean", mc_mean}, {"mc_se", mc_se}};
    if (control_variate) {
      for (std::size_t r = 0; r < R; ++r) d[r] = xs[r * P + p] - ys[r * P + p];
      const double frozen_mean = exact_estimator_mean(frozen[p], opt.T, u, w, cfg, opt.burn_in).mat(m, n).real();
      mean = mean_of(d) + frozen_mean;
      se = se_of(d);
      pj["cv_mean"] = mean;
      pj["cv_se"] = se;
      pj["frozen_exact_mean"] = frozen_mean;
      pj["exact_mean"] = exact_estimator_mean(model, opt.T, u, w, cfg, opt.burn_in).mat(m, n).real();
    }
    const std::string tag = "[u=" + std::to_string(u) + ",w=" + std::to_string(w) + "]";
    McQuantity q;
    q.estimate = mean;
    q.se = se;
    if (std::abs(pred2 - pred0) <= 1e-12 * std::max(1.0, std::abs(pred0))) {
      q.name = "mean" + tag;
      q.reference = pred0;
      q.rule = "|mean - F| <= 3 SE";
      q.passed = std::abs(mean - pred0) <= 3.0 * se;
    } else {
      q.name = "bias_order" + tag;
      q.reference = pred2;
      q.rule = "|mean - pred2| < |mean - pred0|";
      q.passed = std::abs(mean - pred2) < std::abs(mean - pred0);
    }
    pj["passed"] = q.passed;
    rep.details["points"].push_back(pj);
    rep.passed = rep.passed && q.passed;
    rep.quantities.push_back(q);
  }
  return rep;
}

cplx covariance_limit(const TvFarmaModel& model, const EstimatorConfig& cfg, double u, double w1, double w2,
                      std::pair<int, int> p1, std::pair<int, int> p2) {
  const double c = kTwoPi * kernel_constants(cfg.taper).l2sq * kernel_constants(cfg.fkernel).l2sq;
  const CMatrix F = true_spectral_density(model, u, w1).mat;
  const CMatrix Fm = true_spectral_density(model, u, -w1).mat;
  auto eta = [](double x) { return std::abs(wrap_angle(x)) < 1e-9 ? 1.0 : 0.0; };
  const auto [a, b] = p1;
  const auto [cc, d] = p2;
  return c * (eta(w1 - w2) * F(a, cc) * Fm(b, d) + eta(w1 + w2) * F(a, d) * Fm(b, cc));
}

McReport mc_covariance(const TvFarmaModel& model, const EstimatorConfig& cfg, const McOptions& opt, double u,
                       const std::vector<CovarianceSpec>& specs, double rel_band) {
  model.validate();
  cfg.validate();
  if (opt.R < 2) throw InvalidArgument("mc_covariance: need R >= 2");
  require_stable(model);
  segment_start(u, opt.T, cfg);
  std::vector<std::pair<int, int>> pairs;
  for (const auto& s : specs) {
    pairs.push_back(s.p1);
    pairs.push_back(s.p2);
  }
  std::map<int, int> pos;
  const std::vector<int> rows = rows_for(pairs, model.K, pos);
  const std::size_t S = specs.size();
  const std::size_t R = static_cast<std::size_t>(opt.R);
  std::vector<cplx> z1(R * S), z2(R * S);
  parallel_for(R, opt.threads, [&](std::size_t r) {
    const Series X = simulate_with_innovations(model, opt.T, opt.burn_in,
                                               replication_innovations(model, opt, static_cast<long>(r)));
    const SegmentTransform tr(X, u, cfg, rows);
    for (std::size_t k = 0; k < S; ++k) {
      z1[r * S + k] = tr.smoothed_entry(specs[k].w1, pos.at(specs[k].p1.first), pos.at(specs[k].p1.second));
      z2[r * S + k] = tr.smoothed_entry(specs[k].w2, pos.at(specs[k].p2.first), pos.at(specs[k].p2.second));
    }
  });
  const double scale = static_cast<double>(cfg.N) * cfg.b_f;  // b_t b_f T
  McReport rep;
  rep.name = "covariance";
  rep.replications = opt.R;
  rep.seed = opt.seed;
  rep.details["scale_bt_bf_T"] = scale;
  rep.details["u"] = u;
  rep.details["specs"] = nlohmann::json::array();
  for (std::size_t k = 0; k < S; ++k) {
    cplx m1 = 0.0, m2 = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      m1 += z1[r * S + k];
      m2 += z2[r * S + k];
    }
    m1 /= static_cast<double>(R);
    m2 /= static_cast<double>(R);
    std::vector<double> pre(R), pim(R);
    for (std::size_t r = 0; r < R; ++r) {
      const cplx p = scale * (z1[r * S + k] - m1) * std::conj(z2[r * S + k] - m2);
      pre[r] = p.real();
      pim[r] = p.imag();
    }
    const double corr = static_cast<double>(R) / static_cast<double>(R - 1);
    const cplx est(corr * mean_of(pre), corr * mean_of(pim));
    const double se_re = se_of(pre), se_im = se_of(pim);
    const cplx lim = covariance_limit(model, cfg, u, specs[k].w1, specs[k].w2, specs[k].p1, specs[k].p2);
    const double lim_scale = std::abs(covariance_limit(model, cfg, u, specs[k].w1, specs[k].w1, specs[k].p1, specs[k].p1));
    McQuantity q;
    q.name = "scaled_cov[w1=" + std::to_string(specs[k].w1) + ",w2=" + std::to_string(specs[k].w2) + ",(" +
             std::to_string(specs[k].p1.first) + "," + std::to_string(specs[k].p1.second) + "),(" +
             std::to_string(specs[k].p2.first) + "," + std::to_string(specs[k].p2.second) + ")]";
    q.estimate = est.real();
    q.se = se_re;
    q.reference = lim.real();
    if (std::abs(lim) > 1e-12 * std::max(lim_scale, 1e-300)) {
      q.rule = "|cov - limit| <= " + std::to_string(rel_band) + " |limit|";
      q.passed = std::abs(est - lim) <= rel_band * std::abs(lim);
    } else {
      q.rule = "|Re cov|, |Im cov| <= 3 SE";
      const double floor = 1e-12 * std::max(lim_scale, 1e-300);
      q.passed = std::abs(est.real()) <= 3.0 * se_re + floor && std::abs(est.imag()) <= 3.0 * se_im + floor;
    }
    rep.details["specs"].push_back({{"w1", specs[k].w1}, {"w2", specs[k].w2},
                                    {"p1", {specs[k].p1.first, specs[k].p1.second}},
                                    {"p2", {specs[k].p2.first, specs[k].p2.second}},
                                    {"estimate_re", est.real()}, {"estimate_im", est.imag()},
                                    {"se_re", se_re}, {"se_im", se_im},
                                    {"limit_re", lim.real()}, {"limit_im", lim.imag()},
                                    {"ratio", std::abs(lim) > 0.0 ? std::abs(est) / std::abs(lim) : 0.0},
                                    {"passed", q.passed}});
    rep.passed = rep.passed && q.passed;
    rep.quantities.push_back(q);
  }
  return rep;
}

MomentTest moment_test(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  if (x.size() < 8) throw InvalidArgument("moment_test: need at least 8 observations");
  const double m = mean_of(x);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  MomentTest t;
  if (!(m2 > 0.0)) return t;
  t.skewness = m3 / std::pow(m2, 1.5);
  t.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  const double ses = std::sqrt(6.0 * n * (n - 1.0) / ((n - 2.0) * (n + 1.0) * (n + 3.0)));
  const double sek = 2.0 * ses * std::sqrt((n * n - 1.0) / ((n - 3.0) * (n + 5.0)));
  t.z_skew = t.skewness / ses;
  // Under normality E[g2] = -6/(n+1).
  t.z_kurt = (t.excess_kurtosis + 6.0 / (n + 1.0)) / sek;
  t.p_skew = std::erfc(std::abs(t.z_skew) / std::sqrt(2.0));
  t.p_kurt = std::erfc(std::abs(t.z_kurt) / std::sqrt(2.0));
  return t;
}

McReport mc_normality(const TvFarmaModel& model, const EstimatorConfig& cfg, const McOptions& opt, double u,
                      double omega, const std::vector<std::pair<int, int>>& projections, double alpha,
                      bool bonferroni) {
  model.validate();
  cfg.validate();
  if (opt.R < 8) throw InvalidArgument("mc_normality: need R >= 8");
  require_stable(model);
  segment_start(u, opt.T, cfg);
  std::map<int, int> pos;
  const std::vector<int> rows = rows_for(projections, model.K, pos);
  const std::size_t P = projections.size();
  const std::size_t R = static_cast<std::size_t>(opt.R);
  std::vector<cplx> z(R * P);
  parallel_for(R, opt.threads, [&](std::size_t r) {
    const Series X = simulate_with_innovations(model, opt.T, opt.burn_in,
                                               replication_innovations(model, opt, static_cast<long>(r)));
    const SegmentTransform tr(X, u, cfg, rows);
    for (std::size_t p = 0; p < P; ++p)
      z[r * P + p] = tr.smoothed_entry(omega, pos.at(projections[p].first), pos.at(projections[p].second));
  });
  std::size_t tests = 0;
  for (const auto& pr : projections) tests += pr.first == pr.second ? 2 : 4;
  const double level = bonferroni ? alpha / static_cast<double>(std::max<std::size_t>(tests, 1)) : alpha;
  const double root = std::sqrt(static_cast<double>(cfg.N) * cfg.b_f);

  McReport rep;
  rep.name = "normality";
  rep.replications = opt.R;
  rep.seed = opt.seed;
  rep.details["u"] = u;
  rep.details["omega"] = omega;
  rep.details["alpha"] = alpha;
  rep.details["per_test_level"] = level;
  rep.details["tests"] = nlohmann::json::array();
  for (std::size_t p = 0; p < P; ++p) {
    const auto [a, b] = projections[p];
    for (int part = 0; part < (a == b ? 1 : 2); ++part) {
      std::vector<double> x(R);
      for (std::size_t r = 0; r < R; ++r) x[r] = root * (part == 0 ? z[r * P + p].real() : z[r * P + p].imag());
      const MomentTest t = moment_test(x);
      const std::string tag = "(" + std::to_string(a) + "," + std::to_string(b) + ")." + (part == 0 ? "re" : "im");
      McQuantity qs{"skewness" + tag, t.skewness, 0.0, 0.0, "p >= " + std::to_string(level), t.p_skew >= level};
      McQuantity qk{"excess_kurtosis" + tag, t.excess_kurtosis, 0.0, 0.0, "p >= " + std::to_string(level),
                    t.p_kurt >= level};
      rep.details["tests"].push_back({{"projection", {a, b}}, {"part", part == 0 ? "re" : "im"},
                                      {"skewness", t.skewness}, {"z_skew", t.z_skew}, {"p_skew", t.p_skew},
                                      {"excess_kurtosis", t.excess_kurtosis}, {"z_kurt", t.z_kurt},
                                      {"p_kurt", t.p_kurt}});
      rep.passed = rep.passed && qs.passed && qk.passed;
      rep.quantities.push_back(qs);
      rep.quantities.push_back(qk);
    }
  }
  return rep;
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("ls_slope: need >= 2 paired points");
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

McReport local_stationarity_check(const TvFarmaModel& model, double u, const std::vector<long>& T_list, long R,
                                  std::uint64_t seed, int threads, double slope_tol, long burn_in) {
  model.validate();
  if (R < 1) throw InvalidArgument("local_stationarity_check: need R >= 1");
  if (!(u >= 0.0 && u <= 1.0)) throw InvalidArgument("local_stationarity_check: u must lie in [0,1]");
  require_stable(model);
  const TvFarmaModel frozen = model.frozen_at(u);
  McReport rep;
  rep.name = "local_stationarity";
  rep.replications = R;
  rep.seed = seed;
  rep.details["u"] = u;
  rep.details["per_T"] = nlohmann::json::array();
  std::vector<double> logT, log_mean, log_max;
  bool all_zero = true;
  for (long T : T_list) {
    McOptions opt;
    opt.T = T;
    opt.seed = derive_seed(seed, static_cast<std::uint64_t>(T));
    opt.burn_in = burn_in;
    std::vector<Eigen::VectorXd> p2(static_cast<std::size_t>(R));
    parallel_for(static_cast<std::size_t>(R), threads, [&](std::size_t r) {
      const Eigen::MatrixXd eps = replication_innovations(model, opt, static_cast<long>(r));
      const Series X = simulate_with_innovations(model, T, burn_in, eps);
      const Series Y = simulate_with_innovations(frozen, T, burn_in, eps);
      Eigen::VectorXd v(T);
      for (long t = 1; t <= T; ++t) {
        const double denom = std::abs(static_cast<double>(t) / T - u) + 1.0 / T;
        v(t - 1) = (X.coeffs.col(t - 1) - Y.coeffs.col(t - 1)).squaredNorm() / (denom * denom);
      }
      p2[r] = std::move(v);
    });
    Eigen::VectorXd e = Eigen::VectorXd::Zero(T);
    for (const auto& v : p2) e += v;
    e /= static_cast<double>(R);
    const double mean = e.mean(), mx = e.maxCoeff();
    if (mean > 0.0) all_zero = false;
    rep.details["per_T"].push_back({{"T", T}, {"mean_E_P2", mean}, {"max_E_P2", mx}});
    rep.quantities.push_back({"mean_E_P2[T=" + std::to_string(T) + "]", mean, 0.0, 0.0, "reported", true});
    rep.quantities.push_back({"max_E_P2[T=" + std::to_string(T) + "]", mx, 0.0, 0.0, "reported", true});
    logT.push_back(std::log(static_cast<double>(T)));
    log_mean.push_back(mean > 0.0 ? std::log(mean) : 0.0);
    log_max.push_back(mx > 0.0 ? std::log(mx) : 0.0);
  }
  double slope = 0.0, slope_max = 0.0;
  if (!all_zero && T_list.size() >= 2) {
    slope = ls_slope(logT, log_mean);
    slope_max = ls_slope(logT, log_max);
  }
  rep.details["slope_mean"] = slope;
  rep.details["slope_max"] = slope_max;
  McQuantity q{"slope_log_mean_E_P2", slope, 0.0, 0.0, "|slope| <= " + std::to_string(slope_tol),
               std::abs(slope) <= slope_tol};
  rep.quantities.push_back(q);
  rep.passed = q.passed;
  return rep;
}

}  // namespace lsfts
