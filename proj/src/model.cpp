#include "model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "errors.hpp"
#include "json.hpp"
#include "rng.hpp"

namespace lsfts {

OperatorCurve OperatorCurve::constant(Eigen::MatrixXd value) {
  if (value.rows() != value.cols()) throw InvalidArgument("operator curve value must be square");
  OperatorCurve c;
  c.mode_ = Mode::constant;
  c.values_.push_back(std::move(value));
  return c;
}

OperatorCurve OperatorCurve::grid(std::vector<double> knots, std::vector<Eigen::MatrixXd> values) {
  if (knots.empty() || knots.size() != values.size())
    throw InvalidArgument("operator curve grid needs one value per knot");
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (!(knots[i] >= 0.0 && knots[i] <= 1.0)) throw InvalidArgument("operator curve knots must lie in [0,1]");
    if (i > 0 && !(knots[i] > knots[i - 1])) throw InvalidArgument("operator curve knots must be strictly increasing");
    if (values[i].rows() != values[i].cols() || values[i].rows() != values[0].rows())
      throw InvalidArgument("operator curve values must be square and of equal size");
  }
  OperatorCurve c;
  c.mode_ = Mode::grid;
  c.knots_ = std::move(knots);
  c.values_ = std::move(values);
  return c;
}

void OperatorCurve::at_into(double u, Eigen::MatrixXd& out) const {
  if (values_.empty()) throw InvalidArgument("empty operator curve");
  if (mode_ == Mode::constant || values_.size() == 1) {
    out = values_.front();
    return;
  }
  if (u <= knots_.front()) {
    out = values_.front();
    return;
  }
  if (u >= knots_.back()) {
    out = values_.back();
    return;
  }
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), u);
  const std::size_t hi = static_cast<std::size_t>(it - knots_.begin());
  const std::size_t lo = hi - 1;
  const double w = (u - knots_[lo]) / (knots_[hi] - knots_[lo]);
  out = (1.0 - w) * values_[lo] + w * values_[hi];
}

Eigen::MatrixXd OperatorCurve::at(double u) const {
  Eigen::MatrixXd out;
  at_into(u, out);
  return out;
}

void TvFarmaModel::validate() const {
  if (K < 1) throw InvalidArgument("model dimension K must be >= 1");
  auto check = [&](const OperatorCurve& c, const std::string& what) {
    if (c.empty()) throw InvalidArgument(what + " curve is empty");
    if (c.dim() != K) throw InvalidArgument(what + " has dimension " + std::to_string(c.dim()) +
                                            ", expected " + std::to_string(K));
  };
  for (std::size_t j = 0; j < ar.size(); ++j) check(ar[j], "AR operator " + std::to_string(j + 1));
  for (std::size_t l = 0; l < ma.size(); ++l) check(ma[l], "MA operator " + std::to_string(l + 1));
  check(c, "C");
  if (innovations.sigma.size() != K) throw InvalidArgument("innovation sigma must have K entries");
  for (Eigen::Index i = 0; i < K; ++i)
    if (!(innovations.sigma(i) >= 0.0) || !std::isfinite(innovations.sigma(i)))
      throw InvalidArgument("innovation sigma must be finite and nonnegative");
}

TvFarmaModel TvFarmaModel::frozen_at(double u) const {
  TvFarmaModel out = *this;
  for (auto& b : out.ar) b = OperatorCurve::constant(b.at(u));
  for (auto& p : out.ma) p = OperatorCurve::constant(p.at(u));
  out.c = OperatorCurve::constant(c.at(u));
  return out;
}

bool TvFarmaModel::is_time_invariant() const {
  auto flat = [](const OperatorCurve& c) { return c.mode() == OperatorCurve::Mode::constant || c.values().size() == 1; };
  return std::all_of(ar.begin(), ar.end(), flat) && std::all_of(ma.begin(), ma.end(), flat) && flat(c);
}

TvFarmaModel make_model(int K, std::vector<OperatorCurve> ar, std::vector<OperatorCurve> ma,
                        OperatorCurve c, InnovationSpec innovations, std::string name) {
  TvFarmaModel m;
  m.K = K;
  m.ar = std::move(ar);
  m.ma = std::move(ma);
  m.c = c.empty() ? OperatorCurve::constant(Eigen::MatrixXd::Identity(K, K)) : std::move(c);
  m.innovations = std::move(innovations);
  m.name = std::move(name);
  m.validate();
  return m;
}

Eigen::MatrixXd companion_matrix(const TvFarmaModel& model, double u) {
  const int m = model.ar_order();
  if (m < 1) throw InvalidArgument("companion operator needs AR order m >= 1");
  const int K = model.K;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m * K, m * K);
  for (int j = 0; j < m; ++j) out.block(0, j * K, K, K) = model.ar[j].at(u);
  for (int j = 1; j < m; ++j) out.block(j * K, (j - 1) * K, K, K).setIdentity();
  return out;
}

OpMatrix build_companion(const TvFarmaModel& model, double u) {
  return OpMatrix::from_real(companion_matrix(model, u));
}

std::vector<double> StabilityReport::failing_u() const {
  std::vector<double> out;
  for (const auto& e : entries)
    if (!e.radius_pass || !e.c_invertible) out.push_back(e.u);
  return out;
}

double StabilityReport::max_radius() const {
  double r = 0.0;
  for (const auto& e : entries) r = std::max(r, e.spectral_radius);
  return r;
}

std::string StabilityReport::to_json() const {
  nlohmann::json j;
  j["passed"] = passed;
  j["delta"] = delta;
  j["max_spectral_radius"] = max_radius();
  j["failing_u"] = failing_u();
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : entries) {
    rows.push_back({{"u", e.u},
                    {"norm_sum", e.norm_sum},
                    {"norm_sum_pass", e.norm_sum_pass},
                    {"spectral_radius", e.spectral_radius},
                    {"radius_pass", e.radius_pass},
                    {"c_invertible", e.c_invertible}});
  }
  j["entries"] = std::move(rows);
  return j.dump();
}

StabilityReport check_stability(const TvFarmaModel& model, std::span<const double> u_grid, double delta) {
  if (u_grid.empty()) throw InvalidArgument("check_stability: empty u grid");
  if (!(delta >= 0.0 && delta < 1.0)) throw InvalidArgument("check_stability: delta must lie in [0,1)");
  StabilityReport report;
  report.delta = delta;
  report.passed = true;
  for (double u : u_grid) {
    if (!(u >= 0.0 && u <= 1.0)) throw InvalidArgument("check_stability: u grid must lie in [0,1]");
    StabilityEntry e;
    e.u = u;
    for (const auto& b : model.ar) e.norm_sum += op_norm(b.at(u));
    e.norm_sum_pass = e.norm_sum < 1.0;
    if (model.ar_order() > 0) {
      Eigen::EigenSolver<Eigen::MatrixXd> es(companion_matrix(model, u), false);
      e.spectral_radius = es.eigenvalues().cwiseAbs().maxCoeff();
    }
    e.radius_pass = e.spectral_radius < 1.0 - delta;
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(model.c.at(u)).singularValues();
    e.c_invertible = sv(sv.size() - 1) > 1e-12 * std::max(sv(0), 1e-300);
    report.passed = report.passed && e.radius_pass && e.c_invertible;
    report.entries.push_back(e);
  }
  return report;
}

std::vector<double> default_stability_grid(const TvFarmaModel& model) {
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
  auto add = [&](const OperatorCurve& c) { grid.insert(grid.end(), c.knots().begin(), c.knots().end()); };
  for (const auto& b : model.ar) add(b);
  for (const auto& p : model.ma) add(p);
  add(model.c);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

void require_stable(const TvFarmaModel& model, double delta) {
  const auto grid = default_stability_grid(model);
  const StabilityReport report = check_stability(model, grid, delta);
  if (!report.passed) {
    const auto bad = report.failing_u();
    std::string msg = "model is not stable: companion spectral radius " + std::to_string(report.max_radius());
    if (!bad.empty()) msg += " (first failing u = " + std::to_string(bad.front()) + ")";
    throw StabilityError(msg, report.to_json());
  }
}

namespace {

// Top block row of the augmented companion product over the state
// (X_t, ..., X_{t-p+1}, e_t, ..., e_{t-n+1}) with e_t = C_{t/T} eps_t and
// p = max(m, 1). Multiplying by the transition at time s maps the row blocks
// as X_j <- X_1 B_{s,j} + X_{j+1}, e_l <- X_1 Phi_{s,l} + e_{l+1}.
class MaRecursion {
 public:
  MaRecursion(const TvFarmaModel& model, long t, long T)
      : model_(model), t_(t), T_(static_cast<double>(T)), K_(model.K),
        p_(std::max(model.ar_order(), 1)), n_(model.ma_order()) {
    if (T < 1) throw InvalidArgument("T must be >= 1");
    x_.assign(static_cast<std::size_t>(p_), Eigen::MatrixXd::Zero(K_, K_));
    e_.assign(static_cast<std::size_t>(n_), Eigen::MatrixXd::Zero(K_, K_));
    x_[0].setIdentity();
  }

  // A_{t,T}(l) for the current l.
  Eigen::MatrixXd coefficient() {
    model_.c.at_into(u_of(t_ - l_), c_);
    if (n_ > 0) return (x_[0] + e_[0]) * c_;
    return x_[0] * c_;
  }

  void advance() {
    const double u = u_of(t_ - l_);
    const Eigen::MatrixXd x1 = x_[0];
    for (int j = 0; j < p_; ++j) {
      Eigen::MatrixXd next = j + 1 < p_ ? x_[static_cast<std::size_t>(j + 1)] : Eigen::MatrixXd::Zero(K_, K_);
      if (j < model_.ar_order()) {
        model_.ar[static_cast<std::size_t>(j)].at_into(u, op_);
        next.noalias() += x1 * op_;
      }
      x_[static_cast<std::size_t>(j)] = std::move(next);
    }
    for (int l = 0; l < n_; ++l) {
      Eigen::MatrixXd next = l + 1 < n_ ? e_[static_cast<std::size_t>(l + 1)] : Eigen::MatrixXd::Zero(K_, K_);
      model_.ma[static_cast<std::size_t>(l)].at_into(u, op_);
      next.noalias() += x1 * op_;
      e_[static_cast<std::size_t>(l)] = std::move(next);
    }
    ++l_;
  }

  double state_norm() const {
    double s = 0.0;
    for (const auto& b : x_) s += b.squaredNorm();
    for (const auto& b : e_) s += b.squaredNorm();
    return std::sqrt(s);
  }

  long lag() const noexcept { return l_; }

 private:
  double u_of(long s) const { return std::clamp(static_cast<double>(s) / T_, 0.0, 1.0); }

  const TvFarmaModel& model_;
  long t_;
  double T_;
  int K_;
  int p_;
  int n_;
  long l_ = 0;
  std::vector<Eigen::MatrixXd> x_;
  std::vector<Eigen::MatrixXd> e_;
  Eigen::MatrixXd c_;
  Eigen::MatrixXd op_;
};

constexpr long kMaxTailTerms = 200000;

// Operator norms of A(L+1), A(L+2), ... until the propagated state is negligible.
double continue_tail(MaRecursion& rec, double scale) {
  double tail = 0.0;
  for (long k = 0; k < kMaxTailTerms; ++k) {
    const double sn = rec.state_norm();
    if (!std::isfinite(sn) || sn > 1e15) throw StabilityError("MA recursion diverges", "{}");
    if (sn <= 1e-18 * scale) return tail;
    tail += op_norm(rec.coefficient());
    rec.advance();
  }
  throw NumericError("MA tail did not converge within " + std::to_string(kMaxTailTerms) + " terms");
}

}  // namespace

MaExpansionReal ma_coefficients_real(const TvFarmaModel& model, long t, long T, int L, bool with_tail) {
  if (L < 0) throw InvalidArgument("MA truncation L must be >= 0");
  MaRecursion rec(model, t, T);
  MaExpansionReal out;
  out.coeffs.reserve(static_cast<std::size_t>(L) + 1);
  for (int l = 0; l <= L; ++l) {
    out.coeffs.push_back(rec.coefficient());
    rec.advance();
  }
  out.tail = with_tail ? continue_tail(rec, 1.0) : -1.0;
  return out;
}

MaExpansion ma_coefficients(const TvFarmaModel& model, long t, long T, int L) {
  MaExpansionReal r = ma_coefficients_real(model, t, T, L);
  MaExpansion out;
  out.tail = r.tail;
  for (const auto& a : r.coeffs) out.coeffs.push_back(OpMatrix::from_real(a));
  return out;
}

int ma_truncation(const TvFarmaModel& model, long t, long T, double tol) {
  if (!(tol > 0.0)) throw InvalidArgument("ma_truncation: tol must be positive");
  MaRecursion rec(model, t, T);
  std::vector<double> norms;
  for (long k = 0; k < kMaxTailTerms; ++k) {
    const double sn = rec.state_norm();
    if (!std::isfinite(sn) || sn > 1e15) throw StabilityError("MA recursion diverges", "{}");
    if (sn <= 1e-18) break;
    norms.push_back(op_norm(rec.coefficient()));
    rec.advance();
  }
  double suffix = 0.0;
  for (long l = static_cast<long>(norms.size()) - 1; l >= 0; --l) {
    // suffix holds sum_{k > l} ||A(k)||.
    if (suffix >= tol) return static_cast<int>(l + 1);
    suffix += norms[static_cast<std::size_t>(l)];
  }
  return 0;
}

FunctionVec Series::at(long t) const {
  if (t < 1 || t > length()) throw InvalidArgument("series index out of range");
  return FunctionVec(coeffs.col(t - 1).cast<cplx>());
}

Eigen::MatrixXd draw_innovations(const InnovationSpec& spec, long count, std::uint64_t seed) {
  if (count < 0) throw InvalidArgument("innovation count must be >= 0");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index K = spec.sigma.size();
  Eigen::MatrixXd out(K, count);
  for (long k = 0; k < count; ++k)
    for (Eigen::Index i = 0; i < K; ++i) out(i, k) = spec.sigma(i) * normal(rng);
  return out;
}

Series simulate_with_innovations(const TvFarmaModel& model, long T, long burn_in,
                                 const Eigen::MatrixXd& innovations) {
  model.validate();
  if (T < 1) throw InvalidArgument("T must be >= 1");
  if (burn_in < 0) throw InvalidArgument("burn_in must be >= 0");
  const long total = burn_in + T;
  if (innovations.rows() != model.K || innovations.cols() != total)
    throw InvalidArgument("innovations must be K x (burn_in + T)");
  const int K = model.K;
  const int m = model.ar_order();
  const int n = model.ma_order();
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(K, total);
  Eigen::MatrixXd e(K, total);
  Eigen::MatrixXd op;
  const double Td = static_cast<double>(T);
  for (long k = 0; k < total; ++k) {
    const long t = k - burn_in + 1;
    const double u = std::clamp(static_cast<double>(t) / Td, 0.0, 1.0);
    model.c.at_into(u, op);
    e.col(k).noalias() = op * innovations.col(k);
    Eigen::VectorXd xt = e.col(k);
    for (int j = 1; j <= m && j <= k; ++j) {
      model.ar[static_cast<std::size_t>(j - 1)].at_into(u, op);
      xt.noalias() += op * x.col(k - j);
    }
    for (int l = 1; l <= n && l <= k; ++l) {
      model.ma[static_cast<std::size_t>(l - 1)].at_into(u, op);
      xt.noalias() += op * e.col(k - l);
    }
    x.col(k) = xt;
  }
  return Series{x.rightCols(T)};
}

Series simulate_via_ma(const TvFarmaModel& model, long T, long burn_in,
                       const Eigen::MatrixXd& innovations, int L) {
  model.validate();
  if (T < 1) throw InvalidArgument("T must be >= 1");
  if (innovations.rows() != model.K || innovations.cols() != burn_in + T)
    throw InvalidArgument("innovations must be K x (burn_in + T)");
  Eigen::MatrixXd x(model.K, T);
  for (long t = 1; t <= T; ++t) {
    const long k = t + burn_in - 1;
    // Lags reaching before the first innovation correspond to the zero start.
    const int lmax = static_cast<int>(std::min<long>(L, k));
    MaRecursion rec(model, t, T);
    Eigen::VectorXd xt = Eigen::VectorXd::Zero(model.K);
    for (int l = 0; l <= lmax; ++l) {
      xt.noalias() += rec.coefficient() * innovations.col(k - l);
      rec.advance();
    }
    x.col(t - 1) = xt;
  }
  return Series{std::move(x)};
}

Series simulate(const TvFarmaModel& model, long T, std::uint64_t seed, long burn_in) {
  model.validate();
  if (T < 1) throw InvalidArgument("T must be >= 1");
  if (burn_in < 0) throw InvalidArgument("burn_in must be >= 0");
  require_stable(model);
  const Eigen::MatrixXd eps = draw_innovations(model.innovations, burn_in + T, derive_seed(seed, stream::innovations));
  return simulate_with_innovations(model, T, burn_in, eps);
}

Eigen::VectorXd far1_innovation_sd(int K) {
  Eigen::VectorXd s(K);
  for (int l = 1; l <= K; ++l) s(l - 1) = 1.0 / std::abs((l - 1.5) * kPi);
  return s;
}

Eigen::VectorXd far2_innovation_sd(int K) {
  Eigen::VectorXd s(K);
  for (int l = 1; l <= K; ++l) s(l - 1) = 1.0 / std::abs((l - 2.65) * kPi);
  return s;
}

double far2_peak_frequency(double u) { return std::acos(0.3 * std::cos(1.5 - std::cos(kPi * u))); }

namespace {

std::vector<double> knot_grid(int knots) {
  if (knots < 2) throw InvalidArgument("need at least 2 knots");
  std::vector<double> g(static_cast<std::size_t>(knots));
  for (int i = 0; i < knots; ++i) g[static_cast<std::size_t>(i)] = static_cast<double>(i) / (knots - 1);
  return g;
}

template <class VarFn>
Eigen::MatrixXd gaussian_matrix(int K, Rng& rng, VarFn var) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(K, K);
  for (int i = 1; i <= K; ++i)
    for (int j = 1; j <= K; ++j) a(i - 1, j - 1) = std::sqrt(var(i, j)) * normal(rng);
  return a;
}

Eigen::MatrixXd normalized(const Eigen::MatrixXd& a, double eta) {
  const double nrm = op_norm(a);
  if (!(nrm > 0.0)) throw NumericError("random operator draw has zero norm");
  return (eta / nrm) * a;
}

}  // namespace

TvFarmaModel build_far1_example(double c, double eta, int K, std::uint64_t seed, int knots) {
  if (!(eta > 0.0 && eta < 1.0)) throw InvalidArgument("far1: eta must lie in (0,1)");
  if (K < 1) throw InvalidArgument("far1: K must be >= 1");
  const auto grid = knot_grid(knots);
  Rng rng(derive_seed(seed, stream::matrices));
  std::vector<Eigen::MatrixXd> values;
  for (double u : grid) {
    const Eigen::MatrixXd a = gaussian_matrix(K, rng, [&](int i, int j) {
      return u * std::pow(static_cast<double>(i), -2.0 * c) + (1.0 - u) * std::exp(-static_cast<double>(i + j));
    });
    values.push_back(normalized(a, eta));
  }
  TvFarmaModel m = make_model(K, {OperatorCurve::grid(grid, std::move(values))}, {}, {},
                              InnovationSpec{far1_innovation_sd(K)}, "far1");
  m.seed = seed;
  return m;
}

TvFarmaModel build_far2_example(int K, std::uint64_t seed, int knots) {
  if (K < 1) throw InvalidArgument("far2: K must be >= 1");
  const auto grid = knot_grid(knots);
  Rng rng(derive_seed(seed, stream::matrices));
  std::vector<Eigen::MatrixXd> b1, b2;
  for (double u : grid) {
    const Eigen::MatrixXd a1 = gaussian_matrix(K, rng, [](int i, int j) {
      return std::exp(-static_cast<double>(i - 3) - static_cast<double>(j - 3));
    });
    const Eigen::MatrixXd a2 = gaussian_matrix(K, rng, [](int i, int j) {
      return 1.0 / (std::pow(static_cast<double>(i), 4.0) + static_cast<double>(j));
    });
    b1.push_back(normalized(a1, 0.4 * std::cos(1.5 - std::cos(kPi * u))));
    b2.push_back(normalized(a2, -0.5));
  }
  std::vector<OperatorCurve> ar{OperatorCurve::grid(grid, std::move(b1)), OperatorCurve::grid(grid, std::move(b2))};
  TvFarmaModel m = make_model(K, std::move(ar), {}, {}, InnovationSpec{far2_innovation_sd(K)}, "far2");
  m.seed = seed;
  return m;
}

TvFarmaModel build_white_noise(int K, Eigen::VectorXd sigma) {
  if (K < 1) throw InvalidArgument("white noise: K must be >= 1");
  if (sigma.size() == 0) sigma = far1_innovation_sd(K);
  return make_model(K, {}, {}, {}, InnovationSpec{std::move(sigma)}, "white_noise");
}

TvFarmaModel build_scalar_tvar1(double intercept, double slope) {
  std::vector<Eigen::MatrixXd> values{Eigen::MatrixXd::Constant(1, 1, intercept),
                                      Eigen::MatrixXd::Constant(1, 1, intercept + slope)};
  return make_model(1, {OperatorCurve::grid({0.0, 1.0}, std::move(values))}, {}, {},
                    InnovationSpec{Eigen::VectorXd::Ones(1)}, "tvar1");
}

}  // namespace lsfts
