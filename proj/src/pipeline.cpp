#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "errors.hpp"
#include "eval.hpp"
#include "ingest.hpp"
#include "parallel.hpp"
#include "spectrum.hpp"

namespace lsfts {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kConfigKeys = {
    "schema", "model", "preset", "T", "seed", "burn_in", "threads", "out", "estimator", "u_grid", "omega_grid",
    "render_points", "replications", "series", "figure", "evaluate"};

template <class V>
V get_as(const nlohmann::json& doc, const std::string& key, V fallback) {
  if (!doc.contains(key) || doc[key].is_null()) return fallback;
  try {
    if constexpr (std::is_integral_v<V>) {
      if (!doc[key].is_number_integer()) throw ConfigError("'" + key + "' must be an integer");
    } else if constexpr (std::is_floating_point_v<V>) {
      if (!doc[key].is_number()) throw ConfigError("'" + key + "' must be a number");
    } else {
      if (!doc[key].is_string()) throw ConfigError("'" + key + "' must be a string");
    }
    return doc[key].get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + key + "': " + e.what());
  }
}

bool is_preset(const nlohmann::json& model, const std::string& name) {
  return model.is_object() && model.value("preset", std::string()) == name;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("experiment config must be a JSON object");
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (!kConfigKeys.count(it.key())) throw ConfigError("unknown config key '" + it.key() + "'");
  const std::string schema = get_as<std::string>(doc, "schema", "lsfts.experiment/1");
  if (schema != "lsfts.experiment/1") throw ConfigError("unsupported config schema '" + schema + "'");
  ExperimentConfig c;
  c.doc = doc;
  if (doc.contains("model")) {
    if (doc["model"].is_string()) c.model = {{"preset", doc["model"].get<std::string>()}};
    else if (doc["model"].is_object()) c.model = doc["model"];
    else throw ConfigError("'model' must be a preset name or an object");
  }
  if (doc.contains("preset")) c.model = {{"preset", get_as<std::string>(doc, "preset", "far1")}};
  c.T = get_as<long>(doc, "T", c.T);
  c.seed = get_as<std::uint64_t>(doc, "seed", c.seed);
  c.burn_in = get_as<long>(doc, "burn_in", c.burn_in);
  c.threads = get_as<int>(doc, "threads", c.threads);
  c.out = get_as<std::string>(doc, "out", c.out);
  if (doc.contains("estimator")) {
    c.estimator = doc["estimator"];
    if (!(c.estimator.is_object() || c.estimator == "auto")) throw ConfigError("'estimator' must be \"auto\" or an object");
  }
  if (doc.contains("u_grid")) c.u_grid = doc["u_grid"];
  if (doc.contains("omega_grid")) c.omega_grid = doc["omega_grid"];
  c.render_points = get_as<int>(doc, "render_points", c.render_points);
  c.replications = get_as<long>(doc, "replications", c.replications);
  c.series = get_as<std::string>(doc, "series", c.series);
  c.figure = get_as<std::string>(doc, "figure", c.figure);
  if (doc.contains("evaluate")) {
    if (!doc["evaluate"].is_object()) throw ConfigError("'evaluate' must be an object");
    c.evaluate = doc["evaluate"];
  }
  if (c.T < 1) throw ConfigError("'T' must be >= 1");
  if (c.burn_in < 0) throw ConfigError("'burn_in' must be >= 0");
  if (c.render_points < 2) throw ConfigError("'render_points' must be >= 2");
  if (c.replications < 1) throw ConfigError("'replications' must be >= 1");
  if (c.out.empty()) throw ConfigError("'out' must not be empty");
  return c;
}

nlohmann::json ExperimentConfig::resolved() const {
  nlohmann::json j;
  j["schema"] = "lsfts.experiment/1";
  j["model"] = model;
  j["T"] = T;
  j["seed"] = seed;
  j["burn_in"] = burn_in;
  j["threads"] = threads;
  j["out"] = out;
  j["estimator"] = estimator;
  j["u_grid"] = u_grid;
  j["omega_grid"] = omega_grid;
  j["render_points"] = render_points;
  j["replications"] = replications;
  j["series"] = series;
  j["figure"] = figure;
  j["evaluate"] = evaluate;
  return j;
}

TvFarmaModel resolve_model(const ExperimentConfig& cfg) {
  const nlohmann::json& m = cfg.model;
  try {
    if (m.contains("preset")) {
      const std::string p = m["preset"].get<std::string>();
      const auto seed = get_as<std::uint64_t>(m, "seed", cfg.seed);
      if (p == "far1")
        return build_far1_example(get_as<double>(m, "c", 3.0), get_as<double>(m, "eta", 0.4), get_as<int>(m, "K", 15),
                                  seed, get_as<int>(m, "knots", 64));
      if (p == "far2") return build_far2_example(get_as<int>(m, "K", 15), seed, get_as<int>(m, "knots", 64));
      if (p == "white_noise") {
        const int K = get_as<int>(m, "K", 15);
        Eigen::VectorXd sigma;
        if (m.contains("sigma")) {
          const auto s = m["sigma"].get<std::vector<double>>();
          sigma = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
        }
        return build_white_noise(K, sigma);
      }
      if (p == "tvar1") return build_scalar_tvar1(get_as<double>(m, "intercept", 0.2), get_as<double>(m, "slope", 0.4));
      throw ConfigError("unknown model preset '" + p + "' (expected far1, far2, white_noise or tvar1)");
    }
    if (m.contains("path")) return load_model(m["path"].get<std::string>());
    return model_from_json(m);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

EstimatorConfig resolve_estimator(const ExperimentConfig& cfg, long T) {
  const bool preset_taper = is_preset(cfg.model, "far1") || is_preset(cfg.model, "far2");
  const TaperSpec auto_taper = preset_taper ? TaperSpec::parabolic() : TaperSpec::cosine_flat(0.1);
  try {
    if (!cfg.estimator.is_object()) return make_estimator_config(T, auto_taper);
    const nlohmann::json& e = cfg.estimator;
    static const std::set<std::string> keys = {"N", "b_t", "b_f", "taper", "rho", "kernel_half_width"};
    for (auto it = e.begin(); it != e.end(); ++it)
      if (!keys.count(it.key())) throw ConfigError("unknown estimator key '" + it.key() + "'");
    EstimatorConfig out;
    out.taper = e.contains("taper") ? taper_from_string(get_as<std::string>(e, "taper", "cosine_flat"),
                                                        get_as<double>(e, "rho", 0.1))
                                    : auto_taper;
    const Bandwidths d = default_bandwidths(T);
    out.N = get_as<int>(e, "N", d.N);
    out.b_t = get_as<double>(e, "b_t", static_cast<double>(out.N) / static_cast<double>(T));
    out.b_f = get_as<double>(e, "b_f", 2.0 * std::pow(static_cast<double>(T), -0.2) - out.b_t);
    out.fkernel.half_width = get_as<double>(e, "kernel_half_width", 0.5);
    out.validate();
    return out;
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("estimator: ") + e.what());
  }
}

std::vector<double> resolve_grid(const nlohmann::json& spec, const std::vector<double>& fallback,
                                 const EstimatorConfig* est, const std::string& what) {
  if (spec.is_null()) return fallback;
  try {
    if (spec.is_array()) {
      std::vector<double> out = spec.get<std::vector<double>>();
      if (out.empty()) throw ConfigError("'" + what + "' must not be empty");
      return out;
    }
    if (spec.is_object()) {
      const double a = spec.at("from").get<double>();
      const double b = spec.at("to").get<double>();
      const long n = spec.at("count").get<long>();
      if (n < 1) throw ConfigError("'" + what + "'.count must be >= 1");
      return linspace(a, b, static_cast<std::size_t>(n));
    }
    if (spec.is_string() && (spec == "fourier" || spec == "fourier_half")) {
      if (!est) throw ConfigError("'" + what + "': Fourier grid needs an estimator");
      std::vector<double> f = est->fourier_frequencies();
      if (spec == "fourier_half") {
        std::vector<double> half;
        for (double w : f)
          if (w >= 0.0) half.push_back(w);
        half.push_back(kPi);
        return half;
      }
      return f;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + what + "': " + e.what());
  }
  throw ConfigError("'" + what + "' must be a list, {from,to,count}, \"fourier\" or \"fourier_half\"");
}

std::vector<Slice> figure_slices(const std::string& figure) {
  if (figure == "far1") return {{0.25, 0.0}, {0.5, 3.0 * kPi / 10.0}, {0.25, 9.0 * kPi / 10.0}};
  if (figure == "far2") {
    std::vector<Slice> out;
    for (double u : {0.1, 0.25, 0.375, 0.5, 0.625, 0.75, 0.9}) out.push_back({u, 1.5 - std::cos(kPi * u)});
    return out;
  }
  throw ConfigError("unknown figure '" + figure + "' (expected far1 or far2)");
}

double median_iqr(const std::vector<std::vector<double>>& amplitude) {
  if (amplitude.empty()) return 0.0;
  const std::size_t P = amplitude.front().size();
  auto quantile = [](std::vector<double>& v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  std::vector<double> iqr(P);
  std::vector<double> col(amplitude.size());
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t r = 0; r < amplitude.size(); ++r) col[r] = amplitude[r][p];
    iqr[p] = quantile(col, 0.75) - quantile(col, 0.25);
  }
  return quantile(iqr, 0.5);
}

namespace {

class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& content) {
    write_text_file(path(name), content);
    record(name);
  }

  // Registers a file written by another writer.
  void record(const std::string& name) {
    const std::string content = read_text_file(path(name));
    outputs_.push_back({{"path", name}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}});
  }

  const nlohmann::json& outputs() const noexcept { return outputs_; }

 private:
  fs::path dir_;
  nlohmann::json outputs_ = nlohmann::json::array();
};

std::vector<double> default_u() { return {0.25, 0.5, 0.75}; }
std::vector<double> default_omega() { return linspace(0.0, kPi, 33); }

nlohmann::json json_vec(const std::vector<double>& v) { return nlohmann::json(v); }

SpectralGrid single_cell(double u, double w, OpMatrix value, Provenance p) {
  SpectralGrid g;
  g.u_grid = {u};
  g.omega_grid = {w};
  g.values = {std::move(value)};
  g.provenance = p;
  return g;
}

std::vector<double> kernel_amplitude(const OpMatrix& M, int P) {
  const std::vector<double> pts = linspace(0.0, 1.0, static_cast<std::size_t>(P));
  const Eigen::MatrixXcd Psi = BasisSpec(M.size()).design(pts).cast<cplx>();
  const CMatrix V = Psi * M.mat * Psi.transpose();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(P * P));
  for (int a = 0; a < P; ++a)
    for (int b = 0; b < P; ++b) out.push_back(std::abs(V(a, b)));
  return out;
}

struct Context {
  ExperimentConfig cfg;
  std::string config_text;
  OutputDir out;
  nlohmann::json inputs = nlohmann::json::object();
};

nlohmann::json cmd_simulate(Context& ctx) {
  const TvFarmaModel model = resolve_model(ctx.cfg);
  const auto grid = default_stability_grid(model);
  const StabilityReport rep = check_stability(model, grid);
  ctx.out.write("stability.json", nlohmann::json::parse(rep.to_json()).dump(2) + "\n");
  if (!rep.passed) {
    const auto bad = rep.failing_u();
    throw StabilityError("model is not stable: companion spectral radius " + format_double(rep.max_radius()) +
                             " >= 1 - delta at u = " + (bad.empty() ? std::string("?") : format_double(bad.front())) +
                             " (" + std::to_string(bad.size()) + " failing grid points)",
                         rep.to_json());
  }
  const Series X = simulate(model, ctx.cfg.T, ctx.cfg.seed, ctx.cfg.burn_in);
  write_coefficients(X, ctx.out.path("series.csv"));
  ctx.out.record("series.csv");
  save_model(model, ctx.out.path("model.json"));
  ctx.out.record("model.json");
  return {{"T", X.length()}, {"K", X.dim()}, {"rows", X.length()}, {"stable", true},
          {"max_spectral_radius", rep.max_radius()}, {"model", model.name}};
}

nlohmann::json cmd_truth(Context& ctx) {
  const TvFarmaModel model = resolve_model(ctx.cfg);
  const auto u = resolve_grid(ctx.cfg.u_grid, default_u(), nullptr, "u_grid");
  const auto w = resolve_grid(ctx.cfg.omega_grid, default_omega(), nullptr, "omega_grid");
  const SpectralGrid g = truth_grid(model, u, w, ctx.cfg.threads);
  write_spectral_grid(g, ctx.out.path("truth_coeff.csv"), GridMode::coeff);
  ctx.out.record("truth_coeff.csv");
  write_spectral_grid(g, ctx.out.path("truth_kernel.csv"), GridMode::kernel, ctx.cfg.render_points);
  ctx.out.record("truth_kernel.csv");
  const GridChecks chk = check_grid(g);
  nlohmann::json peaks = nlohmann::json::array();
  for (std::size_t iu = 0; iu < u.size(); ++iu) {
    std::size_t best = 0;
    for (std::size_t iw = 1; iw < w.size(); ++iw)
      if (hs_norm(g.at(iu, iw)) > hs_norm(g.at(iu, best))) best = iw;
    nlohmann::json p = {{"u", u[iu]}, {"peak_omega", w[best]}, {"peak_hs_norm", hs_norm(g.at(iu, best))}};
    if (model.name == "far2") p["reference_peak_omega"] = far2_peak_frequency(u[iu]);
    peaks.push_back(p);
  }
  const std::size_t K = static_cast<std::size_t>(model.K), P = static_cast<std::size_t>(ctx.cfg.render_points);
  return {{"nu", u.size()}, {"nomega", w.size()}, {"K", model.K},
          {"rows_coeff", u.size() * w.size() * K * K}, {"rows_kernel", u.size() * w.size() * P * P},
          {"hermitian", chk.hermitian}, {"psd", chk.psd}, {"peaks", peaks}};
}

int model_dim_hint(const ExperimentConfig& cfg) {
  if (cfg.model.is_object() && cfg.model.contains("K") && cfg.model["K"].is_number_integer()) return cfg.model["K"].get<int>();
  return 15;
}

nlohmann::json cmd_estimate(Context& ctx) {
  if (ctx.cfg.series.empty()) throw ConfigError("estimate needs a series file ('series' or --series)");
  const Series X = read_any_series(ctx.cfg.series, model_dim_hint(ctx.cfg));
  ctx.inputs["series"] = {{"path", ctx.cfg.series}, {"sha256", sha256_hex(read_text_file(ctx.cfg.series))}};
  const EstimatorConfig est = resolve_estimator(ctx.cfg, X.length());
  const auto u = resolve_grid(ctx.cfg.u_grid, default_u(), &est, "u_grid");
  const auto w = resolve_grid(ctx.cfg.omega_grid, default_omega(), &est, "omega_grid");
  const SpectralGrid g = estimate_grid(X, est, u, w, ctx.cfg.threads);
  write_spectral_grid(g, ctx.out.path("estimate_coeff.csv"), GridMode::coeff);
  ctx.out.record("estimate_coeff.csv");
  write_spectral_grid(g, ctx.out.path("estimate_kernel.csv"), GridMode::kernel, ctx.cfg.render_points);
  ctx.out.record("estimate_kernel.csv");
  const GridChecks chk = check_grid(g);
  nlohmann::json traces = nlohmann::json::array();
  for (std::size_t iu = 0; iu < u.size(); ++iu) {
    double tr = 0.0;
    for (std::size_t iw = 0; iw < w.size(); ++iw) tr += g.at(iu, iw).mat.trace().real();
    traces.push_back({{"u", u[iu]}, {"mean_trace", tr / static_cast<double>(w.size())}});
  }
  const auto [lo, hi] = est.band(X.length());
  return {{"T", X.length()}, {"K", X.dim()}, {"N", est.N}, {"b_t", est.b_t}, {"b_f", est.b_f},
          {"taper", est.taper.name()}, {"band", {lo, hi}}, {"nu", u.size()}, {"nomega", w.size()},
          {"hermitian", chk.hermitian}, {"psd", chk.psd}, {"mean_trace", traces}};
}

std::vector<std::pair<int, int>> pairs_from(const nlohmann::json& j, std::vector<std::pair<int, int>> fallback) {
  if (j.is_null()) return fallback;
  std::vector<std::pair<int, int>> out;
  for (const auto& p : j) out.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
  return out;
}

nlohmann::json task_imse(Context& ctx, const TvFarmaModel& model, const nlohmann::json& t) {
  const std::vector<long> Ts = t.value("T_list", std::vector<long>{ctx.cfg.T});
  const long R = t.value("replications", ctx.cfg.replications);
  const auto u = resolve_grid(t.value("u_grid", nlohmann::json()), default_u(), nullptr, "imse.u_grid");
  const long count = t.value("omega_count", 64L);
  std::vector<double> w(static_cast<std::size_t>(count));
  for (long k = 0; k < count; ++k) w[static_cast<std::size_t>(k)] = -kPi + kTwoPi * static_cast<double>(k) / static_cast<double>(count);
  const SpectralGrid truth = truth_grid(model, u, w, ctx.cfg.threads);
  nlohmann::json per_T = nlohmann::json::array();
  std::vector<std::vector<double>> values;
  for (long T : Ts) {
    const EstimatorConfig est = resolve_estimator(ctx.cfg, T);
    std::vector<double> v(static_cast<std::size_t>(R));
    parallel_for(static_cast<std::size_t>(R), ctx.cfg.threads, [&](std::size_t r) {
      const Series X = simulate(model, T, replication_seed(ctx.cfg.seed, static_cast<long>(r)), ctx.cfg.burn_in);
      v[r] = imse(estimate_grid(X, est, u, w, 1), truth).imse;
    });
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(R);
    per_T.push_back({{"T", T}, {"N", est.N}, {"b_f", est.b_f}, {"mean_imse", m}, {"imse", v}});
    values.push_back(std::move(v));
  }
  nlohmann::json res = {{"per_T", per_T}, {"replications", R}, {"u_grid", json_vec(u)}, {"omega_count", count}};
  if (values.size() >= 2) {
    long wins = 0;
    for (long r = 0; r < R; ++r)
      if (values.back()[static_cast<std::size_t>(r)] < values.front()[static_cast<std::size_t>(r)]) ++wins;
    const long need = static_cast<long>(std::ceil(0.9 * static_cast<double>(R)));
    res["paired_wins"] = wins;
    res["wins_needed"] = need;
    res["passed"] = wins >= need;
  } else {
    res["passed"] = true;
  }
  return res;
}

McOptions mc_options(const ExperimentConfig& cfg, const nlohmann::json& t) {
  McOptions o;
  o.T = t.value("T", cfg.T);
  o.R = t.value("replications", cfg.replications);
  o.seed = cfg.seed;
  o.burn_in = cfg.burn_in;
  o.threads = cfg.threads;
  return o;
}

nlohmann::json cmd_evaluate(Context& ctx) {
  const TvFarmaModel model = resolve_model(ctx.cfg);
  const nlohmann::json& ev = ctx.cfg.evaluate;
  const std::vector<std::string> tasks = ev.value("tasks", std::vector<std::string>{"identity", "imse"});
  nlohmann::json report;
  report["config_sha256"] = sha256_hex(ctx.config_text);
  report["model"] = model.name;
  report["seed"] = ctx.cfg.seed;
  report["tasks"] = nlohmann::json::object();
  bool passed = true;
  for (const auto& name : tasks) {
    const nlohmann::json t = ev.value(name, nlohmann::json::object());
    nlohmann::json r;
    try {
      if (name == "identity") {
        const SpectralGrid g = truth_grid(model, resolve_grid(ctx.cfg.u_grid, default_u(), nullptr, "u_grid"),
                                          resolve_grid(ctx.cfg.omega_grid, default_omega(), nullptr, "omega_grid"),
                                          ctx.cfg.threads);
        const double v = imse(g, g).imse;
        r = {{"imse", v}, {"passed", v == 0.0}};
      } else if (name == "imse") {
        r = task_imse(ctx, model, t);
      } else if (name == "mean_bias") {
        const McOptions o = mc_options(ctx.cfg, t);
        std::vector<std::pair<double, double>> pts;
        for (const auto& p : t.value("points", nlohmann::json::array({{0.5, 0.0}})))
          pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        const auto proj = t.value("projection", std::vector<int>{0, 0});
        r = mc_mean_bias(model, resolve_estimator(ctx.cfg, o.T), o, pts, proj.at(0), proj.at(1),
                         t.value("control_variate", true))
                .to_json();
      } else if (name == "covariance") {
        const McOptions o = mc_options(ctx.cfg, t);
        std::vector<CovarianceSpec> specs;
        const nlohmann::json def = nlohmann::json::array(
            {{{"w1", kPi / 2}, {"w2", kPi / 2}}, {{"w1", kPi / 2}, {"w2", kPi / 4}}, {{"w1", kPi / 2}, {"w2", -kPi / 2}}});
        for (const auto& s : t.value("specs", def)) {
          CovarianceSpec cs;
          cs.w1 = s.at("w1").get<double>();
          cs.w2 = s.at("w2").get<double>();
          const auto p1 = s.value("p1", std::vector<int>{0, 0});
          const auto p2 = s.value("p2", std::vector<int>{0, 0});
          cs.p1 = {p1.at(0), p1.at(1)};
          cs.p2 = {p2.at(0), p2.at(1)};
          specs.push_back(cs);
        }
        r = mc_covariance(model, resolve_estimator(ctx.cfg, o.T), o, t.value("u", 0.5), specs,
                          t.value("rel_band", 0.25))
                .to_json();
      } else if (name == "normality") {
        const McOptions o = mc_options(ctx.cfg, t);
        r = mc_normality(model, resolve_estimator(ctx.cfg, o.T), o, t.value("u", 0.5), t.value("omega", 1.2),
                         pairs_from(t.value("projections", nlohmann::json()), {{0, 1}, {0, 2}, {1, 2}}),
                         t.value("alpha", 0.01))
                .to_json();
      } else if (name == "local_stationarity") {
        r = local_stationarity_check(model, t.value("u", 0.5), t.value("T_list", std::vector<long>{256, 1024, 4096}),
                                     t.value("replications", ctx.cfg.replications), ctx.cfg.seed, ctx.cfg.threads,
                                     t.value("slope_tol", 0.15), ctx.cfg.burn_in)
                .to_json();
      } else {
        throw ConfigError("unknown evaluate task '" + name + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("evaluate." + name + ": " + e.what());
    }
    passed = passed && r.value("passed", false);
    report["tasks"][name] = r;
  }
  report["passed"] = passed;
  ctx.out.write("report.json", report.dump(2) + "\n");
  return report;
}

nlohmann::json cmd_reproduce(Context& ctx) {
  const std::string figure = ctx.cfg.figure.empty() ? ctx.cfg.model.value("preset", std::string()) : ctx.cfg.figure;
  const auto slices = figure_slices(figure);
  const long T = ctx.cfg.T;
  if (T != 512 && T != 4096 && T != 65536) throw ConfigError("reproduce supports T in {512, 4096, 65536}");
  ExperimentConfig cfg = ctx.cfg;
  nlohmann::json m = {{"preset", figure}};
  if (ctx.cfg.model.is_object() && ctx.cfg.model.value("preset", std::string()) == figure) m = ctx.cfg.model;
  cfg.model = m;
  const TvFarmaModel model = resolve_model(cfg);
  const EstimatorConfig est = resolve_estimator(cfg, T);
  const auto [lo, hi] = est.band(T);
  const long R = ctx.cfg.replications;
  const int P = ctx.cfg.render_points;

  std::vector<double> u_eff;
  for (const auto& s : slices) {
    double ue = std::clamp(s.u, lo, hi);
    // Nudge inward if rounding of floor(uT) leaves the segment outside [1, T].
    for (int k = 0; k < 4; ++k) {
      try {
        segment_start(ue, T, est);
        break;
      } catch (const BoundaryError&) {
        ue += (ue < 0.5 ? 1.0 : -1.0) / static_cast<double>(T);
      }
    }
    segment_start(ue, T, est);
    u_eff.push_back(ue);
  }

  std::vector<std::vector<OpMatrix>> estimates(static_cast<std::size_t>(R));
  parallel_for(static_cast<std::size_t>(R), ctx.cfg.threads, [&](std::size_t r) {
    const Series X = simulate(model, T, replication_seed(ctx.cfg.seed, static_cast<long>(r)), ctx.cfg.burn_in);
    for (std::size_t k = 0; k < slices.size(); ++k)
      estimates[r].push_back(SegmentTransform(X, u_eff[k], est).smoothed(slices[k].omega));
  });

  nlohmann::json out_slices = nlohmann::json::array();
  char name[64];
  for (std::size_t k = 0; k < slices.size(); ++k) {
    const OpMatrix truth = true_spectral_density(model, slices[k].u, slices[k].omega);
    std::snprintf(name, sizeof name, "slice%zu_truth.csv", k + 1);
    write_spectral_grid(single_cell(slices[k].u, slices[k].omega, truth, Provenance::truth), ctx.out.path(name),
                        GridMode::kernel, P);
    ctx.out.record(name);
    std::vector<std::vector<double>> amps;
    for (long r = 0; r < R; ++r) {
      const OpMatrix& e = estimates[static_cast<std::size_t>(r)][k];
      std::snprintf(name, sizeof name, "slice%zu_est%02ld.csv", k + 1, r + 1);
      write_spectral_grid(single_cell(u_eff[k], slices[k].omega, e, Provenance::smoothed), ctx.out.path(name),
                          GridMode::kernel, P);
      ctx.out.record(name);
      amps.push_back(kernel_amplitude(e, P));
    }
    out_slices.push_back({{"slice", k + 1}, {"u", slices[k].u}, {"u_effective", u_eff[k]},
                          {"clamped", std::abs(u_eff[k] - slices[k].u) > 1e-12}, {"omega", slices[k].omega},
                          {"truth_hs_norm", hs_norm(truth)}, {"dispersion_median_iqr", median_iqr(amps)},
                          {"files", 1 + R}});
  }
  nlohmann::json summary = {{"figure", figure}, {"T", T}, {"seed", ctx.cfg.seed}, {"replications", R},
                            {"N", est.N}, {"b_t", est.b_t}, {"b_f", est.b_f}, {"taper", est.taper.name()},
                            {"band", {lo, hi}}, {"slices", out_slices}, {"slow", T >= 65536}};
  if (figure == "far2") {
    const double step = kTwoPi / static_cast<double>(T);
    double best_w = 0.0, best = -1.0;
    for (long j = 0; j <= T / 2; ++j) {
      const double w = step * static_cast<double>(j);
      const double v = hs_norm(true_spectral_density(model, 0.5, w));
      if (v > best) {
        best = v;
        best_w = w;
      }
    }
    const double ref = far2_peak_frequency(0.5);
    summary["peak_check"] = {{"u", 0.5}, {"peak_omega", best_w}, {"reference", ref}, {"grid_step", step},
                             {"within_one_step", std::abs(best_w - ref) <= step}};
  }
  ctx.out.write("summary.json", summary.dump(2) + "\n");
  return summary;
}

nlohmann::json cmd_check(Context& ctx) {
  const TvFarmaModel model = resolve_model(ctx.cfg);
  const auto grid = default_stability_grid(model);
  const StabilityReport rep = check_stability(model, grid);
  nlohmann::json res;
  res["stability"] = nlohmann::json::parse(rep.to_json());
  if (!rep.passed) {
    ctx.out.write("check.json", res.dump(2) + "\n");
    const auto bad = rep.failing_u();
    throw StabilityError("model is not stable at u = " + (bad.empty() ? std::string("?") : format_double(bad.front())),
                         rep.to_json());
  }
  const nlohmann::json t = ctx.cfg.evaluate.value("local_stationarity", nlohmann::json::object());
  const McReport ls = local_stationarity_check(
      model, t.value("u", 0.5), t.value("T_list", std::vector<long>{256, 1024, 4096}),
      t.value("replications", ctx.cfg.replications), ctx.cfg.seed, ctx.cfg.threads, t.value("slope_tol", 0.15),
      ctx.cfg.burn_in);
  res["local_stationarity"] = ls.to_json();
  res["passed"] = rep.passed && ls.passed;
  ctx.out.write("check.json", res.dump(2) + "\n");
  return {{"stable", true}, {"max_spectral_radius", rep.max_radius()},
          {"local_stationarity_slope", ls.details["slope_mean"]}, {"passed", res["passed"]}};
}

}  // namespace

nlohmann::json run_command(const std::string& command, const std::string& config_text,
                           const nlohmann::json& overrides) {
  static const std::set<std::string> commands = {"simulate", "truth", "estimate", "evaluate", "reproduce", "check"};
  if (!commands.count(command)) throw InvalidArgument("unknown command '" + command + "'");
  nlohmann::json doc = nlohmann::json::object();
  if (!config_text.empty()) {
    try {
      doc = nlohmann::json::parse(config_text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
  }
  if (!overrides.is_null()) {
    if (!overrides.is_object()) throw ConfigError("overrides must be a JSON object");
    if (!doc.is_object()) throw ConfigError("experiment config must be a JSON object");
    for (auto it = overrides.begin(); it != overrides.end(); ++it) {
      if (it.value().is_null()) continue;
      if (it.key() == "preset") {
        doc.erase("preset");
        doc["model"] = {{"preset", it.value()}};
      } else {
        doc[it.key()] = it.value();
      }
    }
  }
  Context ctx{ExperimentConfig::from_json(doc), config_text, OutputDir(doc.value("out", std::string("out")))};
  ctx.out.write("config.json", config_text.empty() ? std::string("{}\n") : config_text);
  ctx.inputs["config"] = {{"sha256", sha256_hex(config_text)}};
  if (ctx.cfg.model.contains("path")) {
    const std::string p = ctx.cfg.model["path"].get<std::string>();
    ctx.inputs["model"] = {{"path", p}, {"sha256", sha256_hex(read_text_file(p))}};
  }
  ctx.out.write("resolved_config.json", ctx.cfg.resolved().dump(2) + "\n");

  nlohmann::json summary;
  if (command == "simulate") summary = cmd_simulate(ctx);
  else if (command == "truth") summary = cmd_truth(ctx);
  else if (command == "estimate") summary = cmd_estimate(ctx);
  else if (command == "evaluate") summary = cmd_evaluate(ctx);
  else if (command == "reproduce") summary = cmd_reproduce(ctx);
  else summary = cmd_check(ctx);

  nlohmann::json manifest = {{"command", command}, {"version", LSFTS_VERSION_STRING},
                             {"inputs", ctx.inputs}, {"outputs", ctx.out.outputs()}};
  write_text_file(ctx.out.path("manifest.json"), manifest.dump(2) + "\n");
  summary["command"] = command;
  summary["out"] = ctx.cfg.out;
  return summary;
}

}  // namespace lsfts
