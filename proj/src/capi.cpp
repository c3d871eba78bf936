#include "lsfts/lsfts.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "errors.hpp"
#include "estimator.hpp"
#include "eval.hpp"
#include "ingest.hpp"
#include "model.hpp"
#include "pipeline.hpp"
#include "spectrum.hpp"

struct lsfts_model {
  lsfts::TvFarmaModel m;
};
struct lsfts_series {
  lsfts::Series s;
};
struct lsfts_estimator {
  lsfts::EstimatorConfig c;
};
struct lsfts_grid {
  lsfts::SpectralGrid g;
};

namespace {

thread_local std::string g_last_error;

lsfts_status fail(lsfts_status st, const char* what) {
  g_last_error = what;
  return st;
}

lsfts_status status_of(lsfts::ErrorKind k) {
  switch (k) {
    case lsfts::ErrorKind::invalid_argument: return LSFTS_INVALID_ARGUMENT;
    case lsfts::ErrorKind::config: return LSFTS_CONFIG;
    case lsfts::ErrorKind::stability: return LSFTS_STABILITY;
    case lsfts::ErrorKind::boundary: return LSFTS_BOUNDARY;
    case lsfts::ErrorKind::io: return LSFTS_IO;
    case lsfts::ErrorKind::parse: return LSFTS_PARSE;
    case lsfts::ErrorKind::numeric: return LSFTS_NUMERIC;
  }
  return LSFTS_INTERNAL;
}

template <class F>
lsfts_status guard(F&& f) {
  g_last_error.clear();
  try {
    f();
    return LSFTS_OK;
  } catch (const lsfts::Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(LSFTS_PARSE, e.what());
  } catch (const std::bad_alloc&) {
    return fail(LSFTS_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(LSFTS_INTERNAL, e.what());
  } catch (...) {
    return fail(LSFTS_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* name) {
  if (!p) throw lsfts::InvalidArgument(std::string(name) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void export_op(const lsfts::OpMatrix& M, double* out) {
  const Eigen::Index n = M.mat.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    out[2 * k] = M.mat.data()[k].real();
    out[2 * k + 1] = M.mat.data()[k].imag();
  }
}

template <class H, class V>
void emit(H** out, V&& value) {
  need(out, "out");
  *out = new H{std::forward<V>(value)};
}

}  // namespace

extern "C" {

const char* lsfts_version(void) { return LSFTS_VERSION_STRING; }

const char* lsfts_last_error(void) { return g_last_error.c_str(); }

const char* lsfts_status_name(lsfts_status status) {
  switch (status) {
    case LSFTS_OK: return "ok";
    case LSFTS_INVALID_ARGUMENT: return "invalid_argument";
    case LSFTS_CONFIG: return "config";
    case LSFTS_STABILITY: return "stability";
    case LSFTS_BOUNDARY: return "boundary";
    case LSFTS_IO: return "io";
    case LSFTS_PARSE: return "parse";
    case LSFTS_NUMERIC: return "numeric";
    case LSFTS_INTERNAL: return "internal";
  }
  return "unknown";
}

void lsfts_string_free(char* s) { std::free(s); }

lsfts_status lsfts_model_preset(const char* name, int K, uint64_t seed, lsfts_model** out) {
  return guard([&] {
    need(name, "name");
    const std::string p = name;
    const int k = K > 0 ? K : 15;
    if (p == "far1") emit(out, lsfts::build_far1_example(3.0, 0.4, k, seed));
    else if (p == "far2") emit(out, lsfts::build_far2_example(k, seed));
    else if (p == "white_noise") emit(out, lsfts::build_white_noise(k));
    else if (p == "tvar1") emit(out, lsfts::build_scalar_tvar1(0.2, 0.4));
    else throw lsfts::InvalidArgument("unknown preset '" + p + "'");
  });
}

lsfts_status lsfts_model_far1(double c, double eta, int K, uint64_t seed, lsfts_model** out) {
  return guard([&] { emit(out, lsfts::build_far1_example(c, eta, K, seed)); });
}

lsfts_status lsfts_model_white_noise(int K, const double* sigma, lsfts_model** out) {
  return guard([&] {
    if (K < 1) throw lsfts::InvalidArgument("K must be >= 1");
    Eigen::VectorXd sd;
    if (sigma) sd = Eigen::Map<const Eigen::VectorXd>(sigma, K);
    emit(out, lsfts::build_white_noise(K, sd));
  });
}

lsfts_status lsfts_model_tvar1(double intercept, double slope, lsfts_model** out) {
  return guard([&] { emit(out, lsfts::build_scalar_tvar1(intercept, slope)); });
}

lsfts_status lsfts_model_from_json(const char* json, lsfts_model** out) {
  return guard([&] {
    need(json, "json");
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json);
    } catch (const nlohmann::json::parse_error& e) {
      throw lsfts::ParseError(e.what(), 0);
    }
    emit(out, lsfts::model_from_json(doc));
  });
}

lsfts_status lsfts_model_load(const char* path, lsfts_model** out) {
  return guard([&] {
    need(path, "path");
    emit(out, lsfts::load_model(path));
  });
}

lsfts_status lsfts_model_to_json(const lsfts_model* model, char** json) {
  return guard([&] {
    need(model, "model");
    need(json, "json");
    *json = dup_string(lsfts::model_to_json(model->m).dump(2));
  });
}

lsfts_status lsfts_model_save(const lsfts_model* model, const char* path) {
  return guard([&] {
    need(model, "model");
    need(path, "path");
    lsfts::save_model(model->m, path);
  });
}

int lsfts_model_dim(const lsfts_model* model) { return model ? model->m.K : 0; }

lsfts_status lsfts_model_stability(const lsfts_model* model, int* passed, char** report_json) {
  return guard([&] {
    need(model, "model");
    need(passed, "passed");
    const auto grid = lsfts::default_stability_grid(model->m);
    const lsfts::StabilityReport rep = lsfts::check_stability(model->m, grid);
    *passed = rep.passed ? 1 : 0;
    if (report_json) *report_json = dup_string(rep.to_json());
  });
}

void lsfts_model_free(lsfts_model* model) { delete model; }

lsfts_status lsfts_transfer_operator(const lsfts_model* model, double u, double omega, double* out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    export_op(lsfts::transfer_operator(model->m, u, omega), out);
  });
}

lsfts_status lsfts_spectral_density(const lsfts_model* model, double u, double omega, double* out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    export_op(lsfts::true_spectral_density(model->m, u, omega), out);
  });
}

lsfts_status lsfts_local_autocov(const lsfts_model* model, long T, double u, long s, double* out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    export_op(lsfts::local_autocov(model->m, T, u, s), out);
  });
}

lsfts_status lsfts_simulate(const lsfts_model* model, long T, uint64_t seed, long burn_in, lsfts_series** out) {
  return guard([&] {
    need(model, "model");
    emit(out, lsfts::simulate(model->m, T, seed, burn_in));
  });
}

lsfts_status lsfts_series_from_data(int K, long T, const double* data, lsfts_series** out) {
  return guard([&] {
    need(data, "data");
    if (K < 1 || T < 1) throw lsfts::InvalidArgument("K and T must be >= 1");
    lsfts::Series s;
    s.coeffs = Eigen::Map<const Eigen::MatrixXd>(data, K, T);
    if (!s.coeffs.allFinite()) throw lsfts::InvalidArgument("series data must be finite");
    emit(out, std::move(s));
  });
}

lsfts_status lsfts_series_read(const char* path, int K, lsfts_series** out) {
  return guard([&] {
    need(path, "path");
    emit(out, lsfts::read_any_series(path, K));
  });
}

lsfts_status lsfts_series_write(const lsfts_series* series, const char* path) {
  return guard([&] {
    need(series, "series");
    need(path, "path");
    lsfts::write_coefficients(series->s, path);
  });
}

long lsfts_series_length(const lsfts_series* series) { return series ? series->s.length() : 0; }

int lsfts_series_dim(const lsfts_series* series) { return series ? series->s.dim() : 0; }

lsfts_status lsfts_series_data(const lsfts_series* series, double* out) {
  return guard([&] {
    need(series, "series");
    need(out, "out");
    std::memcpy(out, series->s.coeffs.data(), sizeof(double) * static_cast<std::size_t>(series->s.coeffs.size()));
  });
}

void lsfts_series_free(lsfts_series* series) { delete series; }

lsfts_status lsfts_estimator_auto(long T, const char* taper, double rho, lsfts_estimator** out) {
  return guard([&] {
    const lsfts::TaperSpec t = taper ? lsfts::taper_from_string(taper, rho) : lsfts::TaperSpec::cosine_flat();
    emit(out, lsfts::make_estimator_config(T, t));
  });
}

lsfts_status lsfts_estimator_create(int N, double b_t, double b_f, const char* taper, double rho,
                                    lsfts_estimator** out) {
  return guard([&] {
    lsfts::EstimatorConfig c;
    c.N = N;
    c.b_t = b_t;
    c.b_f = b_f;
    c.taper = taper ? lsfts::taper_from_string(taper, rho) : lsfts::TaperSpec::cosine_flat();
    c.validate();
    emit(out, std::move(c));
  });
}

lsfts_status lsfts_estimator_params(const lsfts_estimator* est, int* N, double* b_t, double* b_f) {
  return guard([&] {
    need(est, "est");
    if (N) *N = est->c.N;
    if (b_t) *b_t = est->c.b_t;
    if (b_f) *b_f = est->c.b_f;
  });
}

lsfts_status lsfts_estimator_band(const lsfts_estimator* est, long T, double* lo, double* hi) {
  return guard([&] {
    need(est, "est");
    need(lo, "lo");
    need(hi, "hi");
    const auto b = est->c.band(T);
    *lo = b.first;
    *hi = b.second;
  });
}

void lsfts_estimator_free(lsfts_estimator* est) { delete est; }

lsfts_status lsfts_truth_grid(const lsfts_model* model, const double* u, size_t nu, const double* omega,
                              size_t nomega, int threads, lsfts_grid** out) {
  return guard([&] {
    need(model, "model");
    need(u, "u");
    need(omega, "omega");
    emit(out, lsfts::truth_grid(model->m, {u, u + nu}, {omega, omega + nomega}, threads));
  });
}

lsfts_status lsfts_estimate_grid(const lsfts_series* series, const lsfts_estimator* est, const double* u, size_t nu,
                                 const double* omega, size_t nomega, int threads, lsfts_grid** out) {
  return guard([&] {
    need(series, "series");
    need(est, "est");
    need(u, "u");
    need(omega, "omega");
    emit(out, lsfts::estimate_grid(series->s, est->c, {u, u + nu}, {omega, omega + nomega}, threads));
  });
}

lsfts_status lsfts_grid_shape(const lsfts_grid* grid, size_t* nu, size_t* nomega, int* K) {
  return guard([&] {
    need(grid, "grid");
    if (nu) *nu = grid->g.u_grid.size();
    if (nomega) *nomega = grid->g.omega_grid.size();
    if (K) *K = grid->g.dim();
  });
}

lsfts_status lsfts_grid_value(const lsfts_grid* grid, size_t iu, size_t iomega, double* out) {
  return guard([&] {
    need(grid, "grid");
    need(out, "out");
    if (iu >= grid->g.u_grid.size() || iomega >= grid->g.omega_grid.size())
      throw lsfts::InvalidArgument("grid index out of range");
    export_op(grid->g.at(iu, iomega), out);
  });
}

lsfts_status lsfts_grid_write(const lsfts_grid* grid, const char* path, const char* mode, int render_points) {
  return guard([&] {
    need(grid, "grid");
    need(path, "path");
    lsfts::write_spectral_grid(grid->g, path, lsfts::grid_mode_from_string(mode ? mode : "coeff"), render_points);
  });
}

lsfts_status lsfts_grid_read(const char* path, lsfts_grid** out) {
  return guard([&] {
    need(path, "path");
    emit(out, lsfts::read_spectral_grid(path));
  });
}

lsfts_status lsfts_grid_imse(const lsfts_grid* estimate, const lsfts_grid* truth, double* out) {
  return guard([&] {
    need(estimate, "estimate");
    need(truth, "truth");
    need(out, "out");
    *out = lsfts::imse(estimate->g, truth->g).imse;
  });
}

void lsfts_grid_free(lsfts_grid* grid) { delete grid; }

lsfts_status lsfts_run_command(const char* command, const char* config_json, const char* overrides_json,
                               char** result_json) {
  return guard([&] {
    need(command, "command");
    nlohmann::json ov = nlohmann::json::object();
    if (overrides_json && *overrides_json) {
      try {
        ov = nlohmann::json::parse(overrides_json);
      } catch (const nlohmann::json::parse_error& e) {
        throw lsfts::ConfigError(std::string("overrides are not valid JSON: ") + e.what());
      }
    }
    const nlohmann::json res = lsfts::run_command(command, config_json ? config_json : "", ov);
    if (result_json) *result_json = dup_string(res.dump(2));
  });
}

}  // extern "C"
