#include "ingest.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <openssl/sha.h>

#include "errors.hpp"

namespace lsfts {

void RawSeries::validate() const {
  const std::size_t M = grid.size();
  if (M < 2) throw InvalidArgument("raw series needs at least 2 grid points");
  if (static_cast<std::size_t>(data.cols()) != M)
    throw InvalidArgument("raw series data has " + std::to_string(data.cols()) + " columns for " + std::to_string(M) +
                          " grid points");
  for (std::size_t i = 0; i < M; ++i) {
    if (!(grid[i] >= 0.0 && grid[i] <= 1.0)) throw InvalidArgument("grid points must lie in [0,1]");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw InvalidArgument("grid points must be strictly increasing");
  }
  if (!data.allFinite()) throw InvalidArgument("raw series contains non-finite values");
}

ProjectionMethod projection_method_from_string(const std::string& s) {
  if (s == "least_squares") return ProjectionMethod::least_squares;
  if (s == "quadrature") return ProjectionMethod::quadrature;
  throw InvalidArgument("unknown projection method '" + s + "'");
}

namespace {

Eigen::VectorXd trapezoid_weights(const std::vector<double>& grid) {
  const Eigen::Index M = static_cast<Eigen::Index>(grid.size());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(M);
  for (Eigen::Index i = 0; i + 1 < M; ++i) {
    const double h = grid[static_cast<std::size_t>(i + 1)] - grid[static_cast<std::size_t>(i)];
    w(i) += 0.5 * h;
    w(i + 1) += 0.5 * h;
  }
  return w;
}

}  // namespace

Projection project_to_basis(const RawSeries& raw, const BasisSpec& basis, ProjectionMethod method) {
  raw.validate();
  const Eigen::Index M = static_cast<Eigen::Index>(raw.grid.size());
  const int K = basis.size();
  if (M < K)
    throw InvalidArgument("projection is under-determined: " + std::to_string(M) + " grid points for K=" +
                          std::to_string(K));
  const Eigen::MatrixXd Psi = basis.design(raw.grid);  // M x K
  const Eigen::VectorXd w = trapezoid_weights(raw.grid);
  Eigen::MatrixXd coeffs;  // K x T
  if (method == ProjectionMethod::least_squares) {
    coeffs = Psi.colPivHouseholderQr().solve(raw.data.transpose());
  } else {
    coeffs = Psi.transpose() * w.asDiagonal() * raw.data.transpose();
  }
  Projection out;
  out.series.coeffs = std::move(coeffs);
  const Eigen::MatrixXd resid = raw.data.transpose() - Psi * out.series.coeffs;  // M x T
  out.residual_norm = (w.asDiagonal() * resid.array().square().matrix()).colwise().sum().transpose().cwiseSqrt();
  return out;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("error writing '" + path + "'");
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned char c : digest) {
    out.push_back(hex[c >> 4]);
    out.push_back(hex[c & 15]);
  }
  return out;
}

namespace {

struct Row {
  long line;
  std::vector<std::string> fields;
};

struct Table {
  std::string header;  // first comment line, if any
  std::vector<Row> rows;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

Table read_table(const std::string& path) {
  const std::string text = read_text_file(path);
  Table t;
  std::istringstream in(text);
  std::string line;
  long no = 0;
  while (std::getline(in, line)) {
    ++no;
    const std::string s = trim(line);
    if (s.empty()) continue;
    if (s[0] == '#') {
      if (t.header.empty() && t.rows.empty()) t.header = s;
      continue;
    }
    Row r{no, {}};
    std::size_t start = 0;
    while (true) {
      const auto comma = s.find(',', start);
      r.fields.push_back(trim(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    t.rows.push_back(std::move(r));
  }
  if (t.rows.empty()) throw ParseError("'" + path + "' line " + std::to_string(no + 1) + ": no data rows (empty file)", no + 1);
  return t;
}

double parse_number(const std::string& field, long line, const std::string& path) {
  if (field.empty()) throw ParseError("'" + path + "' line " + std::to_string(line) + ": empty field", line);
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size())
    throw ParseError("'" + path + "' line " + std::to_string(line) + ": malformed number '" + field + "'", line);
  return v;
}

Eigen::MatrixXd parse_matrix(const Table& t, std::size_t first, std::size_t width, const std::string& path) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(t.rows.size() - first), static_cast<Eigen::Index>(width));
  for (std::size_t r = first; r < t.rows.size(); ++r) {
    const Row& row = t.rows[r];
    if (row.fields.size() != width)
      throw ParseError("'" + path + "' line " + std::to_string(row.line) + ": expected " + std::to_string(width) +
                           " fields, found " + std::to_string(row.fields.size()),
                       row.line);
    for (std::size_t c = 0; c < width; ++c)
      out(static_cast<Eigen::Index>(r - first), static_cast<Eigen::Index>(c)) = parse_number(row.fields[c], row.line, path);
  }
  return out;
}

std::string header_value(const std::string& header, const std::string& key) {
  const std::string pat = key + "=";
  const auto pos = header.find(pat);
  if (pos == std::string::npos) return "";
  const auto end = header.find(' ', pos);
  return header.substr(pos + pat.size(), end == std::string::npos ? std::string::npos : end - pos - pat.size());
}

void append_row(std::string& out, std::initializer_list<double> values) {
  bool first = true;
  for (double v : values) {
    if (!first) out.push_back(',');
    out += format_double(v);
    first = false;
  }
  out.push_back('\n');
}

}  // namespace

void write_series(const RawSeries& raw, const std::string& path) {
  raw.validate();
  std::string out = "# lsfts-series v1 kind=grid T=" + std::to_string(raw.length()) + " M=" +
                    std::to_string(raw.grid.size()) + "\n";
  for (std::size_t i = 0; i < raw.grid.size(); ++i) {
    if (i) out.push_back(',');
    out += format_double(raw.grid[i]);
  }
  out.push_back('\n');
  for (Eigen::Index t = 0; t < raw.data.rows(); ++t) {
    for (Eigen::Index i = 0; i < raw.data.cols(); ++i) {
      if (i) out.push_back(',');
      out += format_double(raw.data(t, i));
    }
    out.push_back('\n');
  }
  write_text_file(path, out);
}

RawSeries read_series(const std::string& path) {
  const Table t = read_table(path);
  if (header_value(t.header, "kind") == "coeff")
    throw ParseError("'" + path + "' holds basis coefficients, not grid observations", 1);
  const Row& head = t.rows.front();
  RawSeries raw;
  for (const auto& f : head.fields) raw.grid.push_back(parse_number(f, head.line, path));
  if (t.rows.size() < 2) throw ParseError("'" + path + "' line " + std::to_string(head.line + 1) + ": no observations", head.line + 1);
  raw.data = parse_matrix(t, 1, raw.grid.size(), path);
  try {
    raw.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError("'" + path + "' line " + std::to_string(head.line) + ": " + e.what(), head.line);
  }
  return raw;
}

void write_coefficients(const Series& series, const std::string& path) {
  std::string out = "# lsfts-series v1 kind=coeff basis=fourier T=" + std::to_string(series.length()) + " K=" +
                    std::to_string(series.dim()) + "\n";
  for (int k = 0; k < series.dim(); ++k) {
    if (k) out.push_back(',');
    out += "psi" + std::to_string(k + 1);
  }
  out.push_back('\n');
  for (long t = 0; t < series.length(); ++t) {
    for (int k = 0; k < series.dim(); ++k) {
      if (k) out.push_back(',');
      out += format_double(series.coeffs(k, t));
    }
    out.push_back('\n');
  }
  write_text_file(path, out);
}

Series read_coefficients(const std::string& path) {
  const Table t = read_table(path);
  if (header_value(t.header, "kind") != "coeff")
    throw ParseError("'" + path + "' is not a coefficient series (missing kind=coeff header)", 1);
  const std::size_t K = t.rows.front().fields.size();
  if (t.rows.size() < 2) throw ParseError("'" + path + "': no observations", t.rows.front().line + 1);
  return Series{parse_matrix(t, 1, K, path).transpose()};
}

Series read_any_series(const std::string& path, int K) {
  const Table t = read_table(path);
  if (header_value(t.header, "kind") == "coeff") return read_coefficients(path);
  return project_to_basis(read_series(path), BasisSpec(K)).series;
}

GridMode grid_mode_from_string(const std::string& s) {
  if (s == "coeff") return GridMode::coeff;
  if (s == "kernel") return GridMode::kernel;
  throw InvalidArgument("unknown grid mode '" + s + "'");
}

void write_spectral_grid(const SpectralGrid& grid, const std::string& path, GridMode mode, int render_points) {
  grid.validate();
  const int K = grid.dim();
  std::string out = "# lsfts-spectral-grid v1 mode=" + std::string(mode == GridMode::coeff ? "coeff" : "kernel") +
                    " provenance=" + to_string(grid.provenance) + " basis=fourier K=" + std::to_string(K) +
                    " nu=" + std::to_string(grid.u_grid.size()) + " nomega=" + std::to_string(grid.omega_grid.size());
  if (mode == GridMode::kernel) {
    if (render_points < 2) throw InvalidArgument("kernel rendering needs at least 2 points");
    out += " render=" + std::to_string(render_points);
  }
  out.push_back('\n');
  if (mode == GridMode::coeff) {
    out += "u,omega,i,j,re,im\n";
    for (std::size_t iu = 0; iu < grid.u_grid.size(); ++iu)
      for (std::size_t iw = 0; iw < grid.omega_grid.size(); ++iw) {
        const CMatrix& M = grid.at(iu, iw).mat;
        for (int i = 0; i < K; ++i)
          for (int j = 0; j < K; ++j)
            append_row(out, {grid.u_grid[iu], grid.omega_grid[iw], static_cast<double>(i + 1),
                             static_cast<double>(j + 1), M(i, j).real(), M(i, j).imag()});
      }
  } else {
    const std::vector<double> pts = linspace(0.0, 1.0, static_cast<std::size_t>(render_points));
    const Eigen::MatrixXcd Psi = BasisSpec(K).design(pts).cast<cplx>();  // P x K
    out += "u,omega,tau,sigma,re,im,abs\n";
    for (std::size_t iu = 0; iu < grid.u_grid.size(); ++iu)
      for (std::size_t iw = 0; iw < grid.omega_grid.size(); ++iw) {
        const CMatrix V = Psi * grid.at(iu, iw).mat * Psi.transpose();
        for (int a = 0; a < render_points; ++a)
          for (int b = 0; b < render_points; ++b)
            append_row(out, {grid.u_grid[iu], grid.omega_grid[iw], pts[static_cast<std::size_t>(a)],
                             pts[static_cast<std::size_t>(b)], V(a, b).real(), V(a, b).imag(), std::abs(V(a, b))});
      }
  }
  write_text_file(path, out);
}

SpectralGrid read_spectral_grid(const std::string& path) {
  const Table t = read_table(path);
  if (header_value(t.header, "mode") != "coeff")
    throw ParseError("'" + path + "': only coefficient-mode spectral grids can be read", 1);
  const int K = std::atoi(header_value(t.header, "K").c_str());
  if (K < 1) throw ParseError("'" + path + "': header lacks K", 1);
  SpectralGrid g;
  g.provenance = provenance_from_string(header_value(t.header, "provenance"));
  const Eigen::MatrixXd m = parse_matrix(t, 1, 6, path);
  std::map<double, std::size_t> us, ws;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    us.emplace(m(r, 0), 0);
    ws.emplace(m(r, 1), 0);
  }
  for (auto& [u, idx] : us) {
    idx = g.u_grid.size();
    g.u_grid.push_back(u);
  }
  for (auto& [w, idx] : ws) {
    idx = g.omega_grid.size();
    g.omega_grid.push_back(w);
  }
  g.values.assign(g.u_grid.size() * g.omega_grid.size(), OpMatrix::zero(K));
  std::vector<int> filled(g.values.size(), 0);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const int i = static_cast<int>(m(r, 2)) - 1;
    const int j = static_cast<int>(m(r, 3)) - 1;
    const long line = t.rows[static_cast<std::size_t>(r + 1)].line;
    if (i < 0 || i >= K || j < 0 || j >= K) throw ParseError("'" + path + "' line " + std::to_string(line) + ": index out of range", line);
    const std::size_t k = g.index(us[m(r, 0)], ws[m(r, 1)]);
    g.values[k].mat(i, j) = cplx(m(r, 4), m(r, 5));
    ++filled[k];
  }
  for (int f : filled)
    if (f != K * K) throw ParseError("'" + path + "': incomplete spectral grid", 1);
  return g;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  return flat;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, int K, const std::string& what) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(K) * static_cast<std::size_t>(K))
    throw ConfigError(what + ": expected a row-major list of " + std::to_string(K * K) + " numbers");
  Eigen::MatrixXd m(K, K);
  for (int i = 0; i < K; ++i)
    for (int c = 0; c < K; ++c) {
      const auto& v = j[static_cast<std::size_t>(i * K + c)];
      if (!v.is_number()) throw ConfigError(what + ": non-numeric matrix entry");
      m(i, c) = v.get<double>();
    }
  return m;
}

nlohmann::json curve_to_json(const OperatorCurve& c) {
  if (c.mode() == OperatorCurve::Mode::constant) return {{"mode", "constant"}, {"value", matrix_to_json(c.values().front())}};
  nlohmann::json values = nlohmann::json::array();
  for (const auto& v : c.values()) values.push_back(matrix_to_json(v));
  return {{"mode", "grid"}, {"knots", c.knots()}, {"values", values}};
}

OperatorCurve curve_from_json(const nlohmann::json& j, int K, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + ": operator curve must be an object");
  const std::string mode = j.value("mode", std::string("constant"));
  try {
    if (mode == "constant") {
      if (!j.contains("value")) throw ConfigError(what + ": constant curve needs 'value'");
      return OperatorCurve::constant(matrix_from_json(j["value"], K, what));
    }
    if (mode == "grid") {
      if (!j.contains("knots") || !j.contains("values")) throw ConfigError(what + ": grid curve needs 'knots' and 'values'");
      std::vector<double> knots = j["knots"].get<std::vector<double>>();
      std::vector<Eigen::MatrixXd> values;
      for (const auto& v : j["values"]) values.push_back(matrix_from_json(v, K, what));
      return OperatorCurve::grid(std::move(knots), std::move(values));
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(what + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
  throw ConfigError(what + ": unknown curve mode '" + mode + "'");
}

}  // namespace

nlohmann::json model_to_json(const TvFarmaModel& model) {
  nlohmann::json j;
  j["schema"] = "lsfts.model/1";
  j["name"] = model.name;
  j["K"] = model.K;
  j["seed"] = model.seed;
  j["basis"] = "fourier";
  j["ar"] = nlohmann::json::array();
  for (const auto& b : model.ar) j["ar"].push_back(curve_to_json(b));
  j["ma"] = nlohmann::json::array();
  for (const auto& p : model.ma) j["ma"].push_back(curve_to_json(p));
  j["c"] = curve_to_json(model.c);
  j["innovations"] = {{"sigma", std::vector<double>(model.innovations.sigma.data(),
                                                    model.innovations.sigma.data() + model.innovations.sigma.size())}};
  return j;
}

TvFarmaModel model_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("model document must be a JSON object");
  const std::string schema = doc.value("schema", std::string("lsfts.model/1"));
  if (schema != "lsfts.model/1") throw ConfigError("unsupported model schema '" + schema + "'");
  if (!doc.contains("K") || !doc["K"].is_number_integer()) throw ConfigError("model needs an integer 'K'");
  const int K = doc["K"].get<int>();
  if (K < 1) throw ConfigError("model 'K' must be >= 1");
  std::vector<OperatorCurve> ar, ma;
  if (doc.contains("ar"))
    for (std::size_t i = 0; i < doc["ar"].size(); ++i) ar.push_back(curve_from_json(doc["ar"][i], K, "ar[" + std::to_string(i) + "]"));
  if (doc.contains("ma"))
    for (std::size_t i = 0; i < doc["ma"].size(); ++i) ma.push_back(curve_from_json(doc["ma"][i], K, "ma[" + std::to_string(i) + "]"));
  OperatorCurve c;
  if (doc.contains("c") && !doc["c"].is_null()) c = curve_from_json(doc["c"], K, "c");
  InnovationSpec innov;
  try {
    if (!doc.contains("innovations") || !doc["innovations"].contains("sigma"))
      throw ConfigError("model needs 'innovations.sigma'");
    const auto sigma = doc["innovations"]["sigma"].get<std::vector<double>>();
    innov.sigma = Eigen::Map<const Eigen::VectorXd>(sigma.data(), static_cast<Eigen::Index>(sigma.size()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("innovations.sigma: ") + e.what());
  }
  try {
    TvFarmaModel m = make_model(K, std::move(ar), std::move(ma), std::move(c), std::move(innov),
                                doc.value("name", std::string("custom")));
    m.seed = doc.value("seed", std::uint64_t{0});
    return m;
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("invalid model: ") + e.what());
  }
}

void save_model(const TvFarmaModel& model, const std::string& path) {
  write_text_file(path, model_to_json(model).dump(2) + "\n");
}

TvFarmaModel load_model(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path + "': " + e.what(), 0);
  }
  return model_from_json(doc);
}

}  // namespace lsfts
