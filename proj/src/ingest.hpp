#pragma once

// Discrete functional data ingestion and file formats.
//
// Series files are comma-separated text with a versioned header comment:
//   # lsfts-series v1 kind=grid     first data row holds the grid points,
//                                   then one row per time index
//   # lsfts-series v1 kind=coeff    first data row holds the basis indices,
//                                   then one row of K coefficients per time
// Spectral grid files are long-format tables:
//   coeff mode:  u,omega,i,j,re,im
//   kernel mode: u,omega,tau,sigma,re,im,abs   with tau_k = k / (P - 1)
// All numbers are written with 17 significant digits.

#include <cstdint>
#include <string>
#include <vector>

#include "funspace.hpp"
#include "json.hpp"
#include "model.hpp"
#include "spectrum.hpp"

namespace lsfts {

struct RawSeries {
  std::vector<double> grid;  // strictly increasing points of [0,1]
  Eigen::MatrixXd data;      // T x M, row t-1 holds X_t on the grid

  long length() const noexcept { return static_cast<long>(data.rows()); }
  // Throws InvalidArgument on M < 2, size mismatch, non-increasing or
  // out-of-range grids or non-finite data.
  void validate() const;
};

enum class ProjectionMethod { least_squares, quadrature };
ProjectionMethod projection_method_from_string(const std::string& s);

struct Projection {
  Series series;                 // K x T coefficients
  Eigen::VectorXd residual_norm; // per t, trapezoid L^2 norm of the grid residual
};

// Least squares fit of the first K basis functions per time index, or
// trapezoid-quadrature inner products. Throws InvalidArgument if M < K.
Projection project_to_basis(const RawSeries& raw, const BasisSpec& basis,
                            ProjectionMethod method = ProjectionMethod::least_squares);

std::string format_double(double x);

void write_series(const RawSeries& raw, const std::string& path);
RawSeries read_series(const std::string& path);

void write_coefficients(const Series& series, const std::string& path);
Series read_coefficients(const std::string& path);

// Reads either kind of series file; grid series are projected onto a
// K-dimensional Fourier basis.
Series read_any_series(const std::string& path, int K);

enum class GridMode { coeff, kernel };
GridMode grid_mode_from_string(const std::string& s);

void write_spectral_grid(const SpectralGrid& grid, const std::string& path, GridMode mode,
                         int render_points = 64);
// Coefficient-mode files only.
SpectralGrid read_spectral_grid(const std::string& path);

nlohmann::json model_to_json(const TvFarmaModel& model);
TvFarmaModel model_from_json(const nlohmann::json& doc);
void save_model(const TvFarmaModel& model, const std::string& path);
TvFarmaModel load_model(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::string sha256_hex(const std::string& data);

}  // namespace lsfts
