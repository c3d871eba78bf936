#pragma once

#include <random>

#include "funspace.hpp"

namespace testutil {

inline lsfts::CMatrix random_cmatrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> n;
  lsfts::CMatrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = {n(g), n(g)};
  return m;
}

inline Eigen::MatrixXd random_rmatrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = n(g);
  return m;
}

// Composite trapezoid weights on n uniform points of [0,1].
inline std::vector<double> trapezoid_weights(int n) {
  std::vector<double> w(n, 1.0 / (n - 1));
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

}  // namespace testutil
