#pragma once

// Finite-basis representation of L^2([0,1]) functions and kernel operators.
//
// A function f is stored by its K coefficients in a fixed orthonormal basis
// {psi_1, ..., psi_K}; an operator A by the K x K matrix M with kernel
//   a(tau, sigma) = sum_ij M_ij psi_i(tau) conj(psi_j(sigma)),
// so that (A g) has coefficients M g and the Hilbert-Schmidt norm of A is the
// Frobenius norm of M.

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace lsfts {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

enum class BasisFamily { fourier };

// Real Fourier basis on [0,1] in FDA order:
//   psi_1 = 1, psi_2 = sqrt2 cos(2 pi tau), psi_3 = sqrt2 sin(2 pi tau),
//   psi_4 = sqrt2 cos(4 pi tau), ...
// Indices are 0-based in code (index 0 is the constant function).
class BasisSpec {
 public:
  explicit BasisSpec(int K, BasisFamily family = BasisFamily::fourier);

  int size() const noexcept { return K_; }
  BasisFamily family() const noexcept { return family_; }

  double eval(int index, double tau) const;
  Eigen::VectorXd eval_all(double tau) const;
  // M x K matrix of basis values at the grid points.
  Eigen::MatrixXd design(std::span<const double> grid) const;

 private:
  int K_;
  BasisFamily family_;
};

struct FunctionVec {
  CVector coeffs;

  FunctionVec() = default;
  explicit FunctionVec(CVector c) : coeffs(std::move(c)) {}

  static FunctionVec zero(int K) { return FunctionVec(CVector::Zero(K)); }
  static FunctionVec unit(int K, int index);

  int size() const noexcept { return static_cast<int>(coeffs.size()); }
  // L^2 norm; equals the coefficient 2-norm by Parseval.
  double norm() const { return coeffs.norm(); }
  cplx eval(const BasisSpec& basis, double tau) const;
};

struct OpMatrix {
  CMatrix mat;

  OpMatrix() = default;
  explicit OpMatrix(CMatrix m) : mat(std::move(m)) {}

  static OpMatrix zero(int K) { return OpMatrix(CMatrix::Zero(K, K)); }
  static OpMatrix identity(int K) { return OpMatrix(CMatrix::Identity(K, K)); }
  static OpMatrix diagonal(const Eigen::VectorXd& d);
  static OpMatrix from_real(const Eigen::MatrixXd& m) { return OpMatrix(m.cast<cplx>()); }

  int size() const noexcept { return static_cast<int>(mat.rows()); }
  cplx operator()(int i, int j) const { return mat(i, j); }
};

// u (x) v: the rank-one operator g -> <g, v> u, matrix u v^H.
OpMatrix outer(const FunctionVec& u, const FunctionVec& v);

OpMatrix adjoint(const OpMatrix& M);

double hs_norm(const OpMatrix& M);
double op_norm(const OpMatrix& M);
double trace_norm(const OpMatrix& M);
Eigen::VectorXd singular_values(const OpMatrix& M);
double op_norm(const Eigen::MatrixXd& M);

// (A (x) B) C = A C B^dagger.
OpMatrix tensor_apply(const OpMatrix& A, const OpMatrix& B, const OpMatrix& C);

// Kernel value a(tau, sigma); tau and sigma must lie in [0,1].
cplx kernel_eval(const OpMatrix& M, const BasisSpec& basis, double tau, double sigma);

bool is_hermitian(const OpMatrix& M, double tol);
// Smallest eigenvalue of the Hermitian part (M + M^H)/2.
double min_eigenvalue(const OpMatrix& M);
// Hermitian with min eigenvalue >= -rel_tol * op_norm.
bool is_psd(const OpMatrix& M, double rel_tol = 1e-10);

}  // namespace lsfts
