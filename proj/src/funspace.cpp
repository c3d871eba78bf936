#include "funspace.hpp"

#include <cmath>
#include <string>

#include "errors.hpp"

namespace lsfts {

BasisSpec::BasisSpec(int K, BasisFamily family) : K_(K), family_(family) {
  if (K < 1) throw InvalidArgument("basis size K must be >= 1, got " + std::to_string(K));
}

double BasisSpec::eval(int index, double tau) const {
  if (index < 0 || index >= K_) throw InvalidArgument("basis index out of range");
  if (index == 0) return 1.0;
  const int freq = (index + 1) / 2;
  const double arg = kTwoPi * freq * tau;
  return (index % 2 == 1) ? std::sqrt(2.0) * std::cos(arg) : std::sqrt(2.0) * std::sin(arg);
}

Eigen::VectorXd BasisSpec::eval_all(double tau) const {
  Eigen::VectorXd out(K_);
  for (int k = 0; k < K_; ++k) out(k) = eval(k, tau);
  return out;
}

Eigen::MatrixXd BasisSpec::design(std::span<const double> grid) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(grid.size()), K_);
  for (std::size_t i = 0; i < grid.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = eval_all(grid[i]).transpose();
  return out;
}

FunctionVec FunctionVec::unit(int K, int index) {
  CVector c = CVector::Zero(K);
  c(index) = 1.0;
  return FunctionVec(std::move(c));
}

cplx FunctionVec::eval(const BasisSpec& basis, double tau) const {
  if (size() > basis.size()) throw InvalidArgument("FunctionVec::eval: basis smaller than vector");
  const Eigen::VectorXd psi = basis.eval_all(tau).head(size());
  return (coeffs.transpose() * psi.cast<cplx>())(0, 0);
}

OpMatrix OpMatrix::diagonal(const Eigen::VectorXd& d) {
  return OpMatrix(d.cast<cplx>().asDiagonal().toDenseMatrix());
}

OpMatrix outer(const FunctionVec& u, const FunctionVec& v) {
  return OpMatrix(u.coeffs * v.coeffs.adjoint());
}

OpMatrix adjoint(const OpMatrix& M) { return OpMatrix(M.mat.adjoint()); }

double hs_norm(const OpMatrix& M) { return M.mat.norm(); }

Eigen::VectorXd singular_values(const OpMatrix& M) {
  return Eigen::JacobiSVD<CMatrix>(M.mat).singularValues();
}

double op_norm(const OpMatrix& M) {
  if (M.mat.size() == 0) return 0.0;
  return singular_values(M)(0);
}

double op_norm(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues()(0);
}

double trace_norm(const OpMatrix& M) { return singular_values(M).sum(); }

OpMatrix tensor_apply(const OpMatrix& A, const OpMatrix& B, const OpMatrix& C) {
  if (A.mat.cols() != C.mat.rows() || C.mat.cols() != B.mat.cols())
    throw InvalidArgument("tensor_apply: non-conformable operators");
  return OpMatrix(A.mat * C.mat * B.mat.adjoint());
}

cplx kernel_eval(const OpMatrix& M, const BasisSpec& basis, double tau, double sigma) {
  if (!(tau >= 0.0 && tau <= 1.0) || !(sigma >= 0.0 && sigma <= 1.0))
    throw InvalidArgument("kernel_eval: tau and sigma must lie in [0,1]");
  if (M.size() > basis.size()) throw InvalidArgument("kernel_eval: basis smaller than operator");
  const Eigen::VectorXcd a = basis.eval_all(tau).head(M.size()).cast<cplx>();
  const Eigen::VectorXcd b = basis.eval_all(sigma).head(M.size()).cast<cplx>();
  // Basis functions are real, so conj(psi_j(sigma)) = psi_j(sigma).
  return (a.transpose() * M.mat * b)(0, 0);
}

bool is_hermitian(const OpMatrix& M, double tol) {
  if (M.mat.rows() != M.mat.cols()) return false;
  return (M.mat - M.mat.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

double min_eigenvalue(const OpMatrix& M) {
  const CMatrix H = 0.5 * (M.mat + M.mat.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool is_psd(const OpMatrix& M, double rel_tol) {
  const double scale = op_norm(M);
  if (!is_hermitian(M, 1e-10 * std::max(scale, 1.0))) return false;
  return min_eigenvalue(M) >= -rel_tol * std::max(scale, 1e-300);
}

}  // namespace lsfts
