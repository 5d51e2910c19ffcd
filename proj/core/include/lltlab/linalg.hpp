#pragma once

#include <Eigen/Dense>
#include <complex>

namespace lltlab {

using Matrix = Eigen::MatrixXd;
using CMatrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;

/// Entrywise max-norm: max_{k,l} |A(k,l)|.
template <typename Derived>
double norm0(const Eigen::MatrixBase<Derived>& a) {
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().maxCoeff();
}

/// Operator norm induced by the sup norm on vectors: max absolute row sum.
template <typename Derived>
double norm_inf(const Eigen::MatrixBase<Derived>& a) {
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().rowwise().sum().maxCoeff();
}

/// Both norms of one matrix; norm0 <= norm_inf <= rows * norm0.
struct MatrixNorms {
  double norm0 = 0.0;
  double norm_inf = 0.0;
};
template <typename Derived>
MatrixNorms matrix_norms(const Eigen::MatrixBase<Derived>& a) {
  return {norm0(a), norm_inf(a)};
}

/// e^{tA} by scaling-and-squaring with Pade approximants.
/// Throws InvalidInput on non-finite entries.
Matrix matrix_exponential(const Matrix& a, double t = 1.0);
CMatrix matrix_exponential(const CMatrix& a, double t = 1.0);

/// Spectral radius (largest eigenvalue modulus) of a dense matrix.
double spectral_radius(const CMatrix& a);
double spectral_radius(const Matrix& a);

/// Eigenvalue of maximal real part (real for Metzler / nonnegative matrices).
double max_real_eigenvalue(const Matrix& a);

/// Ordinary least squares fit y ~ slope*x + intercept.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r2 = 1.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace lltlab
