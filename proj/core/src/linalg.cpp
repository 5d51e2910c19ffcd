#include "lltlab/linalg.hpp"

#include <cmath>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "lltlab/errors.hpp"

namespace lltlab {

namespace {
template <typename M>
M expm_impl(const M& a, double t) {
  if (!a.allFinite() || !std::isfinite(t)) {
    throw InvalidInput("matrix_exponential: non-finite input");
  }
  if (a.rows() != a.cols()) {
    throw InvalidInput("matrix_exponential: matrix must be square");
  }
  if (t == 0.0) return M::Identity(a.rows(), a.cols());
  return (t * a).exp();
}
}  // namespace

Matrix matrix_exponential(const Matrix& a, double t) { return expm_impl(a, t); }
CMatrix matrix_exponential(const CMatrix& a, double t) { return expm_impl(a, t); }

double spectral_radius(const CMatrix& a) {
  if (a.rows() == 1) return std::abs(a(0, 0));
  Eigen::ComplexEigenSolver<CMatrix> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_radius(const Matrix& a) {
  return spectral_radius(CMatrix(a.cast<Complex>()));
}

double max_real_eigenvalue(const Matrix& a) {
  if (a.rows() == 1) return a(0, 0);
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff();
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidInput("fit_line: need at least two points");
  }
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw InvalidInput("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
  }
  f.r2 = (syy > 0) ? 1.0 - ss_res / syy : 1.0;
  if (x.size() > 2) {
    f.slope_stderr = std::sqrt(ss_res / ((n - 2.0) * sxx));
  }
  return f;
}

}  // namespace lltlab
