#include "lltlab/fourier.hpp"

#include <cmath>

#include "lltlab/errors.hpp"
#include "lltlab/marp.hpp"
#include "lltlab/montecarlo.hpp"

namespace lltlab {

namespace {

int integer_time(double t, const char* what) {
  const auto n = static_cast<long long>(std::llround(t));
  if (n < 0 || std::abs(t - static_cast<double>(n)) > 1e-9) {
    throw InvalidInput(std::string(what) + ": renewal models run on integer time");
  }
  return static_cast<int>(n);
}

CMatrix matrix_power(CMatrix base, long long e) {
  CMatrix acc = CMatrix::Identity(base.rows(), base.cols());
  while (e > 0) {
    if (e & 1) acc = acc * base;
    base = base * base;
    e >>= 1;
  }
  return acc;
}

CMatrix one_step_transform(const MapModel& model, const Vector& zeta) {
  return std::visit(
      [&](const auto& m) -> CMatrix {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MarpModel>) {
          if (zeta.size() != 1) throw InvalidInput("fourier: frequency must be scalar");
          return std::exp(Complex(0, -zeta(0) * m.mean_increment())) *
                 fourier_kernel(m, zeta(0));
        } else {
          const int n = m.states();
          if (static_cast<int>(zeta.size()) != n - 1) {
            throw InvalidInput("fourier: frequency dimension mismatch");
          }
          CMatrix gen = m.generator().entries().template cast<Complex>();
          for (int j = 0; j < n - 1; ++j) gen(j, j) += Complex(0, zeta(j));
          const double phase = -zeta.dot(m.m_prime());
          return std::exp(Complex(0, phase)) * matrix_exponential(gen, 1.0);
        }
      },
      model);
}

}  // namespace

FourierMatrix fourier_matrix(const MapModel& model, double t, const Vector& zeta) {
  if (t < 0) throw InvalidInput("fourier_matrix: negative time");
  FourierMatrix out;
  out.zeta = zeta;
  out.t = t;
  out.entries = std::visit(
      [&](const auto& m) -> CMatrix {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MarpModel>) {
          const int n = integer_time(t, "fourier_matrix");
          if (zeta.size() != 1) throw InvalidInput("fourier_matrix: frequency must be scalar");
          if (n == 0) return CMatrix::Identity(m.phases(), m.phases());
          return matrix_power(one_step_transform(model, zeta), n);
        } else {
          const int n = m.states();
          if (static_cast<int>(zeta.size()) != n - 1) {
            throw InvalidInput("fourier_matrix: frequency dimension mismatch");
          }
          if (t == 0) return CMatrix::Identity(n, n);
          CMatrix gen = m.generator().entries().template cast<Complex>();
          for (int j = 0; j < n - 1; ++j) gen(j, j) += Complex(0, zeta(j));
          const double phase = -t * zeta.dot(m.m_prime());
          return std::exp(Complex(0, phase)) * matrix_exponential(gen, t);
        }
      },
      model);
  return out;
}

double semigroup_residual(const MapModel& model, double t, double s, const Vector& zeta) {
  const CMatrix yts = fourier_matrix(model, t + s, zeta).entries;
  const CMatrix yt = fourier_matrix(model, t, zeta).entries;
  const CMatrix ys = fourier_matrix(model, s, zeta).entries;
  return norm0(CMatrix(yts - yt * ys));
}

Complex characteristic_function(const MapModel& model, int k, double t, const Vector& zeta) {
  const int n = state_count(model);
  if (k < 0 || k >= n) throw InvalidInput("characteristic_function: bad state");
  const CMatrix y = fourier_matrix(model, t, zeta).entries;
  return y.row(k).sum();
}

EigenPerturbation eigen_perturbation(const MapModel& model, const Vector& zeta,
                                     double gap_floor) {
  const CMatrix y1 = one_step_transform(model, zeta);
  const int n = static_cast<int>(y1.rows());

  Eigen::ComplexEigenSolver<CMatrix> right_solver(y1, true);
  if (right_solver.info() != Eigen::Success) {
    throw NumericalError("eigen_perturbation: eigensolver failed");
  }
  // dominant by modulus, ties broken by descending real part
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  const CVector vals = right_solver.eigenvalues();
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ma = std::abs(vals(a)), mb = std::abs(vals(b));
    if (ma != mb) return ma > mb;
    return vals(a).real() > vals(b).real();
  });
  const Complex lambda = vals(order[0]);
  const double gap = (n > 1) ? std::abs(lambda) - std::abs(vals(order[1])) : 1.0;
  if (gap < gap_floor) {
    throw PerturbationRegimeExceeded("eigen_perturbation: spectral gap below floor");
  }

  CVector right = right_solver.eigenvectors().col(order[0]);

  // left row vector: eigenvector of the transpose for the same eigenvalue
  Eigen::ComplexEigenSolver<CMatrix> left_solver(CMatrix(y1.transpose()), true);
  if (left_solver.info() != Eigen::Success) {
    throw NumericalError("eigen_perturbation: eigensolver failed (transpose)");
  }
  int best = 0;
  double bestd = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double dd = std::abs(left_solver.eigenvalues()(i) - lambda);
    if (dd < bestd) {
      bestd = dd;
      best = i;
    }
  }
  CVector left = left_solver.eigenvectors().col(best);

  // scale so that <pi, right> = 1 (hence right -> 1 at zeta = 0), then
  // left so that left.right = 1 (hence left -> pi at zeta = 0)
  const Vector pi = stationary_distribution(one_step_matrix(model)).weights();
  const Complex pr = pi.cast<Complex>().dot(right);
  if (std::abs(pr) < 1e-8) {
    throw PerturbationRegimeExceeded("eigen_perturbation: dominant vector orthogonal to pi");
  }
  right /= pr;
  const Complex lr = (left.transpose() * right)(0);
  if (std::abs(lr) < 1e-12) {
    throw NumericalError("eigen_perturbation: defective eigenpair");
  }
  left /= lr;

  EigenPerturbation out;
  out.zeta = zeta;
  out.lambda = lambda;
  out.left = left;
  out.right = right;
  out.spectral_gap = gap;
  return out;
}

CharacteristicSplit decomposition_residual(const MapModel& model, int k, double t,
                                           const Vector& zeta, double gap_floor) {
  const int n = state_count(model);
  if (k < 0 || k >= n) throw InvalidInput("decomposition_residual: bad state");
  const EigenPerturbation ep = eigen_perturbation(model, zeta, gap_floor);
  const double tfrac = discrete_time(model) ? 0.0 : t - std::floor(t);
  const auto tfloor = static_cast<long long>(std::floor(t + 1e-12));

  const CMatrix proj = ep.right * ep.left.transpose();
  CMatrix tail = (tfrac > 0) ? fourier_matrix(model, tfrac, zeta).entries
                             : CMatrix::Identity(n, n);
  const CVector ones = CVector::Ones(n);
  const Complex scalar = (proj * tail * ones)(k);

  CharacteristicSplit out;
  out.main = std::pow(ep.lambda, static_cast<double>(tfloor)) * scalar;
  out.remainder = characteristic_function(model, k, t, zeta) - out.main;
  return out;
}

namespace {
// Re log lambda at a frequency; the covariance is minus its Hessian at zero.
double log_modulus_lambda(const MapModel& model, const Vector& zeta, double gap_floor) {
  return std::log(std::abs(eigen_perturbation(model, zeta, gap_floor).lambda));
}

Matrix hessian_of_log_lambda(const MapModel& model, double h, double gap_floor) {
  const int d = additive_dimension(model);
  auto f = [&](const Vector& z) { return log_modulus_lambda(model, z, gap_floor); };
  Matrix hess(d, d);
  const double f0 = f(Vector::Zero(d));  // ~0; kept for roundoff symmetry
  for (int i = 0; i < d; ++i) {
    Vector e = Vector::Zero(d);
    e(i) = h;
    hess(i, i) = (f(e) - 2 * f0 + f(-e)) / (h * h);
    for (int j = i + 1; j < d; ++j) {
      Vector ej = Vector::Zero(d);
      ej(j) = h;
      const double v = (f(e + ej) - f(e - ej) - f(-e + ej) + f(-e - ej)) / (4 * h * h);
      hess(i, j) = hess(j, i) = v;
    }
  }
  return hess;
}
}  // namespace

CovarianceMatrix covariance(const MapModel& model, CovarianceMethod method,
                            const McCovarianceSettings& mc) {
  CovarianceMatrix out;
  out.m = centering(model);
  const int d = additive_dimension(model);

  if (method == CovarianceMethod::kHessian) {
    const double gap_floor = 1e-9;
    // crude pass to size the step, then Richardson with the scaled step
    Matrix guess = -hessian_of_log_lambda(model, 1e-2, gap_floor);
    const double h = 1e-3 * std::sqrt(1.0 + norm0(guess));
    Matrix coarse = hessian_of_log_lambda(model, h, gap_floor);
    Matrix fine = hessian_of_log_lambda(model, h / 2, gap_floor);
    Matrix sigma = -(4.0 * fine - coarse) / 3.0;
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
    if (es.eigenvalues().minCoeff() < -1e-8 * std::max(1.0, norm0(sigma))) {
      throw NumericalError("covariance: numerical Hessian is indefinite");
    }
    out.sigma = sigma;
    out.se = Matrix::Zero(d, d);
    return out;
  }

  // Monte Carlo with midpoint extrapolation: Var(t^{-1/2} Y_t) = Sigma + c/t,
  // so 2 Cov_t - Cov_{t/2} cancels the O(1/t) term.
  SimulationOptions opt;
  opt.threads = mc.threads;
  opt.record_midpoint = true;
  const SimulationResult sim =
      simulate_paths(model, mc.start_state, mc.t, mc.n_paths, mc.seed, opt);

  const size_t n = sim.samples.size();
  const double s_full = 1.0 / std::sqrt(sim.t);
  const double s_half = 1.0 / std::sqrt(discrete_time(model)
                                            ? std::floor(sim.t / 2)
                                            : sim.t / 2);
  Vector mean_full = Vector::Zero(d), mean_half = Vector::Zero(d);
  for (const auto& s : sim.samples) {
    mean_full += s.y * s_full;
    mean_half += s.y_mid * s_half;
  }
  mean_full /= static_cast<double>(n);
  mean_half /= static_cast<double>(n);

  out.sigma.setZero(d, d);
  out.se.setZero(d, d);
  for (int a = 0; a < d; ++a) {
    for (int b = a; b < d; ++b) {
      double acc = 0, acc2 = 0;
      for (const auto& s : sim.samples) {
        const double pf = (s.y(a) * s_full - mean_full(a)) * (s.y(b) * s_full - mean_full(b));
        const double ph = (s.y_mid(a) * s_half - mean_half(a)) * (s.y_mid(b) * s_half - mean_half(b));
        const double infl = 2.0 * pf - ph;
        acc += infl;
        acc2 += infl * infl;
      }
      const double est = acc / static_cast<double>(n - 1);
      const double var = std::max(acc2 / static_cast<double>(n) - est * est, 0.0);
      out.sigma(a, b) = out.sigma(b, a) = est;
      out.se(a, b) = out.se(b, a) = std::sqrt(var / static_cast<double>(n));
    }
  }
  return out;
}

GaussianBoundCheck gaussian_eigen_bound_check(const MapModel& model, double t,
                                              const std::vector<Vector>& zeta_grid,
                                              const Matrix* sigma, double gap_floor) {
  if (t < 2) throw InvalidInput("gaussian_eigen_bound_check: t must be >= 2");
  const int d = additive_dimension(model);
  Matrix sig;
  if (sigma) {
    sig = *sigma;
  } else {
    sig = covariance(model, CovarianceMethod::kHessian).sigma;
  }
  Eigen::LLT<Matrix> llt(sig);
  if (llt.info() != Eigen::Success) {
    throw DegenerateCovariance("gaussian_eigen_bound_check: covariance not positive definite");
  }
  // whitened frequency: lambda_tilde(z) = lambda(L^{-T} z)
  const Matrix linv_t = llt.matrixL().toDenseMatrix().transpose().inverse();

  GaussianBoundCheck out;
  const auto tfloor = static_cast<double>(static_cast<long long>(std::floor(t + 1e-12)));
  for (const Vector& z : zeta_grid) {
    if (static_cast<int>(z.size()) != d) {
      throw InvalidInput("gaussian_eigen_bound_check: frequency dimension mismatch");
    }
    const double nz = z.norm();
    if (nz == 0.0) {
      out.evaluated++;
      continue;  // deviation is identically zero at the origin
    }
    const Vector scaled = linv_t * z / std::sqrt(t);
    Complex lambda;
    try {
      lambda = eigen_perturbation(model, scaled, gap_floor).lambda;
    } catch (const PerturbationRegimeExceeded&) {
      out.skipped++;
      continue;
    }
    const double dev =
        std::abs(std::pow(lambda, tfloor) - std::exp(-0.5 * nz * nz));
    const double normalizer = (1.0 + nz * nz * nz) * std::exp(-nz * nz / 8.0);
    out.max_violation = std::max(out.max_violation, dev * std::sqrt(t) / normalizer);
    out.evaluated++;
  }
  return out;
}

LatticeDiagnostic lattice_scan(const std::function<CMatrix(const Vector&)>& one_step,
                               int dim, double delta, double a_max, int grid_resolution,
                               double radius_margin) {
  if (!(0 < delta && delta < a_max)) throw InvalidInput("lattice_scan: need 0 < delta < A");
  if (grid_resolution < 2) throw InvalidInput("lattice_scan: resolution too small");

  LatticeDiagnostic out;
  auto record = [&](const Vector& z) {
    const double r = spectral_radius(one_step(z));
    out.grid.emplace_back(z, r);
    out.max_radius_off_zero = std::max(out.max_radius_off_zero, r);
  };

  if (dim == 1) {
    for (int i = 0; i < grid_resolution; ++i) {
      const double z = delta + (a_max - delta) * i / (grid_resolution - 1);
      record(Vector::Constant(1, z));
    }
  } else if (dim == 2) {
    const int radial = grid_resolution;
    const int angular = grid_resolution;
    for (int i = 0; i < radial; ++i) {
      const double r = delta + (a_max - delta) * i / (radial - 1);
      for (int j = 0; j < angular; ++j) {
        const double th = 2.0 * M_PI * j / angular;
        record((Vector(2) << r * std::cos(th), r * std::sin(th)).finished());
      }
    }
  } else {
    throw InvalidInput("lattice_scan: dimension must be 1 or 2");
  }

  out.verdict = (out.max_radius_off_zero < 1.0 - radius_margin)
                    ? LatticeDiagnostic::Verdict::kNonlattice
                    : LatticeDiagnostic::Verdict::kSuspectedLattice;
  return out;
}

LatticeDiagnostic lattice_scan(const MapModel& model, double delta, double a_max,
                               int grid_resolution, double radius_margin) {
  return lattice_scan([&](const Vector& z) { return one_step_transform(model, z); },
                      additive_dimension(model), delta, a_max, grid_resolution,
                      radius_margin);
}

FamilyRadiusSweep uniform_radius_sweep(const std::vector<MapModel>& family, double delta,
                                       double a_max, int grid_resolution) {
  if (family.empty()) throw InvalidInput("uniform_radius_sweep: empty family");
  FamilyRadiusSweep out;
  for (const auto& m : family) {
    out.per_model.push_back(
        lattice_scan(m, delta, a_max, grid_resolution).max_radius_off_zero);
    out.supremum = std::max(out.supremum, out.per_model.back());
  }
  for (size_t i = 0; i + 1 < out.per_model.size(); ++i) {
    out.max_adjacent_jump =
        std::max(out.max_adjacent_jump, std::abs(out.per_model[i + 1] - out.per_model[i]));
  }
  return out;
}

}  // namespace lltlab
