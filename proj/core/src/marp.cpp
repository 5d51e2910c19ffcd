#include "lltlab/marp.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <ostream>

#include <fftw3.h>

#include "lltlab/errors.hpp"

namespace lltlab {

Matrix KernelDensity::integral() const {
  const int n = static_cast<int>(values.front().rows());
  Matrix acc = Matrix::Zero(n, n);
  for (int i = 0; i + 1 < grid.size(); ++i) {
    acc += 0.5 * (grid(i + 1) - grid(i)) * (values[i] + values[i + 1]);
  }
  return acc;
}

double KernelDensity::sup_norm0() const {
  double s = 0;
  for (const auto& v : values) s = std::max(s, norm0(v));
  return s;
}

StochasticMatrix embedded_chain(const MarpModel& m) { return m.embedded(); }

Matrix kernel_density_g1(const MarpModel& m, double y) {
  const int n = m.phases();
  if (y < 0) return Matrix::Zero(n, n);
  if (y == 0) return m.d1();
  return matrix_exponential(m.d0(), y) * m.d1();
}

namespace {
void check_grid(const GridSpec& grid) {
  if (grid.n_points < 3 || grid.y_max <= 0) {
    throw InvalidInput("grid must have y_max > 0 and at least 3 points");
  }
}

double suggest_y_max(const MarpModel& m, int n_steps) {
  // grow until the one-step tail is negligible, then scale by the step count
  double y = 1.0;
  while (norm0(matrix_exponential(m.d0(), y)) > 1e-10 && y < 1e4) y *= 1.5;
  return n_steps * y;
}
}  // namespace

KernelDensity convolve_density(const MarpModel& m, int n_steps, const GridSpec& grid,
                               double tail_tol) {
  if (n_steps < 1) throw InvalidInput("convolve_density: n_steps must be >= 1");
  check_grid(grid);
  const int np = grid.n_points;
  const double h = grid.step();

  KernelDensity out;
  out.n_steps = n_steps;
  out.grid = Vector::LinSpaced(np, 0.0, grid.y_max);

  std::vector<Matrix> g1(np);
  for (int i = 0; i < np; ++i) g1[i] = kernel_density_g1(m, out.grid(i));
  out.values = g1;

  std::vector<Matrix> cur = g1;
  for (int step = 2; step <= n_steps; ++step) {
    std::vector<Matrix> next(np);
    next[0] = Matrix::Zero(m.phases(), m.phases());  // convolutions vanish at 0
    for (int i = 1; i < np; ++i) {
      Matrix acc = 0.5 * (cur[0] * g1[i] + cur[i] * g1[0]);
      for (int j = 1; j < i; ++j) acc += cur[j] * g1[i - j];
      next[i] = h * acc;
    }
    cur = std::move(next);
  }
  out.values = std::move(cur);

  const Matrix pn = [&] {
    Matrix p = m.embedded().entries();
    Matrix acc = Matrix::Identity(m.phases(), m.phases());
    for (int i = 0; i < n_steps; ++i) acc *= p;
    return acc;
  }();
  // the deficit conflates tail loss and O(h^2) quadrature error; flag only
  // when it clearly exceeds what quadrature alone can explain
  out.mass_deficit = norm0(pn - out.integral());
  if (out.mass_deficit > std::max(tail_tol, 50.0 * h * h * n_steps)) {
    throw GridTooSmall("convolve_density: captured mass falls short of P^n",
                       suggest_y_max(m, n_steps));
  }
  return out;
}

CMatrix fourier_kernel(const MarpModel& m, double zeta) {
  const int n = m.phases();
  CMatrix a = m.d0().cast<Complex>();
  a += Complex(0, zeta) * CMatrix::Identity(n, n);
  return (-a).partialPivLu().solve(m.d1().cast<Complex>());
}

KernelDensity invert_density_fft(const MarpModel& m, int n_steps, const GridSpec& grid,
                                 double mass_tol) {
  if (n_steps < 1) throw InvalidInput("invert_density_fft: n_steps must be >= 1");
  check_grid(grid);
  const int n = m.phases();
  const int np = grid.n_points;
  const double h_out = grid.step();

  // refine the internal grid until the Nyquist frequency sees a negligible
  // transform; powers of the one-step transform decay like |z|^{-n_steps}
  const double d1n = norm0(m.d1());
  int refine = 0;
  auto nyquist_ok = [&](int r) {
    const double h = h_out / (1 << r);
    const double z = M_PI / h;
    const double bound = std::pow(2.0 * n * d1n / z, n_steps);
    return bound < 1e-12 || norm0(fourier_kernel(m, z)) < 1e-14;
  };
  while (!nyquist_ok(refine) && refine < 8) ++refine;

  const double h = h_out / (1 << refine);
  // periodization length: pad past y_max to keep wrap-around mass negligible
  std::size_t min_M = static_cast<std::size_t>(std::ceil((grid.y_max * 1.5 + 20.0) / h));
  std::size_t M = 1;
  while (M < min_M) M <<= 1;
  const double period = static_cast<double>(M) * h;
  const double dz = 2.0 * M_PI / period;

  // transform samples, frequency-major, one array per matrix entry
  std::vector<std::vector<Complex>> freq(static_cast<size_t>(n) * n,
                                         std::vector<Complex>(M));
  for (std::size_t j = 0; j < M; ++j) {
    // FFTW forward sign convention pairs index j with frequency +j*dz
    const double z = (j <= M / 2) ? j * dz : (static_cast<double>(j) - static_cast<double>(M)) * dz;
    CMatrix gz = fourier_kernel(m, z);
    // binary power
    CMatrix acc = CMatrix::Identity(n, n);
    CMatrix base = gz;
    int e = n_steps;
    while (e > 0) {
      if (e & 1) acc = acc * base;
      base = base * base;
      e >>= 1;
    }
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) freq[static_cast<size_t>(r) * n + c][j] = acc(r, c);
  }

  KernelDensity out;
  out.n_steps = n_steps;
  out.grid = Vector::LinSpaced(np, 0.0, grid.y_max);
  out.values.assign(static_cast<size_t>(np), Matrix::Zero(n, n));

  std::vector<Complex> time(M);
  fftw_plan plan = fftw_plan_dft_1d(
      static_cast<int>(M), reinterpret_cast<fftw_complex*>(freq[0].data()),
      reinterpret_cast<fftw_complex*>(time.data()), FFTW_FORWARD, FFTW_ESTIMATE);
  const int stride = 1 << refine;
  double max_imag = 0.0;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      fftw_execute_dft(plan,
                       reinterpret_cast<fftw_complex*>(freq[static_cast<size_t>(r) * n + c].data()),
                       reinterpret_cast<fftw_complex*>(time.data()));
      for (int i = 0; i < np; ++i) {
        const Complex v = time[static_cast<size_t>(i) * stride] / period;
        out.values[static_cast<size_t>(i)](r, c) = v.real();
        max_imag = std::max(max_imag, std::abs(v.imag()));
      }
    }
  }
  fftw_destroy_plan(plan);

  const Matrix pn = [&] {
    Matrix acc = Matrix::Identity(n, n);
    for (int i = 0; i < n_steps; ++i) acc *= m.embedded().entries();
    return acc;
  }();
  out.mass_deficit = norm0(pn - out.integral());
  if (out.mass_deficit > mass_tol || max_imag > 1e-8) {
    throw ResolutionError("invert_density_fft: aliasing detected (mass mismatch " +
                          std::to_string(out.mass_deficit) + ")");
  }
  return out;
}

void export_density_csv(const KernelDensity& density, std::ostream& os) {
  const int n = static_cast<int>(density.values.front().rows());
  os << "y";
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) os << ",g" << r << c;
  os << "\n";
  char buf[40];
  for (int i = 0; i < density.grid.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.12g", density.grid(i));
    os << buf;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        std::snprintf(buf, sizeof(buf), ",%.12g", density.values[static_cast<size_t>(i)](r, c));
        os << buf;
      }
    }
    os << "\n";
  }
}

double third_moment(const MarpModel& m, int k) {
  if (k < 0 || k >= m.phases()) throw InvalidInput("third_moment: bad state");
  Eigen::PartialPivLU<Matrix> lu(Matrix(-m.d0()));
  Vector v = lu.solve(Vector::Ones(m.phases()));
  v = lu.solve(v);
  v = lu.solve(v);
  return 6.0 * v(k);
}

MarpAcDiagnostics marp_ac_diagnostics(const MarpModel& m, int t0) {
  if (t0 < 1) throw InvalidInput("marp_ac_diagnostics: t0 must be >= 1");
  MarpAcDiagnostics d;
  d.singular_mass = 0.0;  // the kernel is a density times Lebesgue by construction
  const int n = m.phases();
  const double d1n = norm0(m.d1());

  for (double z : {10.0, 100.0, 1000.0}) {
    CMatrix g = fourier_kernel(m, z);
    CMatrix acc = CMatrix::Identity(n, n);
    for (int i = 0; i < t0; ++i) acc *= g;
    d.decay.push_back({z, norm0(acc), std::pow(2.0 * n * d1n / z, t0)});
  }

  // dG1/dy = D0 e^{y D0} D1, scanned over a geometric probe grid
  d.deriv_bound = std::pow(n * std::max(norm0(m.d0()), d1n), 2);
  for (double y = 1.0 / 64; y < 32.0; y *= 1.5) {
    d.deriv_sup_measured = std::max(
        d.deriv_sup_measured, norm0(Matrix(m.d0() * matrix_exponential(m.d0(), y) * m.d1())));
  }
  d.deriv_sup_measured = std::max(d.deriv_sup_measured, norm0(Matrix(m.d0() * m.d1())));

  d.all_bounds_hold = d.deriv_sup_measured <= d.deriv_bound;
  for (const auto& p : d.decay) d.all_bounds_hold = d.all_bounds_hold && p.measured <= p.bound;
  return d;
}

}  // namespace lltlab
