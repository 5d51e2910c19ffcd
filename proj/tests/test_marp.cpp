#include <doctest.h>

#include <cmath>
#include <sstream>

#include "lltlab/errors.hpp"
#include "lltlab/marp.hpp"
#include "lltlab/montecarlo.hpp"
#include "lltlab/rng.hpp"
#include "support/models.hpp"
#include "support/oracles.hpp"

using namespace lltlab;

namespace {
MarpModel random_marp(PhiloxRng& rng, int n) {
  Matrix d0(n, n), d1(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      d0(i, j) = (i == j) ? 0.0 : rng.next_double();
      d1(i, j) = 0.1 + rng.next_double();
    }
    d0(i, i) = -(d0.row(i).sum() + d1.row(i).sum());
  }
  return MarpModel(d0, d1);
}
}  // namespace

TEST_CASE("embedded chain") {
  CHECK(embedded_chain(testmodels::marp2())(0, 0) == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(embedded_chain(testmodels::marp1())(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("embedded chain rows are stochastic for random models (property)") {
  PhiloxRng rng(31, 0);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 4);
    const MarpModel m = random_marp(rng, n);
    const Matrix p = m.embedded().entries();
    for (int i = 0; i < n; ++i) CHECK(p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("one-step kernel density") {
  const MarpModel m = testmodels::marp2();
  CHECK(norm0(kernel_density_g1(m, -1.0)) == 0.0);
  CHECK(norm0(Matrix(kernel_density_g1(m, 0.0) - m.d1())) == 0.0);
  CHECK(norm0(Matrix(kernel_density_g1(m, 1e-12) - m.d1())) < 1e-10);

  const MarpModel unit = testmodels::marp1();
  CHECK(kernel_density_g1(unit, 2.0)(0, 0) == doctest::Approx(std::exp(-2.0)));
}

TEST_CASE("convolution against the closed-form gamma density") {
  const MarpModel unit = testmodels::marp1();
  const GridSpec grid{25.0, 4097};
  const KernelDensity g3 = convolve_density(unit, 3, grid);
  double sup = 0;
  for (int i = 0; i < grid.n_points; ++i) {
    sup = std::max(sup, std::abs(g3.values[static_cast<size_t>(i)](0, 0) -
                                 oracles::gamma_pdf(3, 1.0, g3.grid(i))));
  }
  CHECK(sup < 1e-6);
}

TEST_CASE("convolution mass and caps") {
  const MarpModel m = testmodels::marp2();
  const GridSpec grid{18.0, 8193};
  const KernelDensity g3 = convolve_density(m, 3, grid);

  // integral matches the third power of the embedded chain
  const Matrix p = m.embedded().entries();
  CHECK(norm0(Matrix(g3.integral() - p * p * p)) < 1e-6);

  // kernels vanish at the origin beyond one step, start at D1 for one step
  CHECK(norm0(g3.values.front()) == 0.0);
  const KernelDensity g1 = convolve_density(m, 1, grid);
  CHECK(norm0(Matrix(g1.values.front() - m.d1())) == 0.0);

  // entrywise cap: phases * ||D1||_0
  CHECK(g3.sup_norm0() <= m.phases() * norm0(m.d1()) + 1e-12);
  for (const auto& v : g3.values) CHECK(v.minCoeff() >= 0.0);

  CHECK_THROWS_AS(convolve_density(m, 3, GridSpec{3.0, 512}), GridTooSmall);
}

TEST_CASE("convolution is associative (property)") {
  const MarpModel m = testmodels::marp2();
  const GridSpec grid{18.0, 8193};
  const KernelDensity g4 = convolve_density(m, 4, grid);
  const KernelDensity g2 = convolve_density(m, 2, grid);
  // direct discrete convolution of g2 with itself on the same grid
  const double h = grid.step();
  double sup = 0;
  for (int i = 0; i < grid.n_points; i += 64) {
    Matrix acc = Matrix::Zero(2, 2);
    if (i > 0) {
      acc = 0.5 * (g2.values[0] * g2.values[static_cast<size_t>(i)] +
                   g2.values[static_cast<size_t>(i)] * g2.values[0]);
      for (int j = 1; j < i; ++j)
        acc += g2.values[static_cast<size_t>(j)] * g2.values[static_cast<size_t>(i - j)];
      acc *= h;
    }
    sup = std::max(sup, norm0(Matrix(acc - g4.values[static_cast<size_t>(i)])));
  }
  CHECK(sup < 5e-6);
}

TEST_CASE("fourier kernel") {
  const MarpModel m = testmodels::marp2();
  CHECK(norm0(CMatrix(fourier_kernel(m, 0.0) - m.embedded().entries().cast<Complex>())) <
        1e-13);

  // scalar case: the exponential characteristic function
  const MarpModel unit = testmodels::marp1();
  const Complex v = fourier_kernel(unit, 0.7)(0, 0);
  CHECK(std::abs(v - 1.0 / Complex(1.0, -0.7)) < 1e-14);

  for (double z : {10.0, 100.0, 1000.0}) {
    CHECK(norm0(fourier_kernel(m, z)) * z <= 2.0 * norm0(m.d1()));
  }
}

TEST_CASE("fft inversion cross-checks the convolution route") {
  const MarpModel m = testmodels::marp2();
  const GridSpec grid{18.0, 8193};
  const KernelDensity direct = convolve_density(m, 4, grid);
  const KernelDensity inverted = invert_density_fft(m, 4, grid);
  double sup = 0, min_v = 0;
  for (int i = 0; i < grid.n_points; ++i) {
    sup = std::max(sup, norm0(Matrix(direct.values[static_cast<size_t>(i)] -
                                     inverted.values[static_cast<size_t>(i)])));
    min_v = std::min(min_v, inverted.values[static_cast<size_t>(i)].minCoeff());
  }
  CHECK(sup < 1e-5);
  CHECK(min_v >= -1e-8);  // inversion ringing stays bounded

  const MarpModel unit = testmodels::marp1();
  const GridSpec sgrid{25.0, 4097};
  const KernelDensity g3 = invert_density_fft(unit, 3, sgrid);
  double gsup = 0;
  for (int i = 0; i < sgrid.n_points; ++i) {
    gsup = std::max(gsup, std::abs(g3.values[static_cast<size_t>(i)](0, 0) -
                                   oracles::gamma_pdf(3, 1.0, g3.grid(i))));
  }
  CHECK(gsup < 1e-6);

  CHECK_THROWS_AS(invert_density_fft(m, 4, GridSpec{2.0, 257}), ResolutionError);
}

TEST_CASE("discrete transform of the convolved density matches the kernel power") {
  const MarpModel m = testmodels::marp2();
  const GridSpec grid{18.0, 8193};
  const KernelDensity g3 = convolve_density(m, 3, grid);
  const double h = grid.step();
  for (double z : {0.5, 2.0}) {
    CMatrix quad = CMatrix::Zero(2, 2);
    for (int i = 0; i < grid.n_points; ++i) {
      const double w = (i == 0 || i == grid.n_points - 1) ? 0.5 : 1.0;
      quad += w * h * std::exp(Complex(0, z * g3.grid(i))) *
              g3.values[static_cast<size_t>(i)].cast<Complex>();
    }
    const CMatrix g1 = fourier_kernel(m, z);
    CHECK(norm0(CMatrix(quad - g1 * g1 * g1)) < 1e-4);
  }
}

TEST_CASE("third moment") {
  CHECK(third_moment(testmodels::marp1(), 0) == doctest::Approx(6.0).epsilon(1e-12));
  Matrix d0(1, 1), d1(1, 1);
  d0 << -2;
  d1 << 2;
  CHECK(third_moment(MarpModel(d0, d1), 0) == doctest::Approx(0.75).epsilon(1e-12));

  // Monte Carlo oracle on the two-phase model
  const MapModel m = testmodels::marp2();
  const SimulationResult sim = simulate_paths(m, 0, 1.0, 200000, 97);
  double mean = 0, mean6 = 0;
  for (const auto& s : sim.samples) {
    const double y = s.raw(0);
    mean += y * y * y;
    mean6 += std::pow(y, 6);
  }
  mean /= static_cast<double>(sim.samples.size());
  mean6 /= static_cast<double>(sim.samples.size());
  const double se = std::sqrt((mean6 - mean * mean) / static_cast<double>(sim.samples.size()));
  CHECK(std::abs(mean - third_moment(testmodels::marp2(), 0)) <= 3 * se);
}

TEST_CASE("density csv export layout") {
  const MarpModel m = testmodels::marp2();
  const KernelDensity g1 = convolve_density(m, 1, GridSpec{8.0, 5}, 1e-1);
  std::ostringstream os;
  export_density_csv(g1, os);
  const std::string text = os.str();
  CHECK(text.rfind("y,g00,g01,g10,g11\n", 0) == 0);
  // first row: y = 0 and the entries of D1 in row-major order
  CHECK(text.find("\n0,1,0,1,2\n") != std::string::npos);
}

TEST_CASE("absolute-continuity diagnostics") {
  const MarpModel m = testmodels::marp2();
  const MarpAcDiagnostics d = marp_ac_diagnostics(m, 2);
  CHECK(d.singular_mass == 0.0);
  for (const auto& p : d.decay) CHECK(p.measured <= p.bound);
  CHECK(d.deriv_sup_measured <= d.deriv_bound);
  CHECK(d.all_bounds_hold);

  // dG1/dy at y = 1 equals D0 e^{D0} D1 (five-point finite differences)
  const Matrix expected = m.d0() * matrix_exponential(m.d0(), 1.0) * m.d1();
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const double fd = oracles::derivative5(
          [&](double y) { return kernel_density_g1(m, y)(r, c); }, 1.0, 3e-4);
      CHECK(std::abs(fd - expected(r, c)) < 1e-10);
    }
  }
}
