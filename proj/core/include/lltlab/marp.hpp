#pragma once

#include <ostream>
#include <vector>

#include "lltlab/map_model.hpp"

namespace lltlab {

/// Uniform grid on [0, y_max] with n_points samples (inclusive endpoints).
struct GridSpec {
  double y_max = 0.0;
  int n_points = 0;

  double step() const { return y_max / (n_points - 1); }
};

/// Matrix-valued density of the n-step arrival kernel, sampled on a grid.
struct KernelDensity {
  int n_steps = 0;
  Vector grid;
  std::vector<Matrix> values;  // one N x N matrix per grid point
  double mass_deficit = 0.0;   // max row deviation of the integral from P^n

  /// Trapezoid integral of every entry over the grid.
  Matrix integral() const;
  /// sup over the grid of norm0.
  double sup_norm0() const;
};

/// P(k,l) = ((-D0)^{-1} D1)(k,l); the phase chain seen at arrivals.
StochasticMatrix embedded_chain(const MarpModel& m);

/// One-step kernel density: e^{y D0} D1 for y > 0, D1 at y = 0, zero for y < 0.
Matrix kernel_density_g1(const MarpModel& m, double y);

/// n-fold convolution of the one-step density by iterated trapezoid
/// convolution on the grid. Throws GridTooSmall when the captured mass
/// falls short of P^n by more than tail_tol.
KernelDensity convolve_density(const MarpModel& m, int n_steps, const GridSpec& grid,
                               double tail_tol = 1e-8);

/// Fourier transform of the one-step kernel: -(D0 + i z I)^{-1} D1.
/// Decays like 2 ||D1||_0 / |z|.
CMatrix fourier_kernel(const MarpModel& m, double zeta);

/// n-step density recovered by discrete Fourier inversion of the n-th power
/// of the transform. Throws ResolutionError when the recovered mass mismatches
/// the embedded chain beyond mass_tol.
KernelDensity invert_density_fft(const MarpModel& m, int n_steps, const GridSpec& grid,
                                 double mass_tol = 1e-6);

/// E_k[Y_1^3] = 3! e_k (-D0)^{-3} 1.
double third_moment(const MarpModel& m, int k);

/// Absolute-continuity diagnostics: the renewal kernel has no singular part,
/// the transform obeys an explicit power-law decay, and the one-step density
/// has a bounded derivative.
struct MarpAcDiagnostics {
  double singular_mass = 0.0;  // identically zero for this family
  struct DecayProbe {
    double zeta;
    double measured;  // ||G_hat_{t0}(zeta)||_0
    double bound;     // (2 N ||D1||_0 / |zeta|)^{t0}
  };
  std::vector<DecayProbe> decay;
  double deriv_sup_measured = 0.0;  // sup_y ||dG1/dy||_0 over a probe grid
  double deriv_bound = 0.0;         // (N max(||D0||_0, ||D1||_0))^2
  bool all_bounds_hold = false;
};
MarpAcDiagnostics marp_ac_diagnostics(const MarpModel& m, int t0);

/// CSV rows "y, G(0,0), G(0,1), ..." with matrix entries in row-major order.
void export_density_csv(const KernelDensity& density, std::ostream& os);

}  // namespace lltlab
