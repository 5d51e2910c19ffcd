#pragma once

#include <functional>
#include <vector>

#include "lltlab/map_model.hpp"

namespace lltlab {

/// The complex N x N transform matrix of the centered additive process at one
/// frequency: entries(k,l) = E_k[1{X_t = l} e^{i <zeta, Y_t>}]. Row-stochastic
/// and real at zeta = 0; every entry has modulus <= 1 and the row-sum norm is
/// a contraction.
struct FourierMatrix {
  Vector zeta;
  double t = 0.0;
  CMatrix entries;
};

/// Renewal models: the one-step transform raised to the integer power t
/// (non-integer t is rejected). Local-time models: the exact closed form
/// e^{t(G + i diag(zeta, 0))} times the centering phase.
FourierMatrix fourier_matrix(const MapModel& model, double t, const Vector& zeta);

/// ||Y_{t+s}(zeta) - Y_t(zeta) Y_s(zeta)||_0.
double semigroup_residual(const MapModel& model, double t, double s, const Vector& zeta);

/// phi_{k,t}(zeta) = row-k sum of the transform matrix; modulus <= 1.
Complex characteristic_function(const MapModel& model, int k, double t, const Vector& zeta);

/// Dominant-eigenvalue data of the one-step transform at one frequency.
/// left/right are normalized so left.dot(right) = 1, and continuously with
/// right(0) = 1, left(0) = pi.
struct EigenPerturbation {
  Vector zeta;
  Complex lambda;
  CVector left;    // row eigenvector
  CVector right;   // column eigenvector
  double spectral_gap = 0.0;  // |lambda_1| - |lambda_2|
};
EigenPerturbation eigen_perturbation(const MapModel& model, const Vector& zeta,
                                     double gap_floor = 1e-6);

/// Split of the characteristic function into the dominant spectral branch and
/// the geometrically decaying remainder:
///   main = lambda^{floor(t)} * (e_k Proj(zeta) Y_{t-floor(t)}(zeta) 1),
///   remainder = phi_{k,t} - main.
struct CharacteristicSplit {
  Complex main;
  Complex remainder;
};
CharacteristicSplit decomposition_residual(const MapModel& model, int k, double t,
                                           const Vector& zeta, double gap_floor = 1e-6);

/// Asymptotic covariance of t^{-1/2} Y_t together with the centering vector.
/// se is entrywise standard error (zero for the Hessian method).
struct CovarianceMatrix {
  Matrix sigma;
  Vector m;
  Matrix se;
};
enum class CovarianceMethod { kHessian, kMonteCarlo };
struct McCovarianceSettings {
  long n_paths = 200000;
  double t = 100.0;
  std::uint64_t seed = 20240901;
  int start_state = 0;
  int threads = 1;
};
/// kHessian: -grad^2 of Re log lambda at 0 by Richardson-extrapolated central
/// differences. kMonteCarlo: midpoint-extrapolated empirical covariance
/// 2 Cov(t) - Cov(t/2) on one path ensemble, removing the O(1/t) bias.
CovarianceMatrix covariance(const MapModel& model, CovarianceMethod method,
                            const McCovarianceSettings& mc = {});

/// max over a grid of the normalized deviation
/// |lambda(t^{-1/2} zeta)^{floor(t)} - e^{-||zeta||^2/2}| * sqrt(t)
///   / ((1 + ||zeta||^3) e^{-||zeta||^2/8}),
/// after whitening frequencies by the Cholesky factor of Sigma. Grid points
/// outside the perturbation disc are skipped and counted.
struct GaussianBoundCheck {
  double max_violation = 0.0;
  int evaluated = 0;
  int skipped = 0;
};
GaussianBoundCheck gaussian_eigen_bound_check(const MapModel& model, double t,
                                              const std::vector<Vector>& zeta_grid,
                                              const Matrix* sigma = nullptr,
                                              double gap_floor = 1e-6);

/// Spectral radii of the one-step transform over a grid of the annulus
/// delta <= ||zeta|| <= A. The verdict is a grid diagnostic, not a proof.
struct LatticeDiagnostic {
  enum class Verdict { kNonlattice, kSuspectedLattice };
  std::vector<std::pair<Vector, double>> grid;
  double max_radius_off_zero = 0.0;
  Verdict verdict = Verdict::kSuspectedLattice;
};
LatticeDiagnostic lattice_scan(const MapModel& model, double delta, double a_max,
                               int grid_resolution, double radius_margin = 1e-3);
/// Same scan over an arbitrary one-step transform family (for synthetic
/// lattice chains in tests).
LatticeDiagnostic lattice_scan(const std::function<CMatrix(const Vector&)>& one_step,
                               int dim, double delta, double a_max, int grid_resolution,
                               double radius_margin = 1e-3);

/// Per-model annulus maxima, the family supremum, and the largest jump
/// between neighbouring members (continuity probe).
struct FamilyRadiusSweep {
  std::vector<double> per_model;
  double supremum = 0.0;
  double max_adjacent_jump = 0.0;
};
FamilyRadiusSweep uniform_radius_sweep(const std::vector<MapModel>& family, double delta,
                                       double a_max, int grid_resolution);

}  // namespace lltlab
