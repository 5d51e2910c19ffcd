#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include "lltlab/map_model.hpp"

namespace lltlab {

/// The occupation-time support simplex C_t = {y in (0,t)^{N-1} : <y,1> < t},
/// its centered translate D_t = C_t - m't, and deterministic boundary samples.
class SimplexGeometry {
 public:
  SimplexGeometry(double t, Vector m_prime);

  double t() const { return t_; }
  int dim() const { return static_cast<int>(m_prime_.size()); }

  bool contains_open(const Vector& y) const;
  bool contains_closed(const Vector& y) const;
  /// Membership in the centered region D_t (coordinates y_j in (-m_j t, (1-m_j)t),
  /// <y,1> < m_N t).
  bool centered_contains_open(const Vector& y) const;
  bool centered_contains_closed(const Vector& y) const;

  /// Halton-sequence samples of each boundary face (faces y_i = 0 for
  /// i < dim, then the diagonal face <y,1> = t). Supports dim <= 3.
  std::vector<std::vector<Vector>> boundary_samples(int per_face = 256) const;

 private:
  double t_;
  Vector m_prime_;
};

/// Exact law of the visit counts of the uniformized chain.
///
/// prob(start, steps, counts, end) = P_start{V_steps^i = counts_i for
/// i < N-1, Z_steps = end}, where V_steps^i counts visits to state i among
/// positions 0..steps. Built by forward dynamic programming over the count
/// lattice; storage covers every step up to n_steps.
class VisitCountTable {
 public:
  VisitCountTable(const LocalTimeModel& model, int n_steps,
                  std::size_t memory_budget_bytes = std::size_t(2) << 30);

  int n_steps() const { return n_steps_; }
  int states() const { return n_; }

  /// Raw visit-count probability; counts has length N-1.
  double prob(int start, int steps, std::span<const int> counts, int end) const;

  /// The density-series coefficient p_{k,l}(m, k_1..k_{N-1}) =
  /// prob(k, m-1, counts+1, l).
  double series_coefficient(int start, int m, std::span<const int> k_counts,
                            int end) const;

  /// Total mass over all counts and end states for one (start, steps) slice.
  double total_mass(int start, int steps) const;

 private:
  friend class VisitWalker;
  int n_;
  int n_steps_;
  int dim_;
  std::vector<std::vector<double>> slices_;  // per step: lattice-major N x N blocks
};

/// P_k{V_n^i = 0} = e_k (P_tilde restricted to {i}^c)^n 1; zero when k = i.
double visit_zero_probability(const LocalTimeModel& model, int i, int k, int n);

/// P_k{V_n^i = 1} by the renewal recursion
/// v(n+1) = P_sub v(n) + P_i{V_n = 1} P_{sub,i}, seeded with P_i{V_0=1} = 1.
double visit_one_probability(const LocalTimeModel& model, int i, int k, int n);

/// Multinomial coefficient of the density series with n! factored out:
/// x = prod_j (y_j/t)^{k_j} (1 - sum y/t)^{n - sum k} / (k_1! ... (n-sum k)!),
/// so that sum over the count lattice of n! x equals 1 exactly.
/// Throws OutOfSimplex when y lies outside the closed simplex.
double multinomial_coefficient(int n, std::span<const int> counts, double t,
                               const Vector& y);

/// One evaluation of the joint local-time density, with the recorded bound on
/// the dropped Poisson tail of the series.
struct JointDensityEval {
  double t = 0.0;
  int k = 0, l = 0;
  Vector y;
  double value = 0.0;
  double truncation_error = 0.0;
};

/// psi_{k,l,t}(y): density of (X_t = l, (L_t(1),..,L_t(N-1)) = y) under P_k.
/// Zero outside the closed simplex; bounded by a^{N-1} inside.
JointDensityEval joint_density(const LocalTimeModel& model, int k, int l, double t,
                               const Vector& y, double series_tol = 1e-10);

/// All (k,l) entries at once; substantially cheaper than N^2 single calls.
Matrix joint_density_matrix(const LocalTimeModel& model, double t, const Vector& y,
                            double series_tol = 1e-10);

/// Batch evaluation sharing one dynamic-programming sweep across points.
std::vector<Matrix> joint_density_batch(const LocalTimeModel& model, double t,
                                        const std::vector<Vector>& ys,
                                        double series_tol = 1e-10);

/// Centered density G_t(y) = Psi_t(y + m' t); supported on the closure of D_t.
double centered_density(const LocalTimeModel& model, int k, int l, double t,
                        const Vector& y);
std::vector<Matrix> centered_density_batch(const LocalTimeModel& model, double t,
                                           const std::vector<Vector>& ys,
                                           double series_tol = 1e-10);

/// d psi / d y_j by the shifted-coefficient series; |result| <= 2 a^N.
/// Throws OutOfSimplex unless y is interior.
double density_gradient(const LocalTimeModel& model, int k, int l, double t,
                        const Vector& y, int j, double series_tol = 1e-10);
std::vector<Matrix> density_gradient_batch(const LocalTimeModel& model, double t,
                                           const std::vector<Vector>& ys, int j,
                                           double series_tol = 1e-10);

/// Exact mass of the singular part of the local-time law.
///
/// face[i](k,l) = P_k{L_t(i) = 0, X_t = l} = e^{t G_{i^c i^c}}(k,l) for k,l != i
/// (faces i < N-1 are the coordinate faces y_i = 0; face N-1 is the diagonal
/// <y,1> = t, i.e. state N never visited). total is the inclusion-exclusion
/// sum over unvisited-state subsets, so integral(psi) + total = e^{tG} exactly.
struct SingularMass {
  std::vector<Matrix> face;
  Matrix total;
  double face_bound_norm0 = 0.0;  // ||sum of faces||_0, the union upper bound
  double total_norm0 = 0.0;
};
SingularMass singular_mass(const LocalTimeModel& model, double t);

/// sup over a grid of w in [t0, 2 t0) of ||Fourier(psi_w)(zeta)||_0, by
/// Filon-type quadrature of the density against e^{i<zeta,y>} (exact per cell
/// for the linear interpolant, so large |zeta| stays accurate).
/// Bounded by 2 a^{N-1}(1+a) max(1, t0^N) / max_j |zeta_j|.
double fourier_tail_gamma(const LocalTimeModel& model, double t0, const Vector& zeta,
                          int t_grid_points = 8, int base_resolution = 512);

/// Fourier transform of the a.c. part at a single (t, zeta), same quadrature.
CMatrix fourier_ac_transform(const LocalTimeModel& model, double t, const Vector& zeta,
                             int resolution = 512);

/// Projection from the zero-sum hyperplane to R^{N-1} (drop the last
/// coordinate); throws NotInHyperplane when <y,1> != 0 beyond 1e-10.
Vector project_map(const Vector& y);
/// Inverse: append -sum of the first N-1 coordinates.
Vector unproject_map(const Vector& y_prime);

/// CSV rows "y0[,y1..], value" for one (k,l) density slice at the points.
void export_density_slice_csv(const LocalTimeModel& model, int k, int l, double t,
                              const std::vector<Vector>& ys, std::ostream& os);

}  // namespace lltlab
