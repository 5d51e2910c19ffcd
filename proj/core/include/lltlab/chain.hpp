#pragma once

#include <vector>

#include "lltlab/linalg.hpp"

namespace lltlab {

/// Row-stochastic matrix. Construction validates: entries in [0,1] and every
/// row summing to 1 within 1e-12. Inputs failing either are rejected, never
/// renormalized.
class StochasticMatrix {
 public:
  static constexpr double kRowSumTol = 1e-12;

  explicit StochasticMatrix(Matrix p);

  int size() const { return static_cast<int>(p_.rows()); }
  const Matrix& entries() const { return p_; }
  double operator()(int k, int l) const { return p_(k, l); }

 private:
  Matrix p_;
};

/// CTMC generator: nonnegative off-diagonal, rows summing to 0 within 1e-12.
class GeneratorMatrix {
 public:
  static constexpr double kRowSumTol = 1e-12;

  explicit GeneratorMatrix(Matrix g);

  int size() const { return static_cast<int>(g_.rows()); }
  const Matrix& entries() const { return g_; }
  double operator()(int k, int l) const { return g_(k, l); }
  /// max_j |G(j,j)|
  double max_exit_rate() const;

 private:
  Matrix g_;
};

/// Probability vector: nonnegative, sums to 1 within 1e-12.
class ProbabilityVector {
 public:
  static constexpr double kSumTol = 1e-12;

  explicit ProbabilityVector(Vector w);

  int size() const { return static_cast<int>(w_.size()); }
  const Vector& weights() const { return w_; }
  double operator()(int k) const { return w_(k); }

 private:
  Vector w_;
};

/// Generator with one state's row and column deleted. Its leading eigenvalue
/// -r_i (eigenvalue of maximal real part) controls how fast "state i never
/// visited" probabilities decay: ||e^{t G_sub}||_0 = O(e^{-r_i t}).
struct SubGenerator {
  int excluded_state = -1;
  Matrix entries;
  double pf_eigenvalue = 0.0;  // -r_i
  bool irreducible = false;    // r_i = 0 possible when false (absorbing block)

  double decay_rate() const { return -pf_eigenvalue; }
};

/// Strong connectivity of the directed graph of strictly positive entries.
bool is_irreducible(const Matrix& nonneg);

/// Exact graph check: strongly connected and period 1 (gcd of cycle lengths).
bool is_irreducible_aperiodic(const StochasticMatrix& p);

/// Unique invariant law of an irreducible stochastic matrix, by direct linear
/// solve of (P^T - I) with an appended normalization row.
/// Throws NotIrreducible when the chain is reducible.
ProbabilityVector stationary_distribution(const StochasticMatrix& p);

/// Invariant law of an irreducible generator (pi G = 0).
ProbabilityVector stationary_distribution(const GeneratorMatrix& g);

/// Delete row/column i of G and record the leading eigenvalue.
/// Throws Degenerate when G is 1x1.
SubGenerator subgenerator(const GeneratorMatrix& g, int i);

/// Perron root (spectral radius) of an entrywise-nonnegative matrix.
double perron_root(const Matrix& nonneg);

}  // namespace lltlab
