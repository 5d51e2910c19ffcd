#pragma once

#include <optional>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lltlab/chain.hpp"

namespace lltlab {

/// Markovian arrival process (D0, D1): a discrete-time Markov renewal family
/// whose n-th additive value is the n-th arrival epoch. D0 must be stable,
/// D0 + D1 an irreducible generator, D1 entrywise nonnegative.
class MarpModel {
 public:
  MarpModel(Matrix d0, Matrix d1);

  int phases() const { return static_cast<int>(d0_.rows()); }
  const Matrix& d0() const { return d0_; }
  const Matrix& d1() const { return d1_; }

  /// Transition matrix of the phase chain embedded at arrivals: (-D0)^{-1} D1.
  const StochasticMatrix& embedded() const { return embedded_; }
  /// Invariant law of the embedded chain.
  const ProbabilityVector& embedded_stationary() const { return phi_; }
  /// Stationary mean inter-arrival time; the centering constant.
  double mean_increment() const { return mean_increment_; }

 private:
  Matrix d0_, d1_;
  StochasticMatrix embedded_;
  ProbabilityVector phi_;
  double mean_increment_;
};

/// Finite CTMC with its uniformized chain and the per-state sub-generator
/// spectral data. The additive part is the vector of the first N-1 local
/// times, centered by t*pi.
class LocalTimeModel {
 public:
  /// P_tilde = I + G/a with a > max_j |G(j,j)| (default 1.2x that max).
  /// Throws InvalidRate when a is too small, NotIrreducible for reducible G.
  static LocalTimeModel uniformize(GeneratorMatrix g, std::optional<double> a = {});

  int states() const { return g_.size(); }
  const GeneratorMatrix& generator() const { return g_; }
  double rate() const { return a_; }
  const StochasticMatrix& p_tilde() const { return p_tilde_; }
  const ProbabilityVector& pi() const { return pi_; }
  /// (pi_1, ..., pi_{N-1}) — centering of the projected local-time vector.
  Vector m_prime() const { return pi_.weights().head(states() - 1); }

  const SubGenerator& sub(int i) const { return subs_.at(static_cast<size_t>(i)); }
  /// Perron root of P_tilde with row/column i removed (= 1 - r_i/a).
  double rho(int i) const { return rhos_.at(static_cast<size_t>(i)); }
  double min_decay_rate() const;  // min_i r_i
  double max_rho() const;

 private:
  LocalTimeModel(GeneratorMatrix g, double a);

  GeneratorMatrix g_;
  double a_;
  StochasticMatrix p_tilde_;
  ProbabilityVector pi_;
  std::vector<SubGenerator> subs_;
  std::vector<double> rhos_;
};

using MapModel = std::variant<MarpModel, LocalTimeModel>;

/// Dimension of the additive part (1 for arrival models, N-1 for local times).
int additive_dimension(const MapModel& model);
int state_count(const MapModel& model);
/// Renewal models run on integer time.
bool discrete_time(const MapModel& model);
/// Centering vector m (size = additive_dimension).
Vector centering(const MapModel& model);
/// One-step transition matrix P_1 of the driving chain.
StochasticMatrix one_step_matrix(const MapModel& model);

/// {"type":"marp","d0":[[..]],"d1":[[..]]} or {"type":"local_time","g":[[..]],"a":..}
MapModel load_model(const nlohmann::json& j);
nlohmann::json model_to_json(const MapModel& model);

Matrix json_to_matrix(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Matrix& m);

}  // namespace lltlab
