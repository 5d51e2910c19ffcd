#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "lltlab/map_model.hpp"
#include "lltlab/rng.hpp"

namespace lltlab {

/// One exact draw of (X_t, Y_t) under P_k.
struct PathSample {
  int start_state = 0;
  int end_state = 0;
  Vector y;       // centered additive value at the horizon
  Vector y_mid;   // centered value at the midpoint horizon (empty if unrecorded)
  Vector raw;     // local-time vector, or uncentered total for renewal models
  std::uint32_t unvisited_mask = 0;  // bit i set: state i never entered
};

struct SimulationOptions {
  int threads = 1;
  bool record_midpoint = false;
};

struct SimulationResult {
  double t = 0.0;
  std::uint64_t seed = 0;
  std::string rng_name;
  bool has_midpoint = false;
  std::vector<PathSample> samples;
};

/// Exact i.i.d. path simulation. Deterministic given the seed: path i always
/// uses stream (seed, i), so the result is independent of thread count.
/// For local-time models each sample conserves <L_t, 1> = t exactly.
SimulationResult simulate_paths(const MapModel& model, int k, double t, long n_paths,
                                std::uint64_t seed, const SimulationOptions& opt = {});

struct HistogramSpec {
  Vector lo;
  Vector hi;
  std::vector<int> bins;
};

/// Histogram density of t^{-1/2} Y_t. Samples sitting on a support face
/// (some state never visited) can be routed to a separate singular tally.
struct EmpiricalDensity {
  HistogramSpec spec;
  std::vector<double> mass;  // density estimate per cell (row-major)
  std::vector<double> se;    // standard error per cell
  long n_samples = 0;
  long singular_count = 0;
  long out_of_range = 0;
  double cell_volume = 1.0;

  double singular_fraction() const {
    return n_samples ? static_cast<double>(singular_count) / n_samples : 0.0;
  }
};
EmpiricalDensity empirical_density(const SimulationResult& sim, const HistogramSpec& spec,
                                   bool exclude_singular = true);

/// Sample covariance of t^{-1/2} Y_t with entrywise standard errors.
struct EmpiricalCovariance {
  Matrix sigma;
  Matrix se;
  Vector mean;
  Vector mean_se;
  long n = 0;
};
EmpiricalCovariance empirical_covariance(const SimulationResult& sim);

void export_samples_csv(const SimulationResult& sim, std::ostream& os);

}  // namespace lltlab
