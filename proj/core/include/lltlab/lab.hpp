#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lltlab/fourier.hpp"
#include "lltlab/map_model.hpp"

namespace lltlab {

enum class DensitySource { kExact, kMonteCarlo, kBoth };

struct ExperimentConfig {
  MapModel model;
  std::vector<double> t_grid;
  int start_state = 0;
  DensitySource density_source = DensitySource::kExact;
  McCovarianceSettings mc;      // also reused for the density histogram
  long mc_density_paths = 200000;
  int threads = 1;
  double slope_band = 0.15;     // acceptance half-width around -1/2
  int grid_points = 801;        // initial sup-norm grid per axis
  double grid_halfwidth_sigmas = 5.0;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// One assumption verdict with the measurement that backs it.
struct DiagnosticsBlock {
  bool irreducible_aperiodic = false;

  double third_moment_bound = 0.0;  // closed form (renewal) or support bound
  bool moment_finite = false;

  // singular-part behaviour: fitted log-linear decay of the total mass and
  // the smallest integer t0 with rho^{t0} max(2, c N) <= 1/4
  double singular_fit_c = 0.0;
  double singular_fit_rho = 0.0;   // e^{slope}
  int feasible_t0 = -1;            // -1 when the fit never satisfies the bound
  bool singular_identically_zero = false;

  struct TailProbe {
    double zeta;
    double measured;
    double bound;
  };
  std::vector<TailProbe> fourier_tail;  // transform decay at growing |zeta|

  // density and gradient caps with the number of probe violations
  double density_cap = 0.0;
  int density_cap_violations = 0;
  double gradient_cap = 0.0;
  int gradient_cap_violations = 0;
  double boundary_decay_slope = 0.0;   // fitted log max boundary density vs t
  double boundary_decay_budget = 0.0;  // a (rho_hat - 1) + margin

  double lattice_max_radius = 0.0;
  bool nonlattice = false;

  bool all_pass() const {
    return irreducible_aperiodic && moment_finite && nonlattice &&
           density_cap_violations == 0 && gradient_cap_violations == 0;
  }
  nlohmann::json to_json() const;
};

/// Convergence of the scaled density to the Gaussian limit.
struct ConvergenceReport {
  std::vector<double> t_grid;
  std::vector<double> sup_error;          // sup_y |f_{k,t}(y) - eta_Sigma(y)|
  std::vector<double> boundary_term;      // sup of eta outside the scaled support
  std::vector<double> mc_sup_error;       // empty unless Monte Carlo was requested
  std::vector<double> mc_se;              // histogram standard-error scale per t
  double slope = 0.0;
  double slope_stderr = 0.0;
  double r2 = 0.0;
  bool slope_within_band = false;
  Matrix sigma;
  double sigma_condition = 0.0;
  DiagnosticsBlock diagnostics;

  nlohmann::json to_json() const;
  void write_csv(std::ostream& os) const;
};

/// Evaluate the exact density of t^{-1/2} Y_t on an adaptive grid, compare to
/// the Gaussian limit, and fit the decay exponent of the sup error.
ConvergenceReport run_llt_experiment(const ExperimentConfig& cfg);

DiagnosticsBlock run_diagnostics(const ExperimentConfig& cfg);

struct FamilyConfig {
  std::vector<MapModel> members;
  ExperimentConfig base;  // t_grid and knobs shared by every member

  static FamilyConfig from_json(const nlohmann::json& j);
};

struct FamilyReport {
  std::vector<ConvergenceReport> members;
  std::vector<int> excluded;  // member indices failing the irreducibility check
  FamilyRadiusSweep radius;
  double alpha = 0.0;  // min eigenvalue of Sigma across members
  double beta = 0.0;   // max eigenvalue
  std::vector<double> sup_error;  // max over members, per t
  double slope = 0.0;
  double r2 = 0.0;

  nlohmann::json to_json() const;
};

FamilyReport run_uniform_sweep(const FamilyConfig& cfg);

/// Gaussian density with covariance sigma at a point.
double gaussian_density(const Matrix& sigma, const Vector& y);

}  // namespace lltlab
