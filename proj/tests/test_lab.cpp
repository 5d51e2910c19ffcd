#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lltlab/errors.hpp"
#include "lltlab/lab.hpp"
#include "lltlab/local_times.hpp"
#include "support/models.hpp"

using namespace lltlab;

TEST_CASE("gaussian density") {
  Matrix s1 = Matrix::Constant(1, 1, 0.25);
  CHECK(gaussian_density(s1, Vector::Zero(1)) ==
        doctest::Approx(1.0 / std::sqrt(2 * M_PI * 0.25)).epsilon(1e-12));

  Matrix s2(2, 2);
  s2 << 2.0, 0.3, 0.3, 1.0;
  const double det = 2.0 - 0.09;
  CHECK(gaussian_density(s2, Vector::Zero(2)) ==
        doctest::Approx(1.0 / (2 * M_PI * std::sqrt(det))).epsilon(1e-12));

  // normalization by quadrature in one dimension
  double mass = 0;
  const int np = 4001;
  for (int i = 0; i < np; ++i) {
    const double y = -4 + 8.0 * i / (np - 1);
    const double w = (i == 0 || i == np - 1) ? 0.5 : 1.0;
    mass += w * gaussian_density(s1, Vector::Constant(1, y));
  }
  mass *= 8.0 / (np - 1);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));

  Matrix indef = Matrix::Constant(1, 1, -1.0);
  CHECK_THROWS_AS(gaussian_density(indef, Vector::Zero(1)), DegenerateCovariance);
}

namespace {
ExperimentConfig small_config(MapModel model, std::vector<double> t_grid) {
  ExperimentConfig cfg{std::move(model)};
  cfg.t_grid = std::move(t_grid);
  cfg.grid_points = 401;
  cfg.mc.n_paths = 40000;
  cfg.mc_density_paths = 60000;
  return cfg;
}
}  // namespace

TEST_CASE("llt experiment on the symmetric two-state model") {
  const ConvergenceReport rep = run_llt_experiment(small_config(testmodels::lt2(), {10, 20, 40}));
  CHECK(rep.sigma(0, 0) == doctest::Approx(0.25).epsilon(1e-4));
  CHECK(rep.sup_error.size() == 3);
  // errors shrink and the fitted exponent sits near -1/2 (wide dev band here)
  CHECK(rep.sup_error[2] < rep.sup_error[0]);
  CHECK(rep.slope < -0.25);
  CHECK(rep.slope > -0.85);
  CHECK(rep.diagnostics.irreducible_aperiodic);
  CHECK(rep.diagnostics.all_pass());
  // boundary contribution is dominated at these horizons
  for (size_t i = 0; i < rep.t_grid.size(); ++i) {
    CHECK(rep.boundary_term[i] < rep.sup_error[i]);
  }
  CHECK(rep.boundary_term[2] < rep.boundary_term[0]);
}

TEST_CASE("llt experiment validation") {
  CHECK_THROWS_AS(run_llt_experiment(small_config(testmodels::lt2(), {10})), InvalidInput);
  CHECK_THROWS_AS(run_llt_experiment(small_config(testmodels::lt2(), {10, 10})), InvalidInput);
  auto cfg = small_config(testmodels::lt2(), {5, 10});
  cfg.start_state = 9;
  CHECK_THROWS_AS(run_llt_experiment(cfg), InvalidInput);
}

TEST_CASE("report bytes are deterministic") {
  auto cfg = small_config(testmodels::lt2(), {5, 10});
  cfg.density_source = DensitySource::kBoth;
  cfg.mc_density_paths = 20000;
  const std::string a = run_llt_experiment(cfg).to_json().dump();
  cfg.threads = 3;  // parallel horizons must not change a byte
  const std::string b = run_llt_experiment(cfg).to_json().dump();
  CHECK(a == b);
}

TEST_CASE("exact and Monte Carlo error curves agree within the noise band") {
  auto cfg = small_config(testmodels::lt2(), {10, 20});
  cfg.density_source = DensitySource::kBoth;
  cfg.mc_density_paths = 200000;
  const ConvergenceReport rep = run_llt_experiment(cfg);
  for (size_t i = 0; i < rep.t_grid.size(); ++i) {
    CHECK(std::abs(rep.mc_sup_error[i] - rep.sup_error[i]) <= 3 * rep.mc_se[i] + 0.02);
  }
}

TEST_CASE("scaled exact density integrates to the a.c. mass") {
  const LocalTimeModel model = testmodels::lt2();
  const double t = 12.0;
  const int np = 2001;
  std::vector<Vector> pts;
  const double lo = -0.5 * t, hi = 0.5 * t;  // full centered support
  for (int i = 0; i < np; ++i) {
    pts.push_back(Vector::Constant(1, lo + (hi - lo) * i / (np - 1)));
  }
  const auto vals = centered_density_batch(model, t, pts);
  double mass = 0;
  for (int i = 0; i + 1 < np; ++i) {
    mass += 0.5 * (hi - lo) / (np - 1) *
            (vals[static_cast<size_t>(i)].row(0).sum() + vals[static_cast<size_t>(i) + 1].row(0).sum());
  }
  const double singular = singular_mass(model, t).total.row(0).sum();
  CHECK(mass + singular == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("diagnostics blocks") {
  const DiagnosticsBlock lt = run_diagnostics(small_config(testmodels::lt2(), {5, 10}));
  CHECK(lt.irreducible_aperiodic);
  CHECK(lt.moment_finite);
  CHECK(lt.nonlattice);
  CHECK(lt.density_cap_violations == 0);
  CHECK(lt.gradient_cap_violations == 0);
  // fitted singular decay tracks the sub-generator rate r = 1
  CHECK(std::abs(std::log(lt.singular_fit_rho) + 1.0) < 0.05);
  CHECK(lt.feasible_t0 >= 1);
  for (const auto& probe : lt.fourier_tail) CHECK(probe.measured <= probe.bound);
  CHECK(lt.boundary_decay_slope <= lt.boundary_decay_budget);
  CHECK(lt.all_pass());

  const DiagnosticsBlock mp = run_diagnostics(small_config(testmodels::marp2(), {2, 4}));
  CHECK(mp.singular_identically_zero);
  CHECK(mp.moment_finite);
  CHECK(mp.nonlattice);
  for (const auto& probe : mp.fourier_tail) CHECK(probe.measured <= probe.bound);
  CHECK(mp.all_pass());

  // a periodic embedded chain is flagged, not fatal
  Matrix d0(2, 2), d1(2, 2);
  d0 << -1, 0, 0, -1;
  d1 << 0, 1, 1, 0;
  const DiagnosticsBlock per = run_diagnostics(small_config(MarpModel(d0, d1), {2, 4}));
  CHECK_FALSE(per.irreducible_aperiodic);
  CHECK_FALSE(per.all_pass());
}

TEST_CASE("config json round trip and validation") {
  nlohmann::json j = {
      {"model", {{"type", "local_time"}, {"g", {{-1.0, 1.0}, {1.0, -1.0}}}}},
      {"t_grid", {10.0, 20.0}},
      {"start_state", 1},
      {"density_source", "both"},
      {"mc", {{"n_paths", 1234}, {"seed", 9}, {"t", 50.0}}},
      {"slope_band", 0.2},
  };
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  CHECK(cfg.start_state == 1);
  CHECK(cfg.density_source == DensitySource::kBoth);
  CHECK(cfg.mc.n_paths == 1234);
  CHECK(cfg.mc.seed == 9);
  CHECK(cfg.slope_band == 0.2);
  const nlohmann::json back = cfg.to_json();
  CHECK(back.at("start_state") == 1);
  CHECK(back.at("density_source") == "both");

  j["density_source"] = "magic";
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), InvalidInput);
}

TEST_CASE("uniform sweep over a scaled family") {
  nlohmann::json j = {
      {"family_scale", {{"g", {{-1.0, 1.0}, {1.0, -1.0}}}, {"thetas", {0.5, 1.0, 2.0}}}},
      {"t_grid", {10.0, 20.0, 40.0}},
      {"grid_points", 401},
  };
  const FamilyConfig cfg = FamilyConfig::from_json(j);
  CHECK(cfg.members.size() == 3);
  const FamilyReport rep = run_uniform_sweep(cfg);
  CHECK(rep.members.size() == 3);
  CHECK(rep.excluded.empty());
  CHECK(rep.radius.supremum < 1.0);
  CHECK(rep.alpha > 0);
  CHECK(rep.alpha <= rep.beta);
  // the family envelope decays with a near -1/2 exponent
  CHECK(rep.slope < -0.25);
  CHECK(rep.slope > -0.85);
  // alpha/beta really bracket the member covariance spectra
  for (const auto& m : rep.members) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m.sigma);
    CHECK(rep.alpha <= es.eigenvalues().minCoeff() + 1e-12);
    CHECK(rep.beta >= es.eigenvalues().maxCoeff() - 1e-12);
  }

  // a family of one reduces to the single experiment
  nlohmann::json j1 = j;
  j1["family_scale"]["thetas"] = {1.0};
  const FamilyReport one = run_uniform_sweep(FamilyConfig::from_json(j1));
  const ConvergenceReport single =
      run_llt_experiment(small_config(testmodels::lt2(), {10, 20, 40}));
  for (size_t i = 0; i < one.sup_error.size(); ++i) {
    CHECK(one.sup_error[i] == doctest::Approx(single.sup_error[i]).epsilon(1e-9));
  }
}

TEST_CASE("csv report shape") {
  const ConvergenceReport rep = run_llt_experiment(small_config(testmodels::lt2(), {5, 10}));
  std::ostringstream os;
  rep.write_csv(os);
  const std::string text = os.str();
  CHECK(text.rfind("t,sup_error,boundary_term", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}
