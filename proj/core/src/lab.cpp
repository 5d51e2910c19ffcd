#include "lltlab/lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <optional>

#include <nlohmann/json.hpp>

#include "lltlab/errors.hpp"
#include "lltlab/local_times.hpp"
#include "lltlab/marp.hpp"
#include "lltlab/montecarlo.hpp"

namespace lltlab {

double gaussian_density(const Matrix& sigma, const Vector& y) {
  const int d = static_cast<int>(sigma.rows());
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw DegenerateCovariance("gaussian_density: covariance not positive definite");
  }
  const double det = llt.matrixL().toDenseMatrix().diagonal().array().square().prod();
  const Vector w = llt.solve(y);
  return std::exp(-0.5 * y.dot(w)) / std::pow(2.0 * M_PI, 0.5 * d) / std::sqrt(det);
}

namespace {

double halton_seq(int index, int base) {
  double f = 1.0, r = 0.0;
  for (int i = index; i > 0; i /= base) {
    f /= base;
    r += f * (i % base);
  }
  return r;
}

// deterministic interior probes of the simplex {y > 0, <y,1> < t}
std::vector<Vector> simplex_probes(double t, int dim, int count, double margin = 0.0) {
  std::vector<Vector> pts;
  pts.reserve(static_cast<size_t>(count));
  for (int i = 1; pts.size() < static_cast<size_t>(count); ++i) {
    if (dim == 1) {
      const double u = halton_seq(i, 2);
      if (u < margin || u > 1 - margin) continue;
      pts.push_back(Vector::Constant(1, u * t));
    } else if (dim == 2) {
      double u = halton_seq(i, 2), v = halton_seq(i, 3);
      if (u + v > 1) {
        u = 1 - u;
        v = 1 - v;
      }
      if (std::min({u, v, 1 - u - v}) < margin) continue;
      pts.push_back((Vector(2) << u * t, v * t).finished());
    } else {
      double u = halton_seq(i, 2), v = halton_seq(i, 3), w = halton_seq(i, 5);
      if (u + v + w > 1) continue;  // thin rejection for the 3-simplex
      if (std::min({u, v, w, 1 - u - v - w}) < margin) continue;
      pts.push_back((Vector(3) << u * t, v * t, w * t).finished());
    }
  }
  return pts;
}

// ---------------------------------------------------------------------------
// Exact density of t^{-1/2} Y_t per family
// ---------------------------------------------------------------------------

std::vector<double> scaled_density_lt(const LocalTimeModel& model, int k, double t,
                                      const std::vector<Vector>& ys) {
  const double root_t = std::sqrt(t);
  const Vector shift = model.m_prime() * t;
  std::vector<Vector> raw(ys.size());
  for (size_t i = 0; i < ys.size(); ++i) raw[i] = root_t * ys[i] + shift;
  const auto mats = joint_density_batch(model, t, raw);
  const double amp = std::pow(t, 0.5 * (model.states() - 1));
  std::vector<double> out(ys.size());
  for (size_t i = 0; i < ys.size(); ++i) out[i] = amp * mats[i].row(k).sum();
  return out;
}

struct MarpDensityTable {
  KernelDensity density;
  int n = 0;
  double m = 0.0;

  double scaled_at(int k, double y) const {
    const double root = std::sqrt(static_cast<double>(n));
    const double x = root * y + n * m;
    if (x < 0 || x >= density.grid(density.grid.size() - 1)) return 0.0;
    const double h = density.grid(1) - density.grid(0);
    const auto i = std::min<long>(static_cast<long>(x / h), density.grid.size() - 2);
    const double w = (x - density.grid(i)) / h;
    const double g0 = density.values[static_cast<size_t>(i)].row(k).sum();
    const double g1 = density.values[static_cast<size_t>(i) + 1].row(k).sum();
    return root * ((1 - w) * g0 + w * g1);
  }
};

MarpDensityTable marp_density_table(const MarpModel& model, int n, double sigma2) {
  MarpDensityTable tab;
  tab.n = n;
  tab.m = model.mean_increment();
  const double spread = std::sqrt(std::max(sigma2, 1e-12) * n);
  GridSpec grid;
  grid.y_max = n * tab.m + 14.0 * spread + 30.0;
  grid.n_points = static_cast<int>(grid.y_max / 0.002) + 2;
  tab.density = invert_density_fft(model, n, grid);
  return tab;
}

// sup of eta over the complement of the scaled support: for each supporting
// hyperplane a.y = b the maximum sits at the closest point in the Sigma
// metric, eta(0) exp(-b^2 / (2 a.Sigma a)).
double boundary_sup(const MapModel& model, const Matrix& sigma, double t) {
  const int d = static_cast<int>(sigma.rows());
  const double eta0 = gaussian_density(sigma, Vector::Zero(d));
  const double root_t = std::sqrt(t);
  std::vector<std::pair<Vector, double>> faces;
  if (std::holds_alternative<MarpModel>(model)) {
    const double m = std::get<MarpModel>(model).mean_increment();
    faces.emplace_back(Vector::Ones(1), -m * root_t);
  } else {
    const auto& lt = std::get<LocalTimeModel>(model);
    const Vector mp = lt.m_prime();
    const double m_last = 1.0 - mp.sum();
    for (int j = 0; j < d; ++j) {
      Vector a = Vector::Zero(d);
      a(j) = 1.0;
      faces.emplace_back(a, -mp(j) * root_t);
      faces.emplace_back(a, (1.0 - mp(j)) * root_t);
    }
    faces.emplace_back(Vector::Ones(d), m_last * root_t);
  }
  double sup = 0;
  for (const auto& [a, b] : faces) {
    const double quad = a.dot(sigma * a);
    if (quad > 0) sup = std::max(sup, eta0 * std::exp(-0.5 * b * b / quad));
  }
  return sup;
}

struct SupErrorResult {
  double sup_error = 0.0;
  double boundary_term = 0.0;
};

SupErrorResult sup_error_at_t(const MapModel& model, int k, double t, const Matrix& sigma,
                              int grid_points, double halfwidth_sigmas) {
  const int d = static_cast<int>(sigma.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  const double sig_max = std::sqrt(es.eigenvalues().maxCoeff());
  const double r = halfwidth_sigmas * sig_max;

  std::optional<MarpDensityTable> marp_tab;
  if (std::holds_alternative<MarpModel>(model)) {
    marp_tab = marp_density_table(std::get<MarpModel>(model),
                                  static_cast<int>(std::llround(t)), sigma(0, 0));
  }

  auto evaluate = [&](const std::vector<Vector>& pts) {
    std::vector<double> f;
    if (marp_tab) {
      f.reserve(pts.size());
      for (const auto& y : pts) f.push_back(marp_tab->scaled_at(k, y(0)));
    } else {
      f = scaled_density_lt(std::get<LocalTimeModel>(model), k, t, pts);
    }
    double sup = 0;
    Vector arg = pts.front();
    for (size_t i = 0; i < pts.size(); ++i) {
      const double dev = std::abs(f[i] - gaussian_density(sigma, pts[i]));
      if (dev > sup) {
        sup = dev;
        arg = pts[i];
      }
    }
    return std::pair<double, Vector>(sup, arg);
  };

  std::vector<Vector> pts;
  double cell;
  if (d == 1) {
    const int np = std::max(grid_points, 41);
    for (int i = 0; i < np; ++i) pts.push_back(Vector::Constant(1, -r + 2 * r * i / (np - 1)));
    cell = 2 * r / (np - 1);
    // clusters at the support edges, where the deviation jumps to eta
    std::vector<double> edges;
    if (marp_tab) {
      edges.push_back(-std::get<MarpModel>(model).mean_increment() * std::sqrt(t));
    } else {
      const double mp = std::get<LocalTimeModel>(model).m_prime()(0);
      edges.push_back(-mp * std::sqrt(t));
      edges.push_back((1.0 - mp) * std::sqrt(t));
    }
    for (double e : edges) {
      if (std::abs(e) < r) {
        for (double off : {-0.25 * cell, -1e-9, 1e-9, 0.25 * cell}) {
          pts.push_back(Vector::Constant(1, e + off));
        }
      }
    }
  } else {
    const int np = std::clamp(grid_points / 8, 41, 161);
    for (int i = 0; i < np; ++i)
      for (int j = 0; j < np; ++j)
        pts.push_back(
            (Vector(2) << -r + 2 * r * i / (np - 1), -r + 2 * r * j / (np - 1)).finished());
    cell = 2 * r / (np - 1);
  }
  auto [sup, arg] = evaluate(pts);

  // refine around the argmax until the sup stops moving by more than 1%
  for (int round = 0; round < 3; ++round) {
    std::vector<Vector> fine;
    const int np = 33;
    if (d == 1) {
      for (int i = 0; i < np; ++i)
        fine.push_back(Vector::Constant(1, arg(0) - 2 * cell + 4 * cell * i / (np - 1)));
    } else {
      for (int i = 0; i < np; ++i)
        for (int j = 0; j < np; ++j)
          fine.push_back((Vector(2) << arg(0) - 2 * cell + 4 * cell * i / (np - 1),
                          arg(1) - 2 * cell + 4 * cell * j / (np - 1))
                             .finished());
    }
    auto [sup2, arg2] = evaluate(fine);
    const bool settled = sup2 <= 1.01 * sup;
    if (sup2 > sup) {
      sup = sup2;
      arg = arg2;
    }
    cell *= 4.0 / (np - 1);
    if (settled) break;
  }

  SupErrorResult out;
  out.sup_error = sup;
  out.boundary_term = boundary_sup(model, sigma, t);
  return out;
}

double mc_sup_error_at_t(const MapModel& model, int k, double t, const Matrix& sigma,
                         long n_paths, std::uint64_t seed, int threads, double* se_out) {
  const int d = static_cast<int>(sigma.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  const double r = 5.0 * std::sqrt(es.eigenvalues().maxCoeff());

  SimulationOptions opt;
  opt.threads = threads;
  const SimulationResult sim = simulate_paths(model, k, t, n_paths, seed, opt);

  HistogramSpec spec;
  spec.lo = Vector::Constant(d, -r);
  spec.hi = Vector::Constant(d, r);
  spec.bins.assign(static_cast<size_t>(d), d == 1 ? 101 : 51);
  const EmpiricalDensity hist = empirical_density(sim, spec, true);

  double sup = 0, se_max = 0;
  const long total = static_cast<long>(hist.mass.size());
  for (long cell = 0; cell < total; ++cell) {
    long rem = cell;
    Vector center(d);
    for (int j = d - 1; j >= 0; --j) {
      const int bins_j = hist.spec.bins[static_cast<size_t>(j)];
      const int b = static_cast<int>(rem % bins_j);
      rem /= bins_j;
      const double w = (spec.hi(j) - spec.lo(j)) / bins_j;
      center(j) = spec.lo(j) + (b + 0.5) * w;
    }
    sup = std::max(sup, std::abs(hist.mass[static_cast<size_t>(cell)] -
                                 gaussian_density(sigma, center)));
    se_max = std::max(se_max, hist.se[static_cast<size_t>(cell)]);
  }
  if (se_out) *se_out = se_max;
  return sup;
}

LineFit fit_rate(const std::vector<double>& t_grid, const std::vector<double>& err) {
  std::vector<double> lx, ly;
  const size_t skip = (t_grid.size() > 2) ? 1 : 0;  // drop the smallest horizon
  for (size_t i = skip; i < t_grid.size(); ++i) {
    if (err[i] > 0) {
      lx.push_back(std::log(t_grid[i]));
      ly.push_back(std::log(err[i]));
    }
  }
  return fit_line(lx, ly);
}

}  // namespace

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

DiagnosticsBlock run_diagnostics(const ExperimentConfig& cfg) {
  DiagnosticsBlock d;
  const MapModel& model = cfg.model;
  d.irreducible_aperiodic = is_irreducible_aperiodic(one_step_matrix(model));

  if (std::holds_alternative<MarpModel>(model)) {
    const auto& m = std::get<MarpModel>(model);
    for (int k = 0; k < m.phases(); ++k) {
      d.third_moment_bound = std::max(d.third_moment_bound, third_moment(m, k));
    }
    d.moment_finite = std::isfinite(d.third_moment_bound);
    d.singular_identically_zero = true;
    d.feasible_t0 = 1;

    const double d1n = norm0(m.d1());
    for (double z : {10.0, 100.0, 1000.0}) {
      d.fourier_tail.push_back({z, norm0(fourier_kernel(m, z)), 2.0 * d1n / z});
    }

    d.density_cap = m.phases() * d1n;
    const GridSpec grid{12.0, 2049};
    for (int n = 1; n <= 3; ++n) {
      if (convolve_density(m, n, grid, 1e-3).sup_norm0() > d.density_cap * (1 + 1e-9)) {
        ++d.density_cap_violations;
      }
    }
    d.gradient_cap = std::pow(m.phases() * std::max(norm0(m.d0()), d1n), 2);
    if (marp_ac_diagnostics(m, 1).deriv_sup_measured > d.gradient_cap * (1 + 1e-9)) {
      ++d.gradient_cap_violations;
    }
  } else {
    const auto& m = std::get<LocalTimeModel>(model);
    const int N = m.states();
    const int dim = N - 1;
    d.third_moment_bound = std::pow(std::sqrt(static_cast<double>(dim)) + m.m_prime().norm(), 3);
    d.moment_finite = true;  // occupation times over [0,t] are bounded

    std::vector<double> ts, logmass;
    for (double t : {1.0, 2.0, 4.0, 8.0, 12.0, 16.0, 24.0, 32.0, 40.0}) {
      const double mass = singular_mass(m, t).total_norm0;
      if (mass > 0) {
        ts.push_back(t);
        logmass.push_back(std::log(mass));
      }
    }
    const LineFit fit = fit_line(ts, logmass);
    d.singular_fit_rho = std::exp(fit.slope);
    d.singular_fit_c = std::exp(fit.intercept);
    d.feasible_t0 = -1;
    for (int t0 = 1; t0 <= 400; ++t0) {
      if (std::pow(d.singular_fit_rho, t0) * std::max(2.0, d.singular_fit_c * N) <= 0.25) {
        d.feasible_t0 = t0;
        break;
      }
    }

    const double a = m.rate();
    const double t0 = 1.0;
    for (double z : {10.0, 50.0, 200.0}) {
      Vector zeta = Vector::Zero(dim);
      zeta(dim - 1) = z;
      const double bound =
          2.0 * std::pow(a, dim) * (1.0 + a) * std::max(1.0, std::pow(t0, N)) / z;
      d.fourier_tail.push_back({z, fourier_tail_gamma(m, t0, zeta, 4, 256), bound});
    }

    d.density_cap = std::pow(a, dim);
    d.gradient_cap = 2.0 * std::pow(a, N);
    for (double t : {1.0, 2.0, 5.0}) {
      const auto probes = simplex_probes(t, dim, 400, 1e-3);
      for (const Matrix& psi : joint_density_batch(m, t, probes)) {
        if (norm0(psi) > d.density_cap * (1 + 1e-9)) ++d.density_cap_violations;
      }
      for (int j = 0; j < dim; ++j) {
        for (const Matrix& grad : density_gradient_batch(m, t, probes, j)) {
          if (norm0(grad) > d.gradient_cap * (1 + 1e-9)) ++d.gradient_cap_violations;
        }
      }
    }

    // boundary decay: max density over Halton face samples, fitted against t
    std::vector<double> bts, blog;
    for (double t : {5.0, 10.0, 20.0, 40.0}) {
      SimplexGeometry geom(t, m.m_prime());
      std::vector<Vector> pts;
      for (const auto& face : geom.boundary_samples(64)) {
        pts.insert(pts.end(), face.begin(), face.end());
      }
      double mx = 0;
      for (const Matrix& psi : joint_density_batch(m, t, pts)) mx = std::max(mx, norm0(psi));
      if (mx > 0) {
        bts.push_back(t);
        blog.push_back(std::log(mx));
      }
    }
    if (bts.size() >= 2) d.boundary_decay_slope = fit_line(bts, blog).slope;
    d.boundary_decay_budget = a * (m.max_rho() - 1.0) + 0.05;
  }

  const LatticeDiagnostic scan =
      lattice_scan(model, 0.5, 20.0, additive_dimension(model) == 1 ? 160 : 48);
  d.lattice_max_radius = scan.max_radius_off_zero;
  d.nonlattice = scan.verdict == LatticeDiagnostic::Verdict::kNonlattice;
  return d;
}

// ---------------------------------------------------------------------------
// LLT experiment
// ---------------------------------------------------------------------------

ConvergenceReport run_llt_experiment(const ExperimentConfig& cfg) {
  if (cfg.t_grid.size() < 2) {
    throw InvalidInput("run_llt_experiment: need at least two horizons for rate fitting");
  }
  for (size_t i = 1; i < cfg.t_grid.size(); ++i) {
    if (cfg.t_grid[i] <= cfg.t_grid[i - 1]) {
      throw InvalidInput("run_llt_experiment: t_grid must be strictly increasing");
    }
  }
  const int n_states = state_count(cfg.model);
  if (cfg.start_state < 0 || cfg.start_state >= n_states) {
    throw InvalidInput("run_llt_experiment: bad start state");
  }

  ConvergenceReport rep;
  rep.t_grid = cfg.t_grid;
  rep.sigma = covariance(cfg.model, CovarianceMethod::kHessian).sigma;
  Eigen::SelfAdjointEigenSolver<Matrix> es(rep.sigma);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig <= 0) {
    throw DegenerateCovariance("run_llt_experiment: asymptotic covariance is singular");
  }
  rep.sigma_condition = es.eigenvalues().maxCoeff() / min_eig;

  const size_t nt = cfg.t_grid.size();
  rep.sup_error.assign(nt, 0.0);
  rep.boundary_term.assign(nt, 0.0);
  const bool want_exact = cfg.density_source != DensitySource::kMonteCarlo;
  const bool want_mc = cfg.density_source != DensitySource::kExact;
  if (want_mc) {
    rep.mc_sup_error.assign(nt, 0.0);
    rep.mc_se.assign(nt, 0.0);
  }

  auto run_one = [&](size_t i) {
    const double t = cfg.t_grid[i];
    if (want_exact) {
      const SupErrorResult r = sup_error_at_t(cfg.model, cfg.start_state, t, rep.sigma,
                                              cfg.grid_points, cfg.grid_halfwidth_sigmas);
      rep.sup_error[i] = r.sup_error;
      rep.boundary_term[i] = r.boundary_term;
    } else {
      rep.boundary_term[i] = boundary_sup(cfg.model, rep.sigma, t);
    }
    if (want_mc) {
      double se = 0;
      rep.mc_sup_error[i] =
          mc_sup_error_at_t(cfg.model, cfg.start_state, t, rep.sigma, cfg.mc_density_paths,
                            cfg.mc.seed + 1000003 * static_cast<std::uint64_t>(i), 1, &se);
      rep.mc_se[i] = se;
    }
  };

  if (cfg.threads > 1) {
    std::vector<std::future<void>> futs;
    futs.reserve(nt);
    for (size_t i = 0; i < nt; ++i) futs.push_back(std::async(std::launch::async, run_one, i));
    for (auto& f : futs) f.get();
  } else {
    for (size_t i = 0; i < nt; ++i) run_one(i);
  }

  const std::vector<double>& err = want_exact ? rep.sup_error : rep.mc_sup_error;
  const LineFit fit = fit_rate(cfg.t_grid, err);
  rep.slope = fit.slope;
  rep.slope_stderr = fit.slope_stderr;
  rep.r2 = fit.r2;
  rep.slope_within_band = std::abs(fit.slope + 0.5) <= cfg.slope_band;
  rep.diagnostics = run_diagnostics(cfg);
  return rep;
}

// ---------------------------------------------------------------------------
// Family sweep
// ---------------------------------------------------------------------------

FamilyReport run_uniform_sweep(const FamilyConfig& cfg) {
  if (cfg.members.empty()) throw InvalidInput("run_uniform_sweep: empty family");
  FamilyReport rep;

  std::vector<MapModel> usable;
  for (size_t i = 0; i < cfg.members.size(); ++i) {
    if (!is_irreducible_aperiodic(one_step_matrix(cfg.members[i]))) {
      rep.excluded.push_back(static_cast<int>(i));
      continue;
    }
    usable.push_back(cfg.members[i]);
    ExperimentConfig ec = cfg.base;
    ec.model = cfg.members[i];
    rep.members.push_back(run_llt_experiment(ec));
  }
  if (rep.members.empty()) {
    throw InvalidModel("run_uniform_sweep: every member failed the irreducibility check");
  }

  rep.radius = uniform_radius_sweep(usable, 0.5, 20.0,
                                    additive_dimension(usable.front()) == 1 ? 160 : 48);

  rep.alpha = std::numeric_limits<double>::infinity();
  rep.beta = 0.0;
  for (const auto& m : rep.members) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m.sigma);
    rep.alpha = std::min(rep.alpha, es.eigenvalues().minCoeff());
    rep.beta = std::max(rep.beta, es.eigenvalues().maxCoeff());
  }

  const size_t nt = cfg.base.t_grid.size();
  rep.sup_error.assign(nt, 0.0);
  for (const auto& m : rep.members) {
    for (size_t i = 0; i < nt; ++i) {
      rep.sup_error[i] = std::max(rep.sup_error[i], m.sup_error[i]);
    }
  }
  const LineFit fit = fit_rate(cfg.base.t_grid, rep.sup_error);
  rep.slope = fit.slope;
  rep.r2 = fit.r2;
  return rep;
}

// ---------------------------------------------------------------------------
// Config and report serialization
// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig cfg{load_model(j.at("model"))};
  cfg.t_grid = j.at("t_grid").get<std::vector<double>>();
  cfg.start_state = j.value("start_state", 0);
  const std::string src = j.value("density_source", "exact");
  if (src == "exact")
    cfg.density_source = DensitySource::kExact;
  else if (src == "montecarlo")
    cfg.density_source = DensitySource::kMonteCarlo;
  else if (src == "both")
    cfg.density_source = DensitySource::kBoth;
  else
    throw InvalidInput("density_source must be exact|montecarlo|both");
  if (j.contains("mc")) {
    const auto& m = j.at("mc");
    cfg.mc.n_paths = m.value("n_paths", cfg.mc.n_paths);
    cfg.mc.seed = m.value("seed", cfg.mc.seed);
    cfg.mc.t = m.value("t", cfg.mc.t);
    cfg.mc_density_paths = m.value("density_paths", cfg.mc_density_paths);
  }
  cfg.threads = j.value("threads", 1);
  cfg.slope_band = j.value("slope_band", 0.15);
  cfg.grid_points = j.value("grid_points", 801);
  cfg.grid_halfwidth_sigmas = j.value("grid_halfwidth_sigmas", 5.0);
  return cfg;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["model"] = model_to_json(model);
  j["t_grid"] = t_grid;
  j["start_state"] = start_state;
  j["density_source"] = density_source == DensitySource::kExact        ? "exact"
                        : density_source == DensitySource::kMonteCarlo ? "montecarlo"
                                                                       : "both";
  j["mc"] = {{"n_paths", mc.n_paths},
             {"seed", mc.seed},
             {"t", mc.t},
             {"density_paths", mc_density_paths}};
  j["threads"] = threads;
  j["slope_band"] = slope_band;
  j["grid_points"] = grid_points;
  j["grid_halfwidth_sigmas"] = grid_halfwidth_sigmas;
  return j;
}

FamilyConfig FamilyConfig::from_json(const nlohmann::json& j) {
  std::vector<MapModel> members;
  if (j.contains("family")) {
    for (const auto& item : j.at("family")) members.push_back(load_model(item));
  } else if (j.contains("family_scale")) {
    // generator scaled by each theta: G(theta) = theta * G
    const auto& fs = j.at("family_scale");
    const Matrix g = json_to_matrix(fs.at("g"));
    for (double theta : fs.at("thetas").get<std::vector<double>>()) {
      members.push_back(LocalTimeModel::uniformize(GeneratorMatrix(theta * g)));
    }
  } else {
    throw InvalidInput("family config needs \"family\" or \"family_scale\"");
  }
  if (members.empty()) throw InvalidInput("family config has no members");
  nlohmann::json base = j;
  base.erase("family");
  base.erase("family_scale");
  base["model"] = model_to_json(members.front());
  return FamilyConfig{std::move(members), ExperimentConfig::from_json(base)};
}

nlohmann::json DiagnosticsBlock::to_json() const {
  nlohmann::json j;
  j["irreducible_aperiodic"] = irreducible_aperiodic;
  j["third_moment_bound"] = third_moment_bound;
  j["moment_finite"] = moment_finite;
  j["singular"] = {{"identically_zero", singular_identically_zero},
                   {"fit_c", singular_fit_c},
                   {"fit_rho", singular_fit_rho},
                   {"feasible_t0", feasible_t0}};
  nlohmann::json tails = nlohmann::json::array();
  for (const auto& p : fourier_tail) {
    tails.push_back({{"zeta", p.zeta}, {"measured", p.measured}, {"bound", p.bound}});
  }
  j["fourier_tail"] = tails;
  j["density_cap"] = {{"bound", density_cap}, {"violations", density_cap_violations}};
  j["gradient_cap"] = {{"bound", gradient_cap}, {"violations", gradient_cap_violations}};
  j["boundary_decay"] = {{"slope", boundary_decay_slope}, {"budget", boundary_decay_budget}};
  j["lattice"] = {{"max_radius", lattice_max_radius}, {"nonlattice", nonlattice}};
  j["all_pass"] = all_pass();
  return j;
}

nlohmann::json ConvergenceReport::to_json() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["t_grid"] = t_grid;
  j["sup_error"] = sup_error;
  j["boundary_term"] = boundary_term;
  if (!mc_sup_error.empty()) {
    j["mc_sup_error"] = mc_sup_error;
    j["mc_se"] = mc_se;
  }
  j["slope"] = slope;
  j["slope_stderr"] = slope_stderr;
  j["r2"] = r2;
  j["slope_within_band"] = slope_within_band;
  j["sigma"] = matrix_to_json(sigma);
  j["sigma_condition"] = sigma_condition;
  j["diagnostics"] = diagnostics.to_json();
  return j;
}

void ConvergenceReport::write_csv(std::ostream& os) const {
  os << "t,sup_error,boundary_term";
  if (!mc_sup_error.empty()) os << ",mc_sup_error,mc_se";
  os << "\n";
  char buf[160];
  for (size_t i = 0; i < t_grid.size(); ++i) {
    if (!mc_sup_error.empty()) {
      std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%.12g,%.12g\n", t_grid[i],
                    sup_error.empty() ? 0.0 : sup_error[i], boundary_term[i],
                    mc_sup_error[i], mc_se[i]);
    } else {
      std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g\n", t_grid[i], sup_error[i],
                    boundary_term[i]);
    }
    os << buf;
  }
}

nlohmann::json FamilyReport::to_json() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  nlohmann::json mem = nlohmann::json::array();
  for (const auto& m : members) mem.push_back(m.to_json());
  j["members"] = mem;
  j["excluded"] = excluded;
  j["radius"] = {{"per_model", radius.per_model},
                 {"supremum", radius.supremum},
                 {"max_adjacent_jump", radius.max_adjacent_jump}};
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["sup_error"] = sup_error;
  j["slope"] = slope;
  j["r2"] = r2;
  return j;
}

}  // namespace lltlab
