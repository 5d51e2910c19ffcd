// Acceptance suite: every release criterion evaluated end to end, one
// pass/fail line per criterion. Exit code 0 only when all pass.
//
//   lltlab_acceptance [--only K]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "lltlab/fourier.hpp"
#include "lltlab/lab.hpp"
#include "lltlab/local_times.hpp"
#include "lltlab/marp.hpp"
#include "lltlab/montecarlo.hpp"
#include "lltlab/rng.hpp"
#include "support/models.hpp"
#include "support/oracles.hpp"

using namespace lltlab;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// --- 1: semigroup identity ---------------------------------------------------
Outcome criterion_semigroup() {
  Outcome out;
  PhiloxRng rng(1001, 0);
  double worst_marp = 0, worst_lt = 0;

  const MapModel marp = testmodels::marp2();
  for (int rep = 0; rep < 25; ++rep) {
    const double t = 1 + static_cast<double>(rng.next_u64() % 8);
    const double s = 1 + static_cast<double>(rng.next_u64() % 8);
    const Vector z = Vector::Constant(1, -10 + 20 * rng.next_double());
    worst_marp = std::max(worst_marp, semigroup_residual(marp, t, s, z));
  }
  out.require(worst_marp < 1e-12, "renewal residual " + fmt(worst_marp));

  const std::vector<MapModel> lts{testmodels::lt2(), testmodels::lt3()};
  for (int rep = 0; rep < 25; ++rep) {
    const MapModel& m = lts[rep % 2];
    const int d = additive_dimension(m);
    Vector z(d);
    for (int j = 0; j < d; ++j) z(j) = -5 + 10 * rng.next_double();
    const double t = 0.1 + 3.9 * rng.next_double();
    const double s = 0.1 + 3.9 * rng.next_double();
    worst_lt = std::max(worst_lt, semigroup_residual(m, t, s, z));
  }
  out.require(worst_lt < 1e-8, "jump-process residual " + fmt(worst_lt));
  out.note("max residual renewal " + fmt(worst_marp) + ", local-time " + fmt(worst_lt));
  return out;
}

// --- 2: transform decay bounds ----------------------------------------------
Outcome criterion_fourier_decay() {
  Outcome out;
  const MarpModel marp = testmodels::marp2();
  const double d1n = norm0(marp.d1());
  for (double z : {10.0, 100.0, 1000.0}) {
    const double measured = norm0(fourier_kernel(marp, z));
    out.require(measured <= 2.0 * d1n / z,
                "renewal decay at " + fmt(z) + ": " + fmt(measured));
  }

  const double t0 = 1.0;
  for (const LocalTimeModel& m : {testmodels::lt2(), testmodels::lt3()}) {
    const int dim = m.states() - 1;
    const double a = m.rate();
    for (double z : {10.0, 50.0, 200.0}) {
      Vector zeta = Vector::Zero(dim);
      zeta(dim - 1) = z;
      const double measured = fourier_tail_gamma(m, t0, zeta, 4, dim == 1 ? 256 : 128);
      const double bound =
          2.0 * std::pow(a, dim) * (1 + a) * std::max(1.0, std::pow(t0, m.states())) / z;
      out.require(measured <= bound, "local-time decay at " + fmt(z) + " (" +
                                         std::to_string(m.states()) + " states): " +
                                         fmt(measured) + " vs " + fmt(bound));
    }
  }
  return out;
}

// --- 3: multinomial identity --------------------------------------------------
Outcome criterion_multinomial() {
  Outcome out;
  PhiloxRng rng(1003, 0);
  double worst = 0;
  for (int dim : {1, 2, 3}) {
    for (int n = 0; n <= 30; ++n) {
      for (int rep = 0; rep < 3; ++rep) {
        const double t = 1.0 + 3.0 * rng.next_double();
        Vector y(dim);
        double rest = 1.0;
        for (int j = 0; j < dim; ++j) {
          const double u = rest * 0.95 * rng.next_double();
          y(j) = t * u;
          rest -= u;
        }
        double nfact = 1;
        for (int i = 2; i <= n; ++i) nfact *= i;
        double total = 0;
        std::vector<int> counts(static_cast<size_t>(dim), 0);
        std::function<void(int, int)> rec = [&](int pos, int used) {
          if (pos == dim) {
            total += nfact * multinomial_coefficient(
                                 n, std::span<const int>(counts.data(), counts.size()), t, y);
            return;
          }
          for (int v = 0; v + used <= n; ++v) {
            counts[static_cast<size_t>(pos)] = v;
            rec(pos + 1, used + v);
          }
          counts[static_cast<size_t>(pos)] = 0;
        };
        rec(0, 0);
        worst = std::max(worst, std::abs(total - 1.0));
      }
    }
  }
  out.require(worst < 1e-12, "worst identity error " + fmt(worst));
  out.note("worst deviation " + fmt(worst) + " over N in {2,3,4}, n <= 30");
  return out;
}

// --- 4: mass balance ----------------------------------------------------------
Outcome criterion_mass_balance() {
  Outcome out;
  double worst = 0;

  // two states: plain trapezoid over the interval
  const LocalTimeModel m2 = testmodels::lt2();
  for (double t : {1.0, 2.0, 5.0, 10.0}) {
    const int np = 4001;
    std::vector<Vector> grid;
    grid.reserve(np);
    for (int i = 0; i < np; ++i) grid.push_back(Vector::Constant(1, t * i / (np - 1)));
    const auto vals = joint_density_batch(m2, t, grid);
    Matrix integral = Matrix::Zero(2, 2);
    for (int i = 0; i + 1 < np; ++i) {
      integral += 0.5 * (t / (np - 1)) *
                  (vals[static_cast<size_t>(i)] + vals[static_cast<size_t>(i) + 1]);
    }
    const double dev = norm0(Matrix(integral + singular_mass(m2, t).total -
                                    matrix_exponential(m2.generator().entries(), t)));
    worst = std::max(worst, dev);
    out.require(dev < 1e-4, "2-state t=" + fmt(t) + ": " + fmt(dev));
  }

  // three states: iterated trapezoid with exact inner limits
  const LocalTimeModel m3 = testmodels::lt3();
  for (double t : {1.0, 2.0, 5.0, 10.0}) {
    const int outer = t <= 2 ? 201 : 301;
    std::vector<Vector> pts;
    std::vector<std::pair<long, int>> rows;
    for (int i = 0; i <= outer; ++i) {
      const double y0 = t * i / outer;
      const int inner = std::max(4, static_cast<int>(std::lround(outer * (t - y0) / t)));
      rows.emplace_back(static_cast<long>(pts.size()), inner);
      for (int q = 0; q <= inner; ++q) {
        pts.push_back((Vector(2) << y0, (t - y0) * q / inner).finished());
      }
    }
    const auto vals = joint_density_batch(m3, t, pts);
    std::vector<Matrix> line(static_cast<size_t>(outer) + 1);
    for (int i = 0; i <= outer; ++i) {
      const auto [offset, inner] = rows[static_cast<size_t>(i)];
      const double h1 = (t - t * i / outer) / inner;
      Matrix acc = Matrix::Zero(3, 3);
      for (int q = 0; q < inner; ++q) {
        acc += 0.5 * h1 *
               (vals[static_cast<size_t>(offset + q)] + vals[static_cast<size_t>(offset + q) + 1]);
      }
      line[static_cast<size_t>(i)] = acc;
    }
    Matrix integral = Matrix::Zero(3, 3);
    for (int i = 0; i < outer; ++i) {
      integral += 0.5 * (t / outer) * (line[static_cast<size_t>(i)] + line[static_cast<size_t>(i) + 1]);
    }
    const double dev = norm0(Matrix(integral + singular_mass(m3, t).total -
                                    matrix_exponential(m3.generator().entries(), t)));
    worst = std::max(worst, dev);
    out.require(dev < 1e-4, "3-state t=" + fmt(t) + ": " + fmt(dev));
  }
  out.note("worst residual " + fmt(worst));
  return out;
}

// --- 5: density and gradient caps ----------------------------------------------
Outcome criterion_caps() {
  Outcome out;
  int density_checked = 0, gradient_checked = 0;
  int density_viol = 0, gradient_viol = 0;
  PhiloxRng rng(1005, 0);

  for (const LocalTimeModel& m : {testmodels::lt2(), testmodels::lt3()}) {
    const int dim = m.states() - 1;
    const double density_cap = std::pow(m.rate(), dim);
    const double gradient_cap = 2.0 * std::pow(m.rate(), m.states());
    for (double t : {1.0, 2.0, 5.0, 10.0}) {
      std::vector<Vector> pts;
      while (pts.size() < 1250) {
        Vector y(dim);
        double sum = 0;
        for (int j = 0; j < dim; ++j) {
          y(j) = t * rng.next_double();
          sum += y(j);
        }
        if (sum >= 0.999 * t) continue;
        bool interior = true;
        for (int j = 0; j < dim; ++j) interior = interior && y(j) > 1e-3 * t;
        if (!interior || sum > 0.995 * t) continue;
        pts.push_back(y);
      }
      for (const Matrix& psi : joint_density_batch(m, t, pts)) {
        ++density_checked;
        if (norm0(psi) > density_cap * (1 + 1e-12)) ++density_viol;
      }
      for (int j = 0; j < dim; ++j) {
        for (const Matrix& g : density_gradient_batch(m, t, pts, j)) {
          ++gradient_checked;
          if (norm0(g) > gradient_cap * (1 + 1e-12)) ++gradient_viol;
        }
      }
    }
  }
  out.require(density_checked >= 10000, "density probe count");
  out.require(gradient_checked >= 10000, "gradient probe count");
  out.require(density_viol == 0, std::to_string(density_viol) + " density cap violations");
  out.require(gradient_viol == 0, std::to_string(gradient_viol) + " gradient cap violations");
  out.note(std::to_string(density_checked) + " density and " +
           std::to_string(gradient_checked) + " gradient probes, zero violations");
  return out;
}

// --- 6: dynamic program vs enumeration -----------------------------------------
Outcome criterion_dp_enumeration() {
  Outcome out;
  double worst = 0;
  for (const LocalTimeModel& m : {testmodels::lt2_rate(2.0), testmodels::lt3()}) {
    const VisitCountTable table(m, 8);
    for (int start = 0; start < m.states(); ++start) {
      for (int steps = 1; steps <= 8; ++steps) {
        const auto truth =
            oracles::enumerate_visit_counts(m.p_tilde().entries(), start, steps);
        for (const auto& [key, prob] : truth) {
          const double got = table.prob(
              start, steps, std::span<const int>(key.first.data(), key.first.size()),
              key.second);
          worst = std::max(worst, std::abs(got - prob));
        }
      }
    }
  }
  out.require(worst < 1e-12, "max |dp - enumeration| = " + fmt(worst));
  out.note("max deviation " + fmt(worst));
  return out;
}

// --- 7: singular-mass decay -----------------------------------------------------
Outcome criterion_singular_decay() {
  Outcome out;
  for (const LocalTimeModel& m : {testmodels::lt2(), testmodels::lt3()}) {
    std::vector<double> ts, ln;
    for (double t = 1; t <= 40; t += 3) {
      ts.push_back(t);
      ln.push_back(std::log(singular_mass(m, t).total_norm0));
    }
    const double slope = fit_line(ts, ln).slope;
    const double budget = -m.min_decay_rate() + 0.05;
    out.require(slope <= budget, std::to_string(m.states()) + "-state slope " + fmt(slope) +
                                     " vs " + fmt(budget));
    out.note(std::to_string(m.states()) + "-state slope " + fmt(slope) + " (r_min " +
             fmt(m.min_decay_rate()) + ")");
  }
  return out;
}

// --- 8: covariance cross-check ----------------------------------------------------
Outcome criterion_covariance() {
  Outcome out;
  const std::vector<std::pair<std::string, MapModel>> models{
      {"lt2", testmodels::lt2()}, {"lt3", testmodels::lt3()}, {"marp2", testmodels::marp2()}};
  McCovarianceSettings mc;
  mc.n_paths = 1000000;
  mc.t = 100.0;
  mc.seed = 88771;
  mc.threads = 4;
  for (const auto& [name, model] : models) {
    const CovarianceMatrix hess = covariance(model, CovarianceMethod::kHessian);
    const CovarianceMatrix m_c = covariance(model, CovarianceMethod::kMonteCarlo, mc);
    const int d = static_cast<int>(hess.sigma.rows());
    double worst_units = 0;
    for (int a = 0; a < d; ++a) {
      for (int b = a; b < d; ++b) {
        const double dev = std::abs(hess.sigma(a, b) - m_c.sigma(a, b));
        worst_units = std::max(worst_units, dev / m_c.se(a, b));
      }
    }
    out.require(worst_units <= 3.0, name + ": " + fmt(worst_units) + " standard errors");
    out.note(name + " " + fmt(worst_units) + " se");
  }
  return out;
}

// --- 9: third moment ---------------------------------------------------------------
Outcome criterion_third_moment() {
  Outcome out;
  const MapModel model = testmodels::marp2();
  for (int k = 0; k < 2; ++k) {
    double mean = 0, mean2 = 0;
    long count = 0;
    const SimulationResult simk = simulate_paths(model, k, 1.0, 500000, 90210 + k);
    for (const auto& s : simk.samples) {
      const double v = s.raw(0) * s.raw(0) * s.raw(0);
      mean += v;
      mean2 += v * v;
      ++count;
    }
    mean /= static_cast<double>(count);
    mean2 /= static_cast<double>(count);
    const double se = std::sqrt((mean2 - mean * mean) / static_cast<double>(count));
    const double closed = third_moment(testmodels::marp2(), k);
    out.require(std::abs(mean - closed) <= 3 * se,
                "phase " + std::to_string(k) + ": " + fmt(mean) + " vs " + fmt(closed));
    out.note("phase " + std::to_string(k) + " dev " + fmt((mean - closed) / se) + " se");
  }
  return out;
}

// --- 10: local limit theorem rate -----------------------------------------------------
Outcome criterion_llt_rate() {
  Outcome out;
  const std::vector<double> t_grid{10, 20, 40, 80, 160};
  for (const auto& [name, model] :
       std::vector<std::pair<std::string, MapModel>>{{"local-time", testmodels::lt2()},
                                                     {"renewal", testmodels::marp2()}}) {
    ExperimentConfig cfg{model};
    cfg.t_grid = t_grid;
    cfg.grid_points = 801;
    const ConvergenceReport rep = run_llt_experiment(cfg);
    out.require(std::abs(rep.slope + 0.5) <= 0.15,
                name + " slope " + fmt(rep.slope) + " outside -0.5 +/- 0.15");
    out.require(rep.r2 >= 0.9, name + " r2 " + fmt(rep.r2));
    out.note(name + " slope " + fmt(rep.slope) + " r2 " + fmt(rep.r2));
  }
  return out;
}

// --- 11: lattice diagnostic -----------------------------------------------------------
Outcome criterion_lattice() {
  Outcome out;
  Matrix p(2, 2);
  p << 0.5, 0.5, 0.5, 0.5;
  auto unit_chain = [&](const Vector& z) -> CMatrix {
    return std::exp(Complex(0, z(0))) * p.cast<Complex>();
  };
  const double r2pi = spectral_radius(unit_chain(Vector::Constant(1, 2 * M_PI)));
  out.require(std::abs(r2pi - 1.0) <= 1e-10, "unit chain radius at 2*pi: " + fmt(r2pi));

  for (const auto& [name, model] :
       std::vector<std::pair<std::string, MapModel>>{{"lt2", testmodels::lt2()},
                                                     {"lt3", testmodels::lt3()},
                                                     {"marp2", testmodels::marp2()}}) {
    const LatticeDiagnostic d =
        lattice_scan(model, 0.5, 20.0, additive_dimension(model) == 1 ? 200 : 48);
    out.require(d.max_radius_off_zero < 0.999,
                name + " annulus radius " + fmt(d.max_radius_off_zero));
    out.note(name + " max radius " + fmt(d.max_radius_off_zero));
  }
  return out;
}

// --- 12: eigenvalue-Gaussian bound ------------------------------------------------------
Outcome criterion_gaussian_bound() {
  Outcome out;
  std::vector<Vector> grid;
  for (double z = 0.25; z <= 3.0; z += 0.25) grid.push_back(Vector::Constant(1, z));
  for (const auto& [name, model] :
       std::vector<std::pair<std::string, MapModel>>{{"lt2", testmodels::lt2()},
                                                     {"marp2", testmodels::marp2()}}) {
    std::vector<double> lt, mv;
    for (double t : {4.0, 16.0, 64.0, 256.0}) {
      const GaussianBoundCheck c = gaussian_eigen_bound_check(model, t, grid);
      lt.push_back(std::log(t));
      mv.push_back(c.max_violation);
    }
    const double slope = fit_line(lt, mv).slope;
    out.require(slope <= 0.1, name + " trend slope " + fmt(slope));
    out.note(name + " trend " + fmt(slope) + ", last violation " + fmt(mv.back()));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0) only = std::atoi(argv[i + 1]);
  }

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria{
      {1, "semigroup identity", criterion_semigroup},
      {2, "transform decay bounds", criterion_fourier_decay},
      {3, "multinomial identity", criterion_multinomial},
      {4, "mass balance", criterion_mass_balance},
      {5, "density and gradient caps", criterion_caps},
      {6, "visit counts vs enumeration", criterion_dp_enumeration},
      {7, "singular mass decay", criterion_singular_decay},
      {8, "covariance cross-check", criterion_covariance},
      {9, "third moment vs Monte Carlo", criterion_third_moment},
      {10, "local limit theorem rate", criterion_llt_rate},
      {11, "lattice diagnostic", criterion_lattice},
      {12, "eigenvalue-Gaussian bound", criterion_gaussian_bound},
  };

  bool all_pass = true;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome result;
    try {
      result = c.fn();
    } catch (const std::exception& e) {
      result.pass = false;
      result.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%2d] %s  %-32s %s (%.1fs)\n", c.id, result.pass ? "PASS" : "FAIL",
                c.name, result.detail.c_str(), secs);
    std::fflush(stdout);
    all_pass = all_pass && result.pass;
  }
  return all_pass ? 0 : 1;
}
