#include "lltlab/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>

#include "lltlab/errors.hpp"

namespace lltlab {

// ---------------------------------------------------------------------------
// PhiloxRng
// ---------------------------------------------------------------------------

namespace {
constexpr std::uint64_t kPhiloxM0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kPhiloxM1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi,
                    std::uint64_t& lo) {
  const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}
}  // namespace

PhiloxRng::PhiloxRng(std::uint64_t seed, std::uint64_t stream)
    : key_{seed, stream}, counter_{0, 0, 0, 0}, buffer_{}, index_(4) {}

std::array<std::uint64_t, 4> PhiloxRng::block(std::array<std::uint64_t, 4> c,
                                              std::array<std::uint64_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, c[0], hi0, lo0);
    mulhilo(kPhiloxM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

void PhiloxRng::refill() {
  // 256-bit little-endian counter increment
  if (++counter_[0] == 0)
    if (++counter_[1] == 0)
      if (++counter_[2] == 0) ++counter_[3];
  buffer_ = block(counter_, key_);
  index_ = 0;
}

std::uint64_t PhiloxRng::next_u64() {
  if (index_ >= 4) refill();
  return buffer_[index_++];
}

double PhiloxRng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double PhiloxRng::next_double_open() { return 1.0 - next_double(); }

double PhiloxRng::exponential(double rate) {
  return -std::log(next_double_open()) / rate;
}

double PhiloxRng::normal() {
  if (have_cached_normal_) {
    have_cached_normal_ = false;
    return cached_normal_;
  }
  const double u = next_double_open();
  const double v = next_double();
  const double r = std::sqrt(-2.0 * std::log(u));
  cached_normal_ = r * std::sin(2.0 * M_PI * v);
  have_cached_normal_ = true;
  return r * std::cos(2.0 * M_PI * v);
}

// ---------------------------------------------------------------------------
// Path simulation
// ---------------------------------------------------------------------------

namespace {

PathSample simulate_local_time_path(const LocalTimeModel& model, int start, double t,
                                    PhiloxRng& rng, bool record_midpoint) {
  const Matrix& g = model.generator().entries();
  const int n = model.states();
  const double t_mid = 0.5 * t;

  Vector local = Vector::Zero(n);
  Vector local_mid = Vector::Zero(n);
  std::uint32_t visited = 1u << start;
  int state = start;
  double clock = 0.0;
  bool mid_done = false;

  auto account = [&](int s, double from, double to) {
    local(s) += to - from;
    if (record_midpoint) {
      const double upto = std::min(to, t_mid);
      if (from < upto) local_mid(s) += upto - from;
    }
  };

  while (true) {
    const double rate = -g(state, state);
    double hold = (rate > 0.0) ? rng.exponential(rate) : t - clock + 1.0;
    if (clock + hold >= t) {
      account(state, clock, t);
      break;
    }
    account(state, clock, clock + hold);
    clock += hold;
    // next state proportional to the off-diagonal row
    double u = rng.next_double() * rate;
    int next = -1;
    for (int j = 0; j < n; ++j) {
      if (j == state) continue;
      u -= g(state, j);
      if (u <= 0.0) {
        next = j;
        break;
      }
    }
    if (next < 0) {  // guard roundoff at the end of the row
      for (int j = n - 1; j >= 0; --j)
        if (j != state && g(state, j) > 0) {
          next = j;
          break;
        }
    }
    state = next;
    visited |= 1u << state;
    if (record_midpoint && !mid_done && clock >= t_mid) mid_done = true;
  }

  // force exact conservation <L_t, 1> = t
  const double drift = t - local.sum();
  local(state) += drift;

  const Vector& pi = model.pi().weights();
  const int d = n - 1;
  PathSample s;
  s.start_state = start;
  s.end_state = state;
  s.raw = local;
  s.unvisited_mask = ~visited & ((1u << n) - 1u);
  s.y = (local - t * pi).head(d);
  if (record_midpoint) s.y_mid = (local_mid - t_mid * pi).head(d);
  return s;
}

PathSample simulate_marp_path(const MarpModel& model, int start, int n_arrivals,
                              PhiloxRng& rng, bool record_midpoint) {
  const Matrix& d0 = model.d0();
  const Matrix& d1 = model.d1();
  const int n = model.phases();
  const int mid = n_arrivals / 2;
  const double m = model.mean_increment();

  int phase = start;
  double total = 0.0;
  double total_mid = 0.0;
  for (int arrival = 0; arrival < n_arrivals;) {
    const double rate = -d0(phase, phase);
    total += rng.exponential(rate);
    // event: hidden transition with weight D0(phase,j), arrival with D1(phase,j)
    double u = rng.next_double() * rate;
    int next = -1;
    bool is_arrival = false;
    for (int j = 0; j < n && next < 0; ++j) {
      if (j != phase) {
        u -= d0(phase, j);
        if (u <= 0.0) next = j;
      }
    }
    if (next < 0) {
      for (int j = 0; j < n && next < 0; ++j) {
        u -= d1(phase, j);
        if (u <= 0.0) {
          next = j;
          is_arrival = true;
        }
      }
    }
    if (next < 0) {  // roundoff guard: treat as the heaviest arrival entry
      int arg = 0;
      d1.row(phase).maxCoeff(&arg);
      next = arg;
      is_arrival = true;
    }
    phase = next;
    if (is_arrival) {
      ++arrival;
      if (arrival == mid) total_mid = total;
    }
  }

  PathSample s;
  s.start_state = start;
  s.end_state = phase;
  s.raw = Vector::Constant(1, total);
  s.unvisited_mask = 0;
  s.y = Vector::Constant(1, total - n_arrivals * m);
  if (record_midpoint) s.y_mid = Vector::Constant(1, total_mid - mid * m);
  return s;
}

}  // namespace

SimulationResult simulate_paths(const MapModel& model, int k, double t, long n_paths,
                                std::uint64_t seed, const SimulationOptions& opt) {
  if (n_paths < 1) throw InvalidInput("simulate_paths: n_paths must be >= 1");
  const int n_states = state_count(model);
  if (k < 0 || k >= n_states) throw InvalidInput("simulate_paths: bad start state");

  int n_arrivals = 0;
  if (std::holds_alternative<MarpModel>(model)) {
    n_arrivals = static_cast<int>(std::llround(t));
    if (std::abs(t - n_arrivals) > 1e-9 || n_arrivals < 1) {
      throw InvalidInput("simulate_paths: MArP horizon must be a positive integer");
    }
  }

  SimulationResult result;
  result.t = t;
  result.seed = seed;
  result.rng_name = PhiloxRng::kName;
  result.has_midpoint = opt.record_midpoint;
  result.samples.resize(static_cast<size_t>(n_paths));

  auto worker = [&](long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      PhiloxRng rng(seed, static_cast<std::uint64_t>(i));
      result.samples[static_cast<size_t>(i)] = std::visit(
          [&](const auto& m) -> PathSample {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LocalTimeModel>) {
              return simulate_local_time_path(m, k, t, rng, opt.record_midpoint);
            } else {
              return simulate_marp_path(m, k, n_arrivals, rng, opt.record_midpoint);
            }
          },
          model);
    }
  };

  const int threads = std::max(1, opt.threads);
  if (threads == 1) {
    worker(0, n_paths);
  } else {
    std::vector<std::thread> pool;
    const long chunk = (n_paths + threads - 1) / threads;
    for (int w = 0; w < threads; ++w) {
      const long lo = w * chunk;
      const long hi = std::min<long>(n_paths, lo + chunk);
      if (lo < hi) pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return result;
}

// ---------------------------------------------------------------------------
// Empirical estimators
// ---------------------------------------------------------------------------

namespace {
// pairwise sum for reproducible reductions independent of chunking
double pairwise_sum(const std::vector<double>& v, size_t lo, size_t hi) {
  if (hi - lo <= 8) {
    double s = 0;
    for (size_t i = lo; i < hi; ++i) s += v[i];
    return s;
  }
  const size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}
}  // namespace

EmpiricalDensity empirical_density(const SimulationResult& sim, const HistogramSpec& spec,
                                   bool exclude_singular) {
  if (sim.samples.empty()) throw InvalidInput("empirical_density: no samples");
  const int d = static_cast<int>(spec.lo.size());
  if (spec.hi.size() != d || static_cast<int>(spec.bins.size()) != d || d == 0) {
    throw InvalidInput("empirical_density: inconsistent histogram spec");
  }
  long total_bins = 1;
  double cell_volume = 1.0;
  for (int j = 0; j < d; ++j) {
    if (spec.bins[j] < 1 || spec.hi(j) <= spec.lo(j)) {
      throw InvalidInput("empirical_density: bad bins");
    }
    total_bins *= spec.bins[j];
    cell_volume *= (spec.hi(j) - spec.lo(j)) / spec.bins[j];
  }

  EmpiricalDensity out;
  out.spec = spec;
  out.n_samples = static_cast<long>(sim.samples.size());
  out.mass.assign(static_cast<size_t>(total_bins), 0.0);
  out.singular_count = 0;
  out.out_of_range = 0;

  const double scale = 1.0 / std::sqrt(sim.t);
  for (const auto& s : sim.samples) {
    if (exclude_singular && s.unvisited_mask != 0) {
      ++out.singular_count;
      continue;
    }
    long idx = 0;
    bool inside = true;
    for (int j = 0; j < d && inside; ++j) {
      const double x = s.y(j) * scale;
      const double rel = (x - spec.lo(j)) / (spec.hi(j) - spec.lo(j));
      const long b = static_cast<long>(std::floor(rel * spec.bins[j]));
      if (b < 0 || b >= spec.bins[j]) inside = false;
      idx = idx * spec.bins[j] + b;
    }
    if (inside)
      out.mass[static_cast<size_t>(idx)] += 1.0;
    else
      ++out.out_of_range;
  }

  const double n = static_cast<double>(out.n_samples);
  out.se.resize(out.mass.size());
  for (size_t i = 0; i < out.mass.size(); ++i) {
    const double p = out.mass[i] / n;
    out.mass[i] = p / cell_volume;                                  // density estimate
    out.se[i] = std::sqrt(std::max(p * (1 - p), 0.0) / n) / cell_volume;
  }
  out.cell_volume = cell_volume;
  return out;
}

EmpiricalCovariance empirical_covariance(const SimulationResult& sim) {
  if (sim.samples.empty()) throw InvalidInput("empirical_covariance: no samples");
  const int d = static_cast<int>(sim.samples.front().y.size());
  const double scale = 1.0 / std::sqrt(sim.t);
  const size_t n = sim.samples.size();

  Vector mean = Vector::Zero(d);
  {
    std::vector<double> col(n);
    for (int j = 0; j < d; ++j) {
      for (size_t i = 0; i < n; ++i) col[i] = sim.samples[i].y(j) * scale;
      mean(j) = pairwise_sum(col, 0, n) / static_cast<double>(n);
    }
  }

  EmpiricalCovariance out;
  out.mean = mean;
  out.n = static_cast<long>(n);
  out.sigma.setZero(d, d);
  out.se.setZero(d, d);
  out.mean_se.setZero(d);

  std::vector<double> prod(n), prod2(n);
  for (int a = 0; a < d; ++a) {
    for (int b = a; b < d; ++b) {
      for (size_t i = 0; i < n; ++i) {
        const double xa = sim.samples[i].y(a) * scale - mean(a);
        const double xb = sim.samples[i].y(b) * scale - mean(b);
        prod[i] = xa * xb;
        prod2[i] = xa * xb * xa * xb;
      }
      const double c = pairwise_sum(prod, 0, n) / static_cast<double>(n - 1);
      const double m2 = pairwise_sum(prod2, 0, n) / static_cast<double>(n);
      out.sigma(a, b) = out.sigma(b, a) = c;
      const double var_c = std::max(m2 - c * c, 0.0) / static_cast<double>(n);
      out.se(a, b) = out.se(b, a) = std::sqrt(var_c);
    }
    out.mean_se(a) = std::sqrt(out.sigma(a, a) / static_cast<double>(n));
  }
  return out;
}

void export_samples_csv(const SimulationResult& sim, std::ostream& os) {
  os << "# rng=" << sim.rng_name << " seed=" << sim.seed << " t=" << sim.t << "\n";
  const int d = sim.samples.empty() ? 0 : static_cast<int>(sim.samples.front().y.size());
  os << "start,end";
  for (int j = 0; j < d; ++j) os << ",y" << j;
  os << "\n";
  char buf[64];
  for (const auto& s : sim.samples) {
    os << s.start_state << "," << s.end_state;
    for (int j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof(buf), ",%.17g", s.y(j));
      os << buf;
    }
    os << "\n";
  }
}

}  // namespace lltlab
