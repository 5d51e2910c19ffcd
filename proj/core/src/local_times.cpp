#include "lltlab/local_times.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "lltlab/errors.hpp"

namespace lltlab {

namespace {

constexpr double kFaceEps = 1e-14;

const double* log_factorials(int upto) {
  static thread_local std::vector<double> table{0.0, 0.0};
  while (static_cast<int>(table.size()) <= upto) {
    table.push_back(table.back() + std::log(static_cast<double>(table.size())));
  }
  return table.data();
}

int poisson_cutoff(double mean) {
  return static_cast<int>(std::ceil(mean + 12.0 * std::sqrt(mean) + 30.0));
}

// P{Poisson(mean) > n_max}, crude but safe upper bound via the next terms
double poisson_tail(double mean, int n_max) {
  const double* lgf = log_factorials(n_max + 2);
  const double lw = -mean + (n_max + 1) * std::log(mean) - lgf[n_max + 1];
  const double ratio = mean / (n_max + 2);
  if (ratio >= 1.0) return 1.0;
  return std::exp(lw) / (1.0 - ratio);
}

// Flat indexing of {c >= 0 : sum c <= max_total} for dim 1..3.
class CountLattice {
 public:
  CountLattice(int dim, int max_total) : dim_(dim), L_(max_total) {
    if (dim_ == 3) {
      off_.resize(static_cast<size_t>(L_) + 2, 0);
      long acc = 0;
      for (int c0 = 0; c0 <= L_; ++c0) {
        off_[static_cast<size_t>(c0)] = acc;
        const long rem = L_ - c0;
        acc += (rem + 1) * (rem + 2) / 2;
      }
      off_[static_cast<size_t>(L_) + 1] = acc;
    }
  }

  int dim() const { return dim_; }
  int max_total() const { return L_; }

  long size() const {
    switch (dim_) {
      case 1:
        return L_ + 1;
      case 2:
        return static_cast<long>(L_ + 1) * (L_ + 2) / 2;
      case 3:
        return off_[static_cast<size_t>(L_) + 1];
      default:
        throw InvalidInput("count lattice supports 1..3 dimensions");
    }
  }

  long index(std::span<const int> c) const {
    switch (dim_) {
      case 1:
        return c[0];
      case 2:
        return tri_index(c[0], c[1], L_);
      case 3:
        return off_[static_cast<size_t>(c[0])] + tri_index(c[1], c[2], L_ - c[0]);
      default:
        throw InvalidInput("count lattice supports 1..3 dimensions");
    }
  }

  static long tri_index(int a, int b, int bound) {
    // lexicographic over {a >= 0, b >= 0, a + b <= bound}
    return static_cast<long>(a) * (2 * bound + 3 - a) / 2 + b;
  }

 private:
  int dim_;
  int L_;
  std::vector<long> off_;
};

// Forward dynamic program over (visit counts of states 0..N-2, current state).
// One slice holds W[cell](k, s) = P_k{V_j = counts(cell), Z_j = s} for every
// start state k at once, flattened lattice-major.
class VisitWalker {
 public:
  VisitWalker(const LocalTimeModel& model, int max_steps)
      : p_(model.p_tilde().entries()),
        n_(model.states()),
        dim_(n_ - 1),
        lattice_(dim_, max_steps + 1),
        step_(0) {
    cur_.assign(static_cast<size_t>(lattice_.size()) * n_ * n_, 0.0);
    next_.assign(cur_.size(), 0.0);
    std::vector<int> c(static_cast<size_t>(dim_), 0);
    for (int k = 0; k < n_; ++k) {
      std::fill(c.begin(), c.end(), 0);
      if (k < dim_) c[static_cast<size_t>(k)] = 1;
      cur_[static_cast<size_t>(lattice_.index(c)) * n_ * n_ + k * n_ + k] = 1.0;
    }
  }

  int step() const { return step_; }
  const CountLattice& lattice() const { return lattice_; }
  const double* slice() const { return cur_.data(); }
  int states() const { return n_; }

  const double* block(long cell) const { return cur_.data() + cell * n_ * n_; }

  void advance() {
    ++step_;
    const int bound = std::min(step_ + 1, lattice_.max_total());
    std::fill(next_.begin(), next_.end(), 0.0);
    std::vector<int> c(static_cast<size_t>(dim_), 0);
    std::vector<int> parent(static_cast<size_t>(dim_), 0);
    iterate(bound, c, 0, 0, [&](std::span<const int> counts) {
      const long cell = lattice_.index(counts);
      double* out = next_.data() + cell * n_ * n_;
      for (int s = 0; s < n_; ++s) {
        const double* pin = nullptr;
        if (s < dim_) {
          if (counts[static_cast<size_t>(s)] == 0) continue;
          std::copy(counts.begin(), counts.end(), parent.begin());
          parent[static_cast<size_t>(s)] -= 1;
          pin = cur_.data() + lattice_.index(parent) * n_ * n_;
        } else {
          pin = cur_.data() + cell * n_ * n_;
        }
        for (int k = 0; k < n_; ++k) {
          double acc = 0;
          const double* row = pin + k * n_;
          for (int sp = 0; sp < n_; ++sp) acc += row[sp] * p_(sp, s);
          out[k * n_ + s] += acc;
        }
      }
    });
    cur_.swap(next_);
  }

 private:
  template <typename F>
  void iterate(int bound, std::vector<int>& c, int pos, int used, F&& f) {
    if (pos == dim_) {
      f(std::span<const int>(c.data(), c.size()));
      return;
    }
    for (int v = 0; v + used <= bound; ++v) {
      c[static_cast<size_t>(pos)] = v;
      iterate(bound, c, pos + 1, used + v, f);
    }
    c[static_cast<size_t>(pos)] = 0;
  }

  Matrix p_;
  int n_;
  int dim_;
  CountLattice lattice_;
  int step_;
  std::vector<double> cur_, next_;
};

// ---------------------------------------------------------------------------
// Multinomial weight sweeps: enumerate w(counts) = n! x over the count
// lattice, anchored at the mode with multiplicative updates so magnitudes
// stay representable. Coordinates with u = 0 pin their count to zero; a
// vanishing final coordinate pins the total to n.
// ---------------------------------------------------------------------------

constexpr double kWeightCutoffRel = 1e-20;

// cb(counts, weight)
template <typename F>
void sweep_dim1(int n, double u0, double ul, F&& cb) {
  static thread_local std::vector<int> c(1);
  const double* lgf = log_factorials(n + 1);
  if (u0 <= kFaceEps) {
    if (ul <= kFaceEps) return;
    c[0] = 0;
    cb(std::span<const int>(c.data(), 1), std::pow(ul, n));
    return;
  }
  if (ul <= kFaceEps) {
    c[0] = n;
    cb(std::span<const int>(c.data(), 1), std::pow(u0, n));
    return;
  }
  const double lu = std::log(u0), lv = std::log(ul);
  int k0 = std::clamp(static_cast<int>(std::lround((n + 1) * u0)), 0, n);
  const double lw0 = lgf[n] - lgf[k0] - lgf[n - k0] + k0 * lu + (n - k0) * lv;
  const double w0 = std::exp(lw0);
  const double cut = w0 * kWeightCutoffRel;
  const double r = u0 / ul;
  double w = w0;
  for (int k = k0; k <= n; ++k) {
    c[0] = k;
    cb(std::span<const int>(c.data(), 1), w);
    if (k < n) {
      w *= r * (n - k) / (k + 1.0);
      if (w < cut) break;
    }
  }
  w = w0;
  for (int k = k0 - 1; k >= 0; --k) {
    w *= (k + 1.0) / (r * (n - k));
    if (w < cut) break;
    c[0] = k;
    cb(std::span<const int>(c.data(), 1), w);
  }
}

template <typename F>
void sweep_dim2(int n, double u0, double u1, double ul, F&& cb) {
  static thread_local std::vector<int> c(2);
  const double* lgf = log_factorials(n + 1);
  // pinned coordinates reduce to lower-dimensional sweeps
  if (u0 <= kFaceEps) {
    sweep_dim1(n, u1, ul, [&](std::span<const int> inner, double w) {
      c[0] = 0;
      c[1] = inner[0];
      cb(std::span<const int>(c.data(), 2), w);
    });
    return;
  }
  if (u1 <= kFaceEps) {
    sweep_dim1(n, u0, ul, [&](std::span<const int> inner, double w) {
      c[0] = inner[0];
      c[1] = 0;
      cb(std::span<const int>(c.data(), 2), w);
    });
    return;
  }
  if (ul <= kFaceEps) {
    // diagonal face: k1 = n - k0, binomial in (u0, u1)
    sweep_dim1(n, u0, u1, [&](std::span<const int> inner, double w) {
      c[0] = inner[0];
      c[1] = n - inner[0];
      cb(std::span<const int>(c.data(), 2), w);
    });
    return;
  }
  const double lu0 = std::log(u0), lu1 = std::log(u1), lul = std::log(ul);
  const double r1 = u1 / ul;
  // outer coordinate ranges over a window of the binomial(n, u0) marginal
  const double sd0 = std::sqrt(n * u0 * (1 - u0));
  const int wlo = std::max(0, static_cast<int>(n * u0 - 12 * sd0 - 30));
  const int whi = std::min(n, static_cast<int>(n * u0 + 12 * sd0 + 30) + 1);
  double wmax_seen = 0.0;
  for (int k0 = wlo; k0 <= whi; ++k0) {
    const int rem = n - k0;
    c[0] = k0;
    int k1a = std::clamp(static_cast<int>(std::lround((rem + 1) * u1 / (u1 + ul))), 0, rem);
    const double lw = lgf[n] - lgf[k0] - lgf[k1a] - lgf[rem - k1a] + k0 * lu0 +
                      k1a * lu1 + (rem - k1a) * lul;
    const double wa = std::exp(lw);
    wmax_seen = std::max(wmax_seen, wa);
    const double cut = std::max(wmax_seen * kWeightCutoffRel, 1e-300);
    if (wa < cut && std::abs(k0 - n * u0) > 3 * sd0 + 4) continue;
    double w = wa;
    for (int k1 = k1a; k1 <= rem; ++k1) {
      c[1] = k1;
      cb(std::span<const int>(c.data(), 2), w);
      if (k1 < rem) {
        w *= r1 * (rem - k1) / (k1 + 1.0);
        if (w < cut) break;
      }
    }
    w = wa;
    for (int k1 = k1a - 1; k1 >= 0; --k1) {
      w *= (k1 + 1.0) / (r1 * (rem - k1));
      if (w < cut) break;
      c[1] = k1;
      cb(std::span<const int>(c.data(), 2), w);
    }
  }
}

// dim 3 used only at modest n (N = 4 desk scale): plain enumeration
template <typename F>
void sweep_dim3(int n, const double* u, double ul, F&& cb) {
  static thread_local std::vector<int> c(3);
  const double* lgf = log_factorials(n + 1);
  std::array<bool, 3> face{u[0] <= kFaceEps, u[1] <= kFaceEps, u[2] <= kFaceEps};
  const bool diag = ul <= kFaceEps;
  std::array<double, 3> lu{};
  for (int j = 0; j < 3; ++j) lu[static_cast<size_t>(j)] = face[static_cast<size_t>(j)] ? 0.0 : std::log(u[j]);
  const double lul = diag ? 0.0 : std::log(ul);
  for (int k0 = 0; k0 <= (face[0] ? 0 : n); ++k0) {
    for (int k1 = 0; k1 <= (face[1] ? 0 : n - k0); ++k1) {
      const int hi2 = face[2] ? 0 : n - k0 - k1;
      for (int k2 = 0; k2 <= hi2; ++k2) {
        const int kl = n - k0 - k1 - k2;
        if (diag && kl != 0) continue;
        const double lw = lgf[n] - lgf[k0] - lgf[k1] - lgf[k2] - lgf[kl] +
                          k0 * lu[0] + k1 * lu[1] + k2 * lu[2] + (diag ? 0.0 : kl * lul);
        c[0] = k0;
        c[1] = k1;
        c[2] = k2;
        cb(std::span<const int>(c.data(), 3), std::exp(lw));
      }
    }
  }
}

template <typename F>
void multinomial_sweep(int n, std::span<const double> u, double u_last, F&& cb) {
  switch (u.size()) {
    case 1:
      sweep_dim1(n, u[0], u_last, cb);
      return;
    case 2:
      sweep_dim2(n, u[0], u[1], u_last, cb);
      return;
    case 3:
      sweep_dim3(n, u.data(), u_last, cb);
      return;
    default:
      throw InvalidInput("density series supports 2..4 states");
  }
}

// ---------------------------------------------------------------------------
// Series engine shared by value and gradient evaluation
// ---------------------------------------------------------------------------

struct SeriesRequest {
  bool gradient = false;
  int direction = 0;
};

std::vector<Matrix> series_evaluate(const LocalTimeModel& model, double t,
                                    const std::vector<Vector>& ys, double series_tol,
                                    const SeriesRequest& req, double* truncation_error) {
  if (t <= 0) throw InvalidInput("density series: t must be positive");
  const int n_states = model.states();
  const int d = n_states - 1;
  const double a = model.rate();
  const double at = a * t;
  const int n_max = poisson_cutoff(at);
  const int extra = req.gradient ? n_states : n_states - 1;
  const int s_max = n_max + extra;

  const double* lgf = log_factorials(n_max + 2);
  std::vector<double> pois(static_cast<size_t>(n_max) + 1);
  const double lat = std::log(at);
  for (int n = 0; n <= n_max; ++n) {
    pois[static_cast<size_t>(n)] = std::exp(-at + n * lat - lgf[n]);
  }
  const double skip = series_tol / (10.0 * (n_max + 1));

  struct Point {
    bool active = false;
    Vector u;       // y / t, length d
    double u_last = 0.0;
  };
  std::vector<Point> pts(ys.size());
  for (size_t i = 0; i < ys.size(); ++i) {
    const Vector& y = ys[i];
    if (static_cast<int>(y.size()) != d) {
      throw InvalidInput("density series: point dimension mismatch");
    }
    Point p;
    p.u = y / t;
    double sum = 0;
    bool ok = true;
    for (int j = 0; j < d; ++j) {
      if (p.u(j) < -1e-12 || p.u(j) > 1.0 + 1e-12) ok = false;
      p.u(j) = std::clamp(p.u(j), 0.0, 1.0);
      sum += p.u(j);
    }
    if (sum > 1.0 + 1e-12) ok = false;
    p.u_last = std::max(1.0 - sum, 0.0);
    if (req.gradient) {
      // gradient only defined on the open simplex
      bool interior = ok && p.u_last > kFaceEps;
      for (int j = 0; j < d; ++j) interior = interior && p.u(j) > kFaceEps;
      if (!interior) throw OutOfSimplex("density_gradient: point not interior");
    }
    p.active = ok;
    pts[i] = std::move(p);
  }

  std::vector<Matrix> out(ys.size(), Matrix::Zero(n_states, n_states));
  VisitWalker walker(model, s_max);
  const CountLattice& lattice = walker.lattice();
  std::vector<int> raw(static_cast<size_t>(d));
  std::vector<int> raw2(static_cast<size_t>(d));

  for (int j = 0; j <= s_max; ++j) {
    if (j > 0) walker.advance();
    const int n = j - extra;
    if (n < 0 || n > n_max) continue;
    const double pw = pois[static_cast<size_t>(n)];
    if (pw < skip) continue;
    for (size_t i = 0; i < pts.size(); ++i) {
      if (!pts[i].active) continue;
      const Point& p = pts[i];
      Matrix& acc = out[i];
      multinomial_sweep(
          n, std::span<const double>(p.u.data(), static_cast<size_t>(d)), p.u_last,
          [&](std::span<const int> counts, double w) {
            for (int q = 0; q < d; ++q) raw[static_cast<size_t>(q)] = counts[static_cast<size_t>(q)] + 1;
            const double f = pw * w;
            if (!req.gradient) {
              const double* blk = walker.block(lattice.index(raw));
              for (int kk = 0; kk < n_states; ++kk)
                for (int ll = 0; ll < n_states; ++ll)
                  acc(kk, ll) += f * blk[kk * n_states + ll];
            } else {
              std::copy(raw.begin(), raw.end(), raw2.begin());
              raw2[static_cast<size_t>(req.direction)] += 1;
              const double* hi = walker.block(lattice.index(raw2));
              const double* lo = walker.block(lattice.index(raw));
              for (int kk = 0; kk < n_states; ++kk)
                for (int ll = 0; ll < n_states; ++ll)
                  acc(kk, ll) += f * (hi[kk * n_states + ll] - lo[kk * n_states + ll]);
            }
          });
    }
  }

  const double amp = std::pow(a, req.gradient ? n_states : d);
  for (auto& m : out) m *= amp;
  if (truncation_error) {
    // dropped Poisson tail plus the skipped interior weights
    *truncation_error = amp * (poisson_tail(at, n_max) + series_tol / 10.0);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// SimplexGeometry
// ---------------------------------------------------------------------------

SimplexGeometry::SimplexGeometry(double t, Vector m_prime)
    : t_(t), m_prime_(std::move(m_prime)) {
  if (t_ <= 0) throw InvalidInput("SimplexGeometry: t must be positive");
  if (m_prime_.size() < 1) throw InvalidInput("SimplexGeometry: empty centering");
}

bool SimplexGeometry::contains_open(const Vector& y) const {
  if (y.size() != m_prime_.size()) return false;
  double s = 0;
  for (int j = 0; j < y.size(); ++j) {
    if (y(j) <= 0.0 || y(j) >= t_) return false;
    s += y(j);
  }
  return s < t_;
}

bool SimplexGeometry::contains_closed(const Vector& y) const {
  if (y.size() != m_prime_.size()) return false;
  const double tol = 1e-12 * std::max(1.0, t_);
  double s = 0;
  for (int j = 0; j < y.size(); ++j) {
    if (y(j) < -tol || y(j) > t_ + tol) return false;
    s += y(j);
  }
  return s <= t_ + tol;
}

bool SimplexGeometry::centered_contains_open(const Vector& y) const {
  return contains_open(y + m_prime_ * t_);
}

bool SimplexGeometry::centered_contains_closed(const Vector& y) const {
  return contains_closed(y + m_prime_ * t_);
}

namespace {
double halton(int index, int base) {
  double f = 1.0, r = 0.0;
  for (int i = index; i > 0; i /= base) {
    f /= base;
    r += f * (i % base);
  }
  return r;
}
}  // namespace

std::vector<std::vector<Vector>> SimplexGeometry::boundary_samples(int per_face) const {
  const int d = dim();
  std::vector<std::vector<Vector>> faces(static_cast<size_t>(d) + 1);
  if (d == 1) {
    faces[0].push_back(Vector::Zero(1));
    faces[1].push_back(Vector::Constant(1, t_));
    return faces;
  }
  if (d == 2) {
    for (int i = 1; i <= per_face; ++i) {
      const double u = halton(i, 2) * t_;
      faces[0].push_back((Vector(2) << 0.0, u).finished());
      faces[1].push_back((Vector(2) << u, 0.0).finished());
      faces[2].push_back((Vector(2) << u, t_ - u).finished());
    }
    return faces;
  }
  if (d == 3) {
    for (int i = 1; i <= per_face; ++i) {
      double u = halton(i, 2), v = halton(i, 3);
      if (u + v > 1.0) {  // fold into the unit triangle
        u = 1.0 - u;
        v = 1.0 - v;
      }
      const double p = u * t_, q = v * t_, rem = t_ - p - q;
      faces[0].push_back((Vector(3) << 0.0, p, q).finished());
      faces[1].push_back((Vector(3) << p, 0.0, q).finished());
      faces[2].push_back((Vector(3) << p, q, 0.0).finished());
      faces[3].push_back((Vector(3) << p, q, rem).finished());
    }
    return faces;
  }
  throw InvalidInput("boundary_samples: dimension must be 1..3");
}

// ---------------------------------------------------------------------------
// VisitCountTable
// ---------------------------------------------------------------------------

VisitCountTable::VisitCountTable(const LocalTimeModel& model, int n_steps,
                                 std::size_t memory_budget_bytes)
    : n_(model.states()), n_steps_(n_steps), dim_(n_ - 1) {
  if (n_steps < 0) throw InvalidInput("VisitCountTable: negative step count");
  const CountLattice lattice(dim_, n_steps + 1);
  const std::size_t per_slice = static_cast<std::size_t>(lattice.size()) * n_ * n_;
  const std::size_t bytes = per_slice * (static_cast<std::size_t>(n_steps) + 1) * sizeof(double);
  if (bytes > memory_budget_bytes) {
    int feasible = n_steps;
    while (feasible > 0) {
      const CountLattice trial(dim_, feasible + 1);
      const std::size_t b = static_cast<std::size_t>(trial.size()) * n_ * n_ *
                            (static_cast<std::size_t>(feasible) + 1) * sizeof(double);
      if (b <= memory_budget_bytes) break;
      --feasible;
    }
    throw BudgetExceeded("VisitCountTable: lattice exceeds memory budget", feasible);
  }
  VisitWalker walker(model, n_steps);
  slices_.reserve(static_cast<size_t>(n_steps) + 1);
  for (int j = 0; j <= n_steps; ++j) {
    if (j > 0) walker.advance();
    // walker uses the full-size lattice; copy the slice as-is
    slices_.emplace_back(walker.slice(),
                         walker.slice() + walker.lattice().size() * n_ * n_);
  }
}

double VisitCountTable::prob(int start, int steps, std::span<const int> counts,
                             int end) const {
  if (steps < 0 || steps > n_steps_) throw InvalidInput("VisitCountTable: step out of range");
  if (start < 0 || start >= n_ || end < 0 || end >= n_) {
    throw InvalidInput("VisitCountTable: state out of range");
  }
  if (static_cast<int>(counts.size()) != dim_) {
    throw InvalidInput("VisitCountTable: counts dimension mismatch");
  }
  int total = 0;
  for (int c : counts) {
    if (c < 0) return 0.0;
    total += c;
  }
  if (total > steps + 1) return 0.0;
  for (int c : counts)
    if (c > steps + 1) return 0.0;
  const CountLattice lattice(dim_, n_steps_ + 1);
  const long cell = lattice.index(counts);
  return slices_[static_cast<size_t>(steps)][static_cast<size_t>(cell) * n_ * n_ +
                                             start * n_ + end];
}

double VisitCountTable::series_coefficient(int start, int m, std::span<const int> k_counts,
                                           int end) const {
  std::vector<int> raw(k_counts.size());
  for (size_t i = 0; i < k_counts.size(); ++i) raw[i] = k_counts[i] + 1;
  return prob(start, m - 1, raw, end);
}

double VisitCountTable::total_mass(int start, int steps) const {
  if (steps < 0 || steps > n_steps_) throw InvalidInput("VisitCountTable: step out of range");
  const CountLattice lattice(dim_, n_steps_ + 1);
  double s = 0;
  const auto& slice = slices_[static_cast<size_t>(steps)];
  for (long cell = 0; cell < lattice.size(); ++cell) {
    for (int e = 0; e < n_; ++e) s += slice[static_cast<size_t>(cell) * n_ * n_ + start * n_ + e];
  }
  return s;
}

// ---------------------------------------------------------------------------
// Visit probabilities
// ---------------------------------------------------------------------------

namespace {
Matrix deleted_submatrix(const Matrix& m, int i) {
  const int n = static_cast<int>(m.rows());
  Matrix sub(n - 1, n - 1);
  for (int r = 0, rr = 0; r < n; ++r) {
    if (r == i) continue;
    for (int c = 0, cc = 0; c < n; ++c) {
      if (c == i) continue;
      sub(rr, cc++) = m(r, c);
    }
    ++rr;
  }
  return sub;
}
}  // namespace

double visit_zero_probability(const LocalTimeModel& model, int i, int k, int n) {
  const int N = model.states();
  if (i < 0 || i >= N || k < 0 || k >= N) throw InvalidInput("visit_zero_probability: bad state");
  if (n < 0) throw InvalidInput("visit_zero_probability: negative step count");
  if (k == i) return 0.0;
  const Matrix sub = deleted_submatrix(model.p_tilde().entries(), i);
  Vector v = Vector::Ones(N - 1);
  for (int s = 0; s < n; ++s) v = sub * v;
  const int kk = (k < i) ? k : k - 1;
  return v(kk);
}

double visit_one_probability(const LocalTimeModel& model, int i, int k, int n) {
  const int N = model.states();
  if (i < 0 || i >= N || k < 0 || k >= N) throw InvalidInput("visit_one_probability: bad state");
  if (n < 0) throw InvalidInput("visit_one_probability: negative step count");
  const Matrix& pt = model.p_tilde().entries();
  const Matrix sub = deleted_submatrix(pt, i);

  // P_i{V_n = 1}: no return to i over n further steps
  auto from_i = [&](int steps) {
    if (steps == 0) return 1.0;
    Vector v = Vector::Ones(N - 1);
    for (int s = 0; s < steps - 1; ++s) v = sub * v;
    double acc = 0;
    for (int j = 0, jj = 0; j < N; ++j) {
      if (j == i) continue;
      acc += pt(i, j) * v(jj++);
    }
    return acc;
  };
  if (k == i) return from_i(n);

  // renewal recursion for the off-diagonal starts
  Vector col_to_i(N - 1);
  for (int j = 0, jj = 0; j < N; ++j) {
    if (j == i) continue;
    col_to_i(jj++) = pt(j, i);
  }
  Vector v = Vector::Zero(N - 1);
  for (int s = 0; s < n; ++s) {
    v = (sub * v + from_i(s) * col_to_i).eval();
  }
  const int kk = (k < i) ? k : k - 1;
  return v(kk);
}

// ---------------------------------------------------------------------------
// Density series, gradients, coefficients
// ---------------------------------------------------------------------------

double multinomial_coefficient(int n, std::span<const int> counts, double t,
                               const Vector& y) {
  if (n < 0) throw InvalidInput("multinomial_coefficient: negative order");
  if (t <= 0) throw InvalidInput("multinomial_coefficient: t must be positive");
  if (static_cast<int>(counts.size()) != y.size()) {
    throw InvalidInput("multinomial_coefficient: dimension mismatch");
  }
  int total = 0;
  for (int c : counts) {
    if (c < 0) throw InvalidInput("multinomial_coefficient: negative count");
    total += c;
  }
  if (total > n) throw InvalidInput("multinomial_coefficient: counts exceed order");

  double sum = 0;
  for (int j = 0; j < y.size(); ++j) {
    if (y(j) < -kFaceEps * t || y(j) > t * (1 + 1e-12)) {
      throw OutOfSimplex("multinomial_coefficient: point outside the closed simplex");
    }
    sum += y(j);
  }
  if (sum > t * (1 + 1e-12)) {
    throw OutOfSimplex("multinomial_coefficient: point outside the closed simplex");
  }

  const double* lgf = log_factorials(n + 1);
  const double u_last = std::max(1.0 - sum / t, 0.0);
  double log_x = -lgf[n - total];
  for (size_t j = 0; j < counts.size(); ++j) {
    const double u = std::max(y(static_cast<int>(j)), 0.0) / t;
    const int c = counts[j];
    log_x -= lgf[c];
    if (c > 0) {
      if (u <= 0.0) return 0.0;
      log_x += c * std::log(u);
    }
  }
  if (n - total > 0) {
    if (u_last <= 0.0) return 0.0;
    log_x += (n - total) * std::log(u_last);
  }
  return std::exp(log_x);
}

std::vector<Matrix> joint_density_batch(const LocalTimeModel& model, double t,
                                        const std::vector<Vector>& ys, double series_tol) {
  return series_evaluate(model, t, ys, series_tol, SeriesRequest{}, nullptr);
}

Matrix joint_density_matrix(const LocalTimeModel& model, double t, const Vector& y,
                            double series_tol) {
  return series_evaluate(model, t, {y}, series_tol, SeriesRequest{}, nullptr).front();
}

JointDensityEval joint_density(const LocalTimeModel& model, int k, int l, double t,
                               const Vector& y, double series_tol) {
  const int N = model.states();
  if (k < 0 || k >= N || l < 0 || l >= N) throw InvalidInput("joint_density: bad state");
  double trunc = 0;
  Matrix m = series_evaluate(model, t, {y}, series_tol, SeriesRequest{}, &trunc).front();
  JointDensityEval e;
  e.t = t;
  e.k = k;
  e.l = l;
  e.y = y;
  e.value = m(k, l);
  e.truncation_error = trunc;
  return e;
}

double centered_density(const LocalTimeModel& model, int k, int l, double t,
                        const Vector& y) {
  return joint_density(model, k, l, t, Vector(y + model.m_prime() * t)).value;
}

std::vector<Matrix> centered_density_batch(const LocalTimeModel& model, double t,
                                           const std::vector<Vector>& ys,
                                           double series_tol) {
  std::vector<Vector> shifted(ys.size());
  const Vector offset = model.m_prime() * t;
  for (size_t i = 0; i < ys.size(); ++i) shifted[i] = ys[i] + offset;
  return joint_density_batch(model, t, shifted, series_tol);
}

double density_gradient(const LocalTimeModel& model, int k, int l, double t,
                        const Vector& y, int j, double series_tol) {
  const int N = model.states();
  if (k < 0 || k >= N || l < 0 || l >= N) throw InvalidInput("density_gradient: bad state");
  if (j < 0 || j >= N - 1) throw InvalidInput("density_gradient: bad direction");
  SeriesRequest req;
  req.gradient = true;
  req.direction = j;
  Matrix m = series_evaluate(model, t, {y}, series_tol, req, nullptr).front();
  return m(k, l);
}

std::vector<Matrix> density_gradient_batch(const LocalTimeModel& model, double t,
                                           const std::vector<Vector>& ys, int j,
                                           double series_tol) {
  if (j < 0 || j >= model.states() - 1) throw InvalidInput("density_gradient: bad direction");
  SeriesRequest req;
  req.gradient = true;
  req.direction = j;
  return series_evaluate(model, t, ys, series_tol, req, nullptr);
}

// ---------------------------------------------------------------------------
// Singular mass
// ---------------------------------------------------------------------------

SingularMass singular_mass(const LocalTimeModel& model, double t) {
  if (t <= 0) throw InvalidInput("singular_mass: t must be positive");
  const int N = model.states();
  const Matrix& g = model.generator().entries();

  // e^{t G_{S^c S^c}} embedded back into N x N for every unvisited set S
  auto avoid_exp = [&](unsigned mask) {
    std::vector<int> keep;
    for (int i = 0; i < N; ++i)
      if (!(mask & (1u << i))) keep.push_back(i);
    Matrix sub(keep.size(), keep.size());
    for (size_t r = 0; r < keep.size(); ++r)
      for (size_t c = 0; c < keep.size(); ++c)
        sub(static_cast<int>(r), static_cast<int>(c)) = g(keep[r], keep[c]);
    const Matrix e = matrix_exponential(sub, t);
    Matrix full = Matrix::Zero(N, N);
    for (size_t r = 0; r < keep.size(); ++r)
      for (size_t c = 0; c < keep.size(); ++c)
        full(keep[r], keep[c]) = e(static_cast<int>(r), static_cast<int>(c));
    return full;
  };

  SingularMass out;
  out.face.resize(static_cast<size_t>(N));
  for (int i = 0; i < N; ++i) out.face[static_cast<size_t>(i)] = avoid_exp(1u << i);

  out.total = Matrix::Zero(N, N);
  const unsigned full_mask = (1u << N) - 1u;
  for (unsigned mask = 1; mask < full_mask; ++mask) {
    const int bits = __builtin_popcount(mask);
    const double sign = (bits % 2 == 1) ? 1.0 : -1.0;
    if (bits == 1) {
      out.total += sign * out.face[static_cast<size_t>(__builtin_ctz(mask))];
    } else {
      out.total += sign * avoid_exp(mask);
    }
  }

  Matrix face_sum = Matrix::Zero(N, N);
  for (const auto& f : out.face) face_sum += f;
  out.face_bound_norm0 = norm0(face_sum);
  out.total_norm0 = norm0(out.total);
  return out;
}

// ---------------------------------------------------------------------------
// Fourier transform of the a.c. part (Filon-type quadrature)
// ---------------------------------------------------------------------------

namespace {

struct FilonWeights {
  Complex e0;  // integral of e^{i z s} over [0,h]
  Complex e1;  // integral of s e^{i z s} over [0,h]
};

FilonWeights filon_cell(double z, double h) {
  const double zh = z * h;
  FilonWeights w;
  if (std::abs(zh) < 1e-4) {
    // series in zh to avoid cancellation
    const Complex i(0, 1);
    w.e0 = h * (1.0 + i * zh / 2.0 - zh * zh / 6.0 - i * zh * zh * zh / 24.0);
    w.e1 = h * h * (0.5 + i * zh / 3.0 - zh * zh / 8.0 - i * zh * zh * zh / 30.0);
    return w;
  }
  const Complex iz(0, z);
  const Complex eizh = std::exp(Complex(0, zh));
  w.e0 = (eizh - 1.0) / iz;
  w.e1 = h * eizh / iz - (eizh - 1.0) / (iz * iz);
  return w;
}

// integral over [0, len] of the linear interpolant of f against e^{i z y}
CMatrix filon_line(const std::vector<Matrix>& f, double len, double z) {
  const int cells = static_cast<int>(f.size()) - 1;
  const double h = len / cells;
  const int n = static_cast<int>(f.front().rows());
  const FilonWeights w = filon_cell(z, h);
  CMatrix acc = CMatrix::Zero(n, n);
  for (int c = 0; c < cells; ++c) {
    const Complex phase = std::exp(Complex(0, z * c * h));
    const Matrix& a = f[static_cast<size_t>(c)];
    const Matrix slope = (f[static_cast<size_t>(c) + 1] - a) / h;
    acc += phase * (w.e0 * a.cast<Complex>() + w.e1 * slope.cast<Complex>());
  }
  return acc;
}

CMatrix filon_line_c(const std::vector<CMatrix>& f, double len, double z) {
  const int cells = static_cast<int>(f.size()) - 1;
  const double h = len / cells;
  const int n = static_cast<int>(f.front().rows());
  const FilonWeights w = filon_cell(z, h);
  CMatrix acc = CMatrix::Zero(n, n);
  for (int c = 0; c < cells; ++c) {
    const Complex phase = std::exp(Complex(0, z * c * h));
    const CMatrix& a = f[static_cast<size_t>(c)];
    const CMatrix slope = (f[static_cast<size_t>(c) + 1] - a) / h;
    acc += phase * (w.e0 * a + w.e1 * slope);
  }
  return acc;
}

CMatrix ac_transform_at_resolution(const LocalTimeModel& model, double t,
                                   const Vector& zeta, int res) {
  const int d = model.states() - 1;
  if (d == 1) {
    std::vector<Vector> pts(static_cast<size_t>(res) + 1);
    for (int i = 0; i <= res; ++i) pts[static_cast<size_t>(i)] = Vector::Constant(1, t * i / res);
    const auto vals = joint_density_batch(model, t, pts);
    return filon_line(vals, t, zeta(0));
  }
  if (d == 2) {
    // iterated: inner Filon along y2 on [0, t - y1], outer Filon along y1
    std::vector<Vector> pts;
    std::vector<int> inner_count(static_cast<size_t>(res) + 1);
    for (int i = 0; i <= res; ++i) {
      const double y1 = t * i / res;
      const double len = t - y1;
      const int m = std::max(4, static_cast<int>(std::ceil(res * len / t)));
      inner_count[static_cast<size_t>(i)] = m;
      for (int q = 0; q <= m; ++q) {
        pts.push_back((Vector(2) << y1, len * q / m).finished());
      }
    }
    const auto vals = joint_density_batch(model, t, pts);
    std::vector<CMatrix> outer(static_cast<size_t>(res) + 1);
    size_t cursor = 0;
    for (int i = 0; i <= res; ++i) {
      const double y1 = t * i / res;
      const double len = t - y1;
      const int m = inner_count[static_cast<size_t>(i)];
      std::vector<Matrix> line(vals.begin() + static_cast<long>(cursor),
                               vals.begin() + static_cast<long>(cursor) + m + 1);
      cursor += static_cast<size_t>(m) + 1;
      outer[static_cast<size_t>(i)] = (len > 0)
                                          ? filon_line(line, len, zeta(1))
                                          : CMatrix::Zero(model.states(), model.states());
    }
    return filon_line_c(outer, t, zeta(0));
  }
  throw InvalidInput("fourier_ac_transform: dimension must be 1 or 2");
}

}  // namespace

CMatrix fourier_ac_transform(const LocalTimeModel& model, double t, const Vector& zeta,
                             int resolution) {
  if (static_cast<int>(zeta.size()) != model.states() - 1) {
    throw InvalidInput("fourier_ac_transform: frequency dimension mismatch");
  }
  CMatrix coarse = ac_transform_at_resolution(model, t, zeta, resolution);
  CMatrix fine = ac_transform_at_resolution(model, t, zeta, 2 * resolution);
  auto tol = [](const CMatrix& m) { return std::max(1e-4, 1e-2 * norm0(m)); };
  const double diff = norm0(CMatrix(fine - coarse));
  if (diff > tol(fine)) {
    CMatrix finer = ac_transform_at_resolution(model, t, zeta, 4 * resolution);
    const double diff2 = norm0(CMatrix(finer - fine));
    if (diff2 > tol(finer)) {
      throw AccuracyError("fourier_ac_transform: quadrature did not stabilize", diff2);
    }
    return finer;
  }
  return fine;
}

double fourier_tail_gamma(const LocalTimeModel& model, double t0, const Vector& zeta,
                          int t_grid_points, int base_resolution) {
  if (t0 <= 0) throw InvalidInput("fourier_tail_gamma: t0 must be positive");
  if (t_grid_points < 1) throw InvalidInput("fourier_tail_gamma: empty t grid");
  double sup = 0;
  for (int i = 0; i < t_grid_points; ++i) {
    const double t = t0 * (1.0 + static_cast<double>(i) / t_grid_points);
    sup = std::max(sup, norm0(fourier_ac_transform(model, t, zeta, base_resolution)));
  }
  return sup;
}

// ---------------------------------------------------------------------------
// Hyperplane projection
// ---------------------------------------------------------------------------

Vector project_map(const Vector& y) {
  if (y.size() < 2) throw InvalidInput("project_map: need dimension >= 2");
  const double s = y.sum();
  if (std::abs(s) > 1e-10 + 1e-13 * y.cwiseAbs().sum()) {
    throw NotInHyperplane("project_map: coordinates do not sum to zero");
  }
  return y.head(y.size() - 1);
}

Vector unproject_map(const Vector& y_prime) {
  Vector y(y_prime.size() + 1);
  y.head(y_prime.size()) = y_prime;
  y(y_prime.size()) = -y_prime.sum();
  return y;
}

void export_density_slice_csv(const LocalTimeModel& model, int k, int l, double t,
                              const std::vector<Vector>& ys, std::ostream& os) {
  const int N = model.states();
  if (k < 0 || k >= N || l < 0 || l >= N) throw InvalidInput("export slice: bad state");
  const int d = N - 1;
  for (int j = 0; j < d; ++j) os << "y" << j << ",";
  os << "value\n";
  const auto vals = joint_density_batch(model, t, ys);
  char buf[40];
  for (size_t i = 0; i < ys.size(); ++i) {
    for (int j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.12g,", ys[i](j));
      os << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.12g", vals[i](k, l));
    os << buf << "\n";
  }
}

}  // namespace lltlab
