#include "lltlab/chain.hpp"

#include <cmath>
#include <numeric>
#include <queue>

#include "lltlab/errors.hpp"

namespace lltlab {

namespace {

constexpr double kEntryNoise = 1e-13;  // roundoff negatives tolerated, clamped

void require_square(const Matrix& m, const char* what) {
  if (m.rows() == 0 || m.rows() != m.cols()) {
    throw InvalidInput(std::string(what) + ": matrix must be square and non-empty");
  }
  if (!m.allFinite()) {
    throw InvalidInput(std::string(what) + ": non-finite entries");
  }
}

std::vector<std::vector<int>> positive_adjacency(const Matrix& m) {
  const int n = static_cast<int>(m.rows());
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j ? m(i, j) > 0.0 : false) adj[i].push_back(j);
  return adj;
}

void dfs_reach(const std::vector<std::vector<int>>& adj, int s, std::vector<char>& seen) {
  std::vector<int> stack{s};
  seen[s] = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
  }
}

}  // namespace

StochasticMatrix::StochasticMatrix(Matrix p) : p_(std::move(p)) {
  require_square(p_, "StochasticMatrix");
  const int n = size();
  for (int i = 0; i < n; ++i) {
    double row = 0;
    for (int j = 0; j < n; ++j) {
      double v = p_(i, j);
      if (v < -kEntryNoise || v > 1.0 + kRowSumTol) {
        throw InvalidInput("StochasticMatrix: entry outside [0,1]");
      }
      if (v < 0.0) p_(i, j) = v = 0.0;
      row += v;
    }
    if (std::abs(row - 1.0) > kRowSumTol) {
      throw InvalidInput("StochasticMatrix: row sum deviates from 1 beyond 1e-12");
    }
  }
}

GeneratorMatrix::GeneratorMatrix(Matrix g) : g_(std::move(g)) {
  require_square(g_, "GeneratorMatrix");
  const int n = size();
  for (int i = 0; i < n; ++i) {
    double row = 0;
    for (int j = 0; j < n; ++j) {
      double v = g_(i, j);
      if (i != j) {
        if (v < -kEntryNoise) {
          throw InvalidInput("GeneratorMatrix: negative off-diagonal entry");
        }
        if (v < 0.0) g_(i, j) = v = 0.0;
      }
      row += v;
    }
    if (std::abs(row) > kRowSumTol) {
      throw InvalidInput("GeneratorMatrix: row sum deviates from 0 beyond 1e-12");
    }
  }
}

double GeneratorMatrix::max_exit_rate() const {
  return g_.diagonal().cwiseAbs().maxCoeff();
}

ProbabilityVector::ProbabilityVector(Vector w) : w_(std::move(w)) {
  if (w_.size() == 0 || !w_.allFinite()) {
    throw InvalidInput("ProbabilityVector: empty or non-finite");
  }
  double s = 0;
  for (int i = 0; i < w_.size(); ++i) {
    if (w_(i) < -kEntryNoise) throw InvalidInput("ProbabilityVector: negative weight");
    if (w_(i) < 0.0) w_(i) = 0.0;
    s += w_(i);
  }
  if (std::abs(s - 1.0) > kSumTol) {
    throw InvalidInput("ProbabilityVector: weights do not sum to 1 within 1e-12");
  }
}

bool is_irreducible(const Matrix& nonneg) {
  const int n = static_cast<int>(nonneg.rows());
  if (n == 1) return true;
  const auto adj = positive_adjacency(nonneg);
  std::vector<std::vector<int>> radj(n);
  for (int u = 0; u < n; ++u)
    for (int v : adj[u]) radj[v].push_back(u);
  std::vector<char> fwd(n, 0), bwd(n, 0);
  dfs_reach(adj, 0, fwd);
  dfs_reach(radj, 0, bwd);
  for (int i = 0; i < n; ++i)
    if (!fwd[i] || !bwd[i]) return false;
  return true;
}

bool is_irreducible_aperiodic(const StochasticMatrix& p) {
  const Matrix& m = p.entries();
  const int n = p.size();
  // self-loops count as cycles of length 1
  for (int i = 0; i < n; ++i)
    if (m(i, i) > 0.0 && n == 1) return true;
  if (!is_irreducible(m)) return false;
  if (n == 1) return true;
  // BFS levels from node 0; the period is the gcd over edges (u,v) of
  // |level(u) + 1 - level(v)|, including self-loops.
  std::vector<int> level(n, -1);
  std::queue<int> q;
  level[0] = 0;
  q.push(0);
  std::vector<std::pair<int, int>> edges;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v = 0; v < n; ++v) {
      if (m(u, v) <= 0.0) continue;
      edges.emplace_back(u, v);
      if (level[v] < 0) {
        level[v] = level[u] + 1;
        q.push(v);
      }
    }
  }
  int g = 0;
  for (auto [u, v] : edges) g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
  return g == 1;
}

namespace {
ProbabilityVector solve_stationary(const Matrix& lhs_t, const char* what) {
  // lhs_t is P^T - I (or G^T); replace the last row by the normalization.
  const int n = static_cast<int>(lhs_t.rows());
  Matrix a = lhs_t;
  a.row(n - 1).setOnes();
  Vector b = Vector::Zero(n);
  b(n - 1) = 1.0;
  Vector pi = a.partialPivLu().solve(b);
  if (!pi.allFinite()) throw NumericalError(std::string(what) + ": singular solve");
  // roundoff cleanup before validation
  for (int i = 0; i < n; ++i)
    if (pi(i) < 0 && pi(i) > -1e-12) pi(i) = 0.0;
  const double s = pi.sum();
  if (std::abs(s - 1.0) > 1e-9 || pi.minCoeff() < -1e-12) {
    throw NumericalError(std::string(what) + ": stationary solve failed validation");
  }
  return ProbabilityVector(pi / s);
}
}  // namespace

ProbabilityVector stationary_distribution(const StochasticMatrix& p) {
  if (!is_irreducible(p.entries())) {
    throw NotIrreducible("stationary_distribution: reducible chain");
  }
  if (p.size() == 1) return ProbabilityVector(Vector::Ones(1));
  Matrix a = p.entries().transpose();
  a.diagonal().array() -= 1.0;
  return solve_stationary(a, "stationary_distribution");
}

ProbabilityVector stationary_distribution(const GeneratorMatrix& g) {
  if (!is_irreducible(g.entries())) {
    throw NotIrreducible("stationary_distribution: reducible generator");
  }
  if (g.size() == 1) return ProbabilityVector(Vector::Ones(1));
  return solve_stationary(Matrix(g.entries().transpose()), "stationary_distribution");
}

SubGenerator subgenerator(const GeneratorMatrix& g, int i) {
  const int n = g.size();
  if (n < 2) throw Degenerate("subgenerator: need at least two states");
  if (i < 0 || i >= n) throw InvalidInput("subgenerator: state index out of range");
  SubGenerator s;
  s.excluded_state = i;
  s.entries.resize(n - 1, n - 1);
  for (int r = 0, rr = 0; r < n; ++r) {
    if (r == i) continue;
    for (int c = 0, cc = 0; c < n; ++c) {
      if (c == i) continue;
      s.entries(rr, cc++) = g(r, c);
    }
    ++rr;
  }
  s.pf_eigenvalue = max_real_eigenvalue(s.entries);
  s.irreducible = is_irreducible(s.entries);
  return s;
}

double perron_root(const Matrix& nonneg) {
  if (nonneg.minCoeff() < -kEntryNoise) {
    throw InvalidInput("perron_root: negative entries");
  }
  return spectral_radius(nonneg);
}

}  // namespace lltlab
