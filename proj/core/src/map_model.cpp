#include "lltlab/map_model.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "lltlab/errors.hpp"

namespace lltlab {

MarpModel::MarpModel(Matrix d0, Matrix d1)
    : d0_(std::move(d0)),
      d1_(std::move(d1)),
      // validates rows of D0+D1 summing to 0 and off-diagonal signs
      embedded_([&] {
        if (d0_.rows() != d0_.cols() || d1_.rows() != d1_.cols() ||
            d0_.rows() != d1_.rows() || d0_.rows() == 0) {
          throw InvalidModel("MarpModel: D0, D1 must be square and same size");
        }
        if (!d0_.allFinite() || !d1_.allFinite()) {
          throw InvalidModel("MarpModel: non-finite entries");
        }
        const int n = static_cast<int>(d0_.rows());
        for (int i = 0; i < n; ++i) {
          if (d0_(i, i) >= 0) throw InvalidModel("MarpModel: D0 diagonal must be < 0");
          for (int j = 0; j < n; ++j) {
            if (i != j && d0_(i, j) < -1e-13)
              throw InvalidModel("MarpModel: D0 off-diagonal must be >= 0");
            if (d1_(i, j) < -1e-13) throw InvalidModel("MarpModel: D1 must be >= 0");
          }
        }
        GeneratorMatrix background(d0_ + d1_);  // throws if rows don't sum to 0
        if (!is_irreducible(background.entries())) {
          throw InvalidModel("MarpModel: D0 + D1 must be irreducible");
        }
        if (max_real_eigenvalue(d0_) >= -1e-12) {
          throw InvalidModel("MarpModel: D0 must be stable");
        }
        Eigen::PartialPivLU<Matrix> lu(-d0_);
        Matrix p = lu.solve(d1_);
        return StochasticMatrix(std::move(p));
      }()),
      phi_(stationary_distribution(embedded_)),
      mean_increment_([&] {
        Vector mk = (-d0_).partialPivLu().solve(Vector::Ones(d0_.rows()));
        return phi_.weights().dot(mk);
      }()) {}

LocalTimeModel::LocalTimeModel(GeneratorMatrix g, double a)
    : g_(std::move(g)),
      a_(a),
      p_tilde_(Matrix(Matrix::Identity(g_.size(), g_.size()) + g_.entries() / a_)),
      pi_(stationary_distribution(g_)) {
  const int n = g_.size();
  if (n < 2) throw InvalidModel("LocalTimeModel: need at least two states");
  subs_.reserve(static_cast<size_t>(n));
  rhos_.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    subs_.push_back(subgenerator(g_, i));
    // principal submatrix of the uniformized chain
    Matrix sub(n - 1, n - 1);
    for (int r = 0, rr = 0; r < n; ++r) {
      if (r == i) continue;
      for (int c = 0, cc = 0; c < n; ++c) {
        if (c == i) continue;
        sub(rr, cc++) = p_tilde_(r, c);
      }
      ++rr;
    }
    rhos_.push_back(perron_root(sub));
  }
}

LocalTimeModel LocalTimeModel::uniformize(GeneratorMatrix g, std::optional<double> a) {
  const double max_rate = g.max_exit_rate();
  if (max_rate <= 0) throw InvalidModel("uniformize: generator has no activity");
  const double rate = a.value_or(1.2 * max_rate);
  if (rate <= max_rate) {
    throw InvalidRate("uniformize: rate must exceed max |G(j,j)| = " +
                      std::to_string(max_rate));
  }
  return LocalTimeModel(std::move(g), rate);
}

double LocalTimeModel::min_decay_rate() const {
  double r = std::numeric_limits<double>::infinity();
  for (const auto& s : subs_) r = std::min(r, s.decay_rate());
  return r;
}

double LocalTimeModel::max_rho() const {
  double r = 0;
  for (double v : rhos_) r = std::max(r, v);
  return r;
}

int additive_dimension(const MapModel& model) {
  return std::visit(
      [](const auto& m) -> int {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MarpModel>)
          return 1;
        else
          return m.states() - 1;
      },
      model);
}

int state_count(const MapModel& model) {
  return std::visit(
      [](const auto& m) -> int {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MarpModel>)
          return m.phases();
        else
          return m.states();
      },
      model);
}

bool discrete_time(const MapModel& model) {
  return std::holds_alternative<MarpModel>(model);
}

Vector centering(const MapModel& model) {
  return std::visit(
      [](const auto& m) -> Vector {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MarpModel>)
          return Vector::Constant(1, m.mean_increment());
        else
          return m.m_prime();
      },
      model);
}

StochasticMatrix one_step_matrix(const MapModel& model) {
  return std::visit(
      [](const auto& m) -> StochasticMatrix {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MarpModel>)
          return m.embedded();
        else
          return StochasticMatrix(matrix_exponential(m.generator().entries()));
      },
      model);
}

Matrix json_to_matrix(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw InvalidInput("expected a non-empty array of rows");
  const auto rows = j.size();
  const auto cols = j.front().size();
  Matrix m(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw InvalidInput("matrix rows must be arrays of equal length");
    }
    for (size_t c = 0; c < cols; ++c) m(static_cast<int>(r), static_cast<int>(c)) = j[r][c].get<double>();
  }
  return m;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

MapModel load_model(const nlohmann::json& j) {
  const std::string type = j.value("type", "");
  if (type == "marp") {
    return MarpModel(json_to_matrix(j.at("d0")), json_to_matrix(j.at("d1")));
  }
  if (type == "local_time") {
    GeneratorMatrix g(json_to_matrix(j.at("g")));
    std::optional<double> a;
    if (j.contains("a") && !j.at("a").is_null()) a = j.at("a").get<double>();
    return LocalTimeModel::uniformize(std::move(g), a);
  }
  throw InvalidInput("model type must be \"marp\" or \"local_time\"");
}

nlohmann::json model_to_json(const MapModel& model) {
  nlohmann::json j;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MarpModel>) {
          j["type"] = "marp";
          j["d0"] = matrix_to_json(m.d0());
          j["d1"] = matrix_to_json(m.d1());
        } else {
          j["type"] = "local_time";
          j["g"] = matrix_to_json(m.generator().entries());
          j["a"] = m.rate();
        }
      },
      model);
  return j;
}

}  // namespace lltlab
