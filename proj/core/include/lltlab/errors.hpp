#pragma once

#include <stdexcept>
#include <string>

namespace lltlab {

/// Base class of every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidModel : public Error {
 public:
  using Error::Error;
};

class NotIrreducible : public Error {
 public:
  using Error::Error;
};

class Degenerate : public Error {
 public:
  using Error::Error;
};

class InvalidRate : public Error {
 public:
  using Error::Error;
};

class OutOfSimplex : public Error {
 public:
  using Error::Error;
};

class NotInHyperplane : public Error {
 public:
  using Error::Error;
};

class PerturbationRegimeExceeded : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class DegenerateCovariance : public Error {
 public:
  using Error::Error;
};

class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Quadrature or series evaluation did not reach the requested tolerance.
class AccuracyError : public Error {
 public:
  AccuracyError(const std::string& what, double achieved)
      : Error(what + " (achieved tolerance " + std::to_string(achieved) + ")"),
        achieved_(achieved) {}
  double achieved_tolerance() const { return achieved_; }

 private:
  double achieved_;
};

/// The requested grid does not capture enough mass of the density.
class GridTooSmall : public Error {
 public:
  GridTooSmall(const std::string& what, double suggested_y_max)
      : Error(what + " (suggested y_max " + std::to_string(suggested_y_max) + ")"),
        suggested_y_max_(suggested_y_max) {}
  double suggested_y_max() const { return suggested_y_max_; }

 private:
  double suggested_y_max_;
};

/// A dynamic-programming table would exceed the memory budget.
class BudgetExceeded : public Error {
 public:
  BudgetExceeded(const std::string& what, int max_feasible_steps)
      : Error(what + " (max feasible n_steps " + std::to_string(max_feasible_steps) + ")"),
        max_feasible_steps_(max_feasible_steps) {}
  int max_feasible_steps() const { return max_feasible_steps_; }

 private:
  int max_feasible_steps_;
};

}  // namespace lltlab
