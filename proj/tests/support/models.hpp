#pragma once

// Bundled models shared by the unit and acceptance suites.

#include "lltlab/map_model.hpp"

namespace lltlab::testmodels {

// symmetric two-state jump process, unit rates; pi = (1/2, 1/2), Sigma = 1/4
inline LocalTimeModel lt2() {
  Matrix g(2, 2);
  g << -1, 1, 1, -1;
  return LocalTimeModel::uniformize(GeneratorMatrix(g));
}

inline LocalTimeModel lt2_rate(double a) {
  Matrix g(2, 2);
  g << -1, 1, 1, -1;
  return LocalTimeModel::uniformize(GeneratorMatrix(g), a);
}

// three-state jump process with every sub-generator irreducible
inline LocalTimeModel lt3() {
  Matrix g(3, 3);
  g << -1.0, 0.5, 0.5, 0.4, -0.9, 0.5, 0.6, 0.4, -1.0;
  return LocalTimeModel::uniformize(GeneratorMatrix(g));
}

// scalar arrival process: i.i.d. Exp(1) increments
inline MarpModel marp1() {
  Matrix d0(1, 1), d1(1, 1);
  d0 << -1;
  d1 << 1;
  return MarpModel(d0, d1);
}

// two-phase arrival process; embedded chain [[2/3,1/3],[1/3,2/3]], m = 1/2
inline MarpModel marp2() {
  Matrix d0(2, 2), d1(2, 2);
  d0 << -2, 1, 0, -3;
  d1 << 1, 0, 1, 2;
  return MarpModel(d0, d1);
}

}  // namespace lltlab::testmodels
