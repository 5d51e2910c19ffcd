#include <benchmark/benchmark.h>

#include "lltlab/fourier.hpp"
#include "lltlab/local_times.hpp"
#include "lltlab/marp.hpp"
#include "lltlab/montecarlo.hpp"
#include "lltlab/rng.hpp"
#include "support/models.hpp"

using namespace lltlab;

static void BM_PhiloxThroughput(benchmark::State& state) {
  PhiloxRng rng(7, 0);
  std::uint64_t acc = 0;
  for (auto _ : state) acc ^= rng.next_u64();
  benchmark::DoNotOptimize(acc);
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PhiloxThroughput);

static void BM_MatrixExponential(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  Matrix g = Matrix::Constant(n, n, 0.5);
  g.diagonal().array() = -0.5 * (n - 1);
  for (auto _ : state) benchmark::DoNotOptimize(matrix_exponential(g, 1.7));
}
BENCHMARK(BM_MatrixExponential)->Arg(2)->Arg(4)->Arg(8)->Arg(16);

static void BM_JointDensityBatch(benchmark::State& state) {
  const LocalTimeModel model = testmodels::lt2();
  const double t = static_cast<double>(state.range(0));
  std::vector<Vector> pts;
  for (int i = 1; i < 128; ++i) pts.push_back(Vector::Constant(1, t * i / 128.0));
  for (auto _ : state) benchmark::DoNotOptimize(joint_density_batch(model, t, pts));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(pts.size()));
}
BENCHMARK(BM_JointDensityBatch)->Arg(10)->Arg(40)->Arg(160);

static void BM_JointDensity3State(benchmark::State& state) {
  const LocalTimeModel model = testmodels::lt3();
  const double t = static_cast<double>(state.range(0));
  std::vector<Vector> pts;
  for (int i = 1; i < 12; ++i) {
    for (int j = 1; i + j < 14; ++j) {
      pts.push_back((Vector(2) << t * i / 14.0, t * j / 14.0).finished());
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(joint_density_batch(model, t, pts));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(pts.size()));
}
BENCHMARK(BM_JointDensity3State)->Arg(5)->Arg(10);

static void BM_FourierMatrixLocalTime(benchmark::State& state) {
  const MapModel model = testmodels::lt3();
  const Vector z = (Vector(2) << 0.7, -1.1).finished();
  for (auto _ : state) benchmark::DoNotOptimize(fourier_matrix(model, 3.5, z));
}
BENCHMARK(BM_FourierMatrixLocalTime);

static void BM_FftInversion(benchmark::State& state) {
  const MarpModel model = testmodels::marp2();
  const GridSpec grid{40.0, 4097};
  for (auto _ : state) {
    benchmark::DoNotOptimize(invert_density_fft(model, static_cast<int>(state.range(0)), grid));
  }
}
BENCHMARK(BM_FftInversion)->Arg(8)->Arg(40);

static void BM_ConvolutionStep(benchmark::State& state) {
  const MarpModel model = testmodels::marp2();
  const GridSpec grid{18.0, static_cast<int>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(convolve_density(model, 3, grid, 1e-2));
}
BENCHMARK(BM_ConvolutionStep)->Arg(1025)->Arg(4097);

static void BM_PathSimulation(benchmark::State& state) {
  const MapModel model = testmodels::lt2();
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_paths(model, 0, 100.0, state.range(0), 5));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PathSimulation)->Arg(1000);

BENCHMARK_MAIN();
