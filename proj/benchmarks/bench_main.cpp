#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "stackcast/ensemble.hpp"
#include "stackcast/gbdt/binning.hpp"
#include "stackcast/gbdt/booster.hpp"
#include "stackcast/gbdt/histogram.hpp"
#include "stackcast/gbdt/tree.hpp"
#include "stackcast/lstm.hpp"
#include "stackcast/random.hpp"

using namespace stackcast;

namespace {

Matrix random_features(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

std::vector<double> random_targets(const Matrix& x, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> y(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) y[i] = x(i, 0) * x(i, 1) + std::sin(x(i, 2)) + 0.1 * rng.normal();
  return y;
}

void BM_BuildHistograms(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto binned = gbdt::bin_features(random_features(rows, 32, 1), 256);
  Rng rng(2);
  std::vector<double> g(rows), h(rows, 1.0), w(rows, 1.0);
  for (double& v : g) v = rng.normal();
  std::vector<std::uint32_t> idx(rows);
  std::iota(idx.begin(), idx.end(), 0u);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gbdt::build_histograms(binned.columns, g, h, w, idx));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows * 32));
}
BENCHMARK(BM_BuildHistograms)->Arg(1 << 10)->Arg(1 << 14);

void BM_FitGbdt(benchmark::State& state) {
  const auto x = random_features(2000, 20, 3);
  const auto y = random_targets(x, 4);
  gbdt::BoostConfig config = state.range(0) == 0 ? ensemble::BaseConfigs::default_leafwise()
                                                 : ensemble::BaseConfigs::default_oblivious();
  config.n_iterations = 20;
  for (auto _ : state) benchmark::DoNotOptimize(gbdt::fit_gbdt(x, y, config));
}
BENCHMARK(BM_FitGbdt)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_GbdtPredict(benchmark::State& state) {
  const auto x = random_features(2000, 20, 5);
  gbdt::BoostConfig config = ensemble::BaseConfigs::default_leafwise();
  const auto model = gbdt::fit_gbdt(x, random_targets(x, 6), config);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(x));
  state.SetItemsProcessed(state.iterations() * 2000);
}
BENCHMARK(BM_GbdtPredict)->Unit(benchmark::kMicrosecond);

void BM_LstmForward(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const auto params = lstm::init_params(5, hidden, 1, 1, 7);
  const auto seq = random_features(20, 5, 8);
  for (auto _ : state) benchmark::DoNotOptimize(lstm::lstm_forward(params, seq));
}
BENCHMARK(BM_LstmForward)->Arg(8)->Arg(32);

void BM_LstmForwardBackward(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const auto params = lstm::init_params(5, hidden, 1, 1, 9);
  const auto seq = random_features(20, 5, 10);
  const Matrix target(1, 1, {0.3});
  for (auto _ : state) benchmark::DoNotOptimize(lstm::sequence_loss_gradient(params, seq, target));
}
BENCHMARK(BM_LstmForwardBackward)->Arg(8)->Arg(32);

}  // namespace

BENCHMARK_MAIN();
