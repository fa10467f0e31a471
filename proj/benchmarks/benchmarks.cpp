#include <benchmark/benchmark.h>

#include "gpbag/gpbag.hpp"

using namespace gpbag;

namespace {

Dataset sinc_rows(std::size_t n, std::uint64_t seed) {
  SincSpec spec;
  spec.n = n;
  return generate_sinc(spec, seed);
}

const KernelSpec& bound_rbf() {
  static const KernelSpec k = KernelSpec::rbf(1.0).bound_to(1);
  return k;
}

}  // namespace

static void BM_Gram(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Dataset data = sinc_rows(n, 1);
  for (auto _ : state) benchmark::DoNotOptimize(gram(bound_rbf(), data.X));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Gram)->RangeMultiplier(2)->Range(128, 1024)->Complexity(benchmark::oNSquared);

static void BM_FitExact(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Dataset data = sinc_rows(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(fit_exact(data, bound_rbf(), NoiseSpec{0.01, true}));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FitExact)->RangeMultiplier(2)->Range(128, 1024)->Complexity(benchmark::oNCubed);

static void BM_GramGradients(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Dataset data = sinc_rows(n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(gram_gradients(bound_rbf(), data.X));
}
BENCHMARK(BM_GramGradients)->RangeMultiplier(2)->Range(128, 512);

static void BM_EnsembleFit(benchmark::State& state) {
  const Dataset data = sinc_rows(4000, 4);
  EnsembleConfig config;
  config.estimators = 4;
  config.subset_size = static_cast<std::size_t>(state.range(0));
  config.seed = 9;
  OptimizerConfig opt;
  opt.restarts = 0;
  opt.max_iterations = 10;
  opt.grad_tolerance = 1e-12;  // pin the iteration count for comparable work
  for (auto _ : state)
    benchmark::DoNotOptimize(fit_ensemble(data, parse_kernel("rbf"), config, opt));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EnsembleFit)->RangeMultiplier(2)->Range(64, 512)->Complexity(benchmark::oNCubed);

static void BM_EnsemblePredict(benchmark::State& state) {
  const Dataset data = sinc_rows(4000, 5);
  EnsembleConfig config;
  config.estimators = 8;
  config.subset_size = 128;
  config.seed = 10;
  OptimizerConfig opt;
  opt.restarts = 0;
  opt.max_iterations = 10;
  const EnsembleModel model = fit_ensemble(data, parse_kernel("rbf"), config, opt);
  const Eigen::MatrixXd grid =
      Eigen::VectorXd::LinSpaced(state.range(0), -15.0, 15.0);
  for (auto _ : state) benchmark::DoNotOptimize(predict_ensemble(model, grid));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EnsemblePredict)->RangeMultiplier(4)->Range(256, 16384);

static void BM_Combine(benchmark::State& state) {
  auto rng = make_engine(6, 0);
  std::vector<Prediction> members(static_cast<std::size_t>(state.range(0)));
  for (auto& p : members) {
    p.mean = uniform_real(rng, -2.0, 2.0);
    p.variance = uniform_real(rng, 0.01, 1.0);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(combine_average(members));
    benchmark::DoNotOptimize(combine_poe(members));
  }
}
BENCHMARK(BM_Combine)->Arg(2)->Arg(30)->Arg(100);

BENCHMARK_MAIN();
