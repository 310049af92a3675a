#include <benchmark/benchmark.h>

#include <random>

#include "ivprobe/interventions.hpp"
#include "ivprobe/synthetic.hpp"

using namespace ivprobe;

namespace {

Matrix gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = g(rng);
  return m;
}

void BM_AmnesicProject(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  RepresentationMatrix x(gaussian(500, d, 1));
  const auto b = random_basis(d, k, 2);
  for (auto _ : state) benchmark::DoNotOptimize(amnesic_project(x, b));
  state.SetItemsProcessed(state.iterations() * 500);
}
BENCHMARK(BM_AmnesicProject)->Args({256, 10})->Args({1024, 20})->Args({1024, 200});

void BM_ExtendBasis(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto b = random_basis(d, static_cast<std::size_t>(state.range(1)), 3);
  const Matrix candidates = gaussian(6, d, 4);
  for (auto _ : state) benchmark::DoNotOptimize(extend_basis(b, candidates));
}
BENCHMARK(BM_ExtendBasis)->Args({1024, 1})->Args({1024, 100})->Args({1024, 500});

void BM_TrainProbe(benchmark::State& state) {
  SyntheticSpec spec;
  spec.n_examples = 2000;
  spec.ambient_dim = static_cast<std::size_t>(state.range(0));
  spec.redundancy = 1;
  const auto ds = generate(spec);
  const auto y = ds.labels.feature(Feature::Relation);
  ProbeConfig cfg;
  cfg.epochs = 10;
  for (auto _ : state) benchmark::DoNotOptimize(train_probe(ds.representations, y, cfg));
}
BENCHMARK(BM_TrainProbe)->Arg(64)->Arg(1024)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
