#include <benchmark/benchmark.h>

#include <random>

#include "svldl/data.hpp"
#include "svldl/distributions.hpp"
#include "svldl/kernels.hpp"
#include "svldl/losses.hpp"
#include "svldl/training.hpp"

using namespace svldl;

namespace {

std::vector<double> random_probs(std::mt19937_64& rng, int K) {
  std::normal_distribution<double> n(0, 2);
  std::vector<double> logits(static_cast<std::size_t>(K));
  for (double& z : logits) z = n(rng);
  return softmax(logits);
}

void BM_CandidateDivergencesSerial(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto p = random_probs(rng, 100);
  const auto cands = make_candidate_set(0.01, 10, 0.01, true);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::serial::candidate_divergences(42.3, cands.values(), p));
  }
}

void BM_CandidateDivergencesOmp(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto p = random_probs(rng, 100);
  const auto cands = make_candidate_set(0.01, 10, 0.01, true);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::omp::candidate_divergences(42.3, cands.values(), p));
  }
}

template <bool Parallel>
void BM_FuseLayers(benchmark::State& state) {
  const std::size_t L = 13, T = static_cast<std::size_t>(state.range(0)), C = 256;
  std::mt19937_64 rng(2);
  std::normal_distribution<float> n(0, 1);
  std::vector<float> feats(L * T * C);
  for (float& v : feats) v = n(rng);
  std::vector<double> w(L, 1.0 / L);
  std::vector<double> out(T * C);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::omp::fuse_layers(feats, L, T, C, w, out);
    } else {
      kernels::serial::fuse_layers(feats, L, T, C, w, out);
    }
    benchmark::ClobberMemory();
  }
}

template <bool Parallel>
void BM_ValleyCounts(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::vector<LabelDistribution> dists;
  for (int i = 0; i < 512; ++i) dists.emplace_back(random_probs(rng, 100));
  for (auto _ : state) {
    if constexpr (Parallel) {
      benchmark::DoNotOptimize(kernels::omp::valley_counts(dists, 2.0));
    } else {
      benchmark::DoNotOptimize(kernels::serial::valley_counts(dists, 2.0));
    }
  }
}

void BM_BatchGradient(benchmark::State& state) {
  const auto backend = state.range(0) ? Backend::parallel : Backend::serial;
  const auto samples = synth_generate({64, 100, 4, 150, 32, 0.05, 1});
  const auto params = ModelParameters::initialize({100, 4, 32, 128}, 1);
  const auto cands = make_candidate_set(0.1, 10, 0.1, true);
  HybridOptions options;
  options.backend = backend;
  for (auto _ : state) {
    benchmark::DoNotOptimize(batch_gradient(samples, params, cands, LossWeights{}, options));
  }
}

}  // namespace

BENCHMARK(BM_CandidateDivergencesSerial);
BENCHMARK(BM_CandidateDivergencesOmp);
BENCHMARK(BM_FuseLayers<false>)->Arg(150)->Arg(1000);
BENCHMARK(BM_FuseLayers<true>)->Arg(150)->Arg(1000);
BENCHMARK(BM_ValleyCounts<false>);
BENCHMARK(BM_ValleyCounts<true>);
BENCHMARK(BM_BatchGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
