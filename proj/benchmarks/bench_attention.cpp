// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <cmath>

#include "streamrecon/gating.hpp"
#include "streamrecon/numerics.hpp"

namespace {

sr::Matrix random_matrix(sr::Rng& rng, std::size_t rows, std::size_t cols) {
  sr::Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-1.0, 1.0);
  return m;
}

// Queries are one frame of tokens; keys are a memory snapshot of S slots.
void BM_Attention(benchmark::State& state) {
  const auto s = static_cast<std::size_t>(state.range(0));
  sr::Rng rng(1);
  const auto q = random_matrix(rng, 64, 64);
  const auto k = random_matrix(rng, s, 64);
  const auto v = random_matrix(rng, s, 64);
  for (auto _ : state) benchmark::DoNotOptimize(sr::attention(q, k, v, 0.125));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s));
}
BENCHMARK(BM_Attention)->RangeMultiplier(4)->Range(64, 4096);

void BM_FuseAndGate(benchmark::State& state) {
  const auto s = static_cast<std::size_t>(state.range(0));
  sr::Rng rng(2);
  const auto q = random_matrix(rng, 64, 64);
  const auto k = random_matrix(rng, s, 64);
  const auto v = random_matrix(rng, s, 64);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sr::fuse_and_gate(q, k, v, sr::kDefaultGateThreshold, 0.125));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s));
}
BENCHMARK(BM_FuseAndGate)->RangeMultiplier(4)->Range(64, 4096);

}  // namespace
