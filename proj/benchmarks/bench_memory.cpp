// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "streamrecon/memory3d.hpp"

namespace {

// Long-term staging of n tokens followed by one prune + evict pass.
void BM_PruneEvict(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  sr::Rng rng(3);
  std::vector<sr::MemoryToken> tokens(n);
  for (std::size_t i = 0; i < n; ++i) {
    tokens[i].key.assign(64, rng.uniform());
    tokens[i].value.assign(64, rng.uniform());
    tokens[i].position = sr::Vec3(rng.uniform(-5, 5), rng.uniform(0, 3), rng.uniform(-5, 5));
    tokens[i].acc_weight = rng.uniform();
    tokens[i].token_id = i;
  }
  for (auto _ : state) {
    state.PauseTiming();
    sr::MemoryBank bank;
    bank.update_scene_voxel(0.1);
    bank.stage_long_term(tokens);
    state.ResumeTiming();
    bank.prune();
    bank.evict();
    benchmark::DoNotOptimize(bank.long_term_size());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_PruneEvict)->RangeMultiplier(4)->Range(256, 16384);

void BM_Snapshot(benchmark::State& state) {
  sr::MemoryBank bank;
  sr::Rng rng(4);
  for (std::int64_t f = 1; f <= 60; ++f) {
    bank.update_scene_voxel(0.05);
    sr::Matrix keys(64, 64), pos(64, 3);
    for (double& v : keys.data()) v = rng.uniform();
    for (double& v : pos.data()) v = rng.uniform(-5, 5);
    bank.insert_frame(keys, keys, pos, f);
  }
  for (auto _ : state) benchmark::DoNotOptimize(bank.snapshot());
  state.counters["slots"] = static_cast<double>(bank.total_tokens());
}
BENCHMARK(BM_Snapshot);

}  // namespace
