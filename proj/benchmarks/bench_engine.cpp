// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "streamrecon/engine.hpp"
#include "streamrecon/simulator.hpp"

namespace {

std::vector<sr::Image> frames(std::size_t n) {
  const auto scene = sr::make_scene(1);
  const auto traj = sr::make_trajectory(scene, sr::TrajectoryKind::kWalk, n, 1);
  const auto k = sr::make_intrinsics(64, 64);
  std::vector<sr::Image> out;
  for (const auto& p : traj.poses) out.push_back(sr::render_frame(scene, p, k, 64, 64).image);
  return out;
}

// Steady-state ingest at the default configuration, after a warm memory.
void BM_EngineIngest(benchmark::State& state) {
  const auto images = frames(64);
  sr::Engine engine(sr::EngineConfig{});
  for (std::size_t i = 0; i < 32; ++i) (void)engine.ingest(images[i]);
  std::size_t next = 32;
  for (auto _ : state) {
    benchmark::DoNotOptimize(engine.ingest(images[next]));
    next = next + 1 < images.size() ? next + 1 : 32;
  }
  state.counters["memory_tokens"] = static_cast<double>(engine.bank().total_tokens());
}
BENCHMARK(BM_EngineIngest)->Unit(benchmark::kMillisecond);

void BM_Render(benchmark::State& state) {
  const auto scene = sr::make_scene(2);
  const auto traj = sr::make_trajectory(scene, sr::TrajectoryKind::kOrbit, 8, 2);
  const auto k = sr::make_intrinsics(64, 64);
  for (auto _ : state) benchmark::DoNotOptimize(sr::render_frame(scene, traj.poses[3], k, 64, 64));
}
BENCHMARK(BM_Render)->Unit(benchmark::kMillisecond);

}  // namespace
