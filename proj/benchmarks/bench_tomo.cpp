#include "slim/tomo.hpp"

#include <benchmark/benchmark.h>

using namespace slim;

namespace {

void BM_BuildProjector2d(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto geom = ProjectionGeometry::parallel_2d(angle_range(-60, 3, 40));
  for (auto _ : state) benchmark::DoNotOptimize(build_projector(geom, n)->n_rows());
}
BENCHMARK(BM_BuildProjector2d)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_BuildProjector3d(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto geom = ProjectionGeometry::parallel_3d(random_directions(8, 1));
  for (auto _ : state) benchmark::DoNotOptimize(build_projector(geom, n)->n_rows());
}
BENCHMARK(BM_BuildProjector3d)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_ProjectorApply(benchmark::State& state) {
  auto op = build_projector(ProjectionGeometry::parallel_2d(angle_range(-60, 3, 40)), 64);
  const Vector x = shepp_logan(2, 64).voxels;
  for (auto _ : state) benchmark::DoNotOptimize(op->apply(x).data());
}
BENCHMARK(BM_ProjectorApply)->Unit(benchmark::kMicrosecond);

void BM_SheppLogan(benchmark::State& state) {
  const auto dims = static_cast<std::size_t>(state.range(0));
  const std::size_t n = dims == 2 ? 256 : 64;
  for (auto _ : state) benchmark::DoNotOptimize(shepp_logan(dims, n).voxels.data());
}
BENCHMARK(BM_SheppLogan)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

}  // namespace
