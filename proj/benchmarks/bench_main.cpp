#include <benchmark/benchmark.h>

#include <random>
#include <set>

#include "rectnet/detector.hpp"
#include "rectnet/layers.hpp"
#include "rectnet/lung_seg.hpp"
#include "rectnet/networks.hpp"
#include "rectnet/phantom.hpp"
#include "rectnet/sampler.hpp"

using namespace rectnet;

namespace {

void BM_Conv2d(benchmark::State& state) {
  const int channels = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  Conv2d<float> conv("c", channels, channels, 3);
  conv.init_he_uniform(rng);
  std::uniform_real_distribution<float> u(-1, 1);
  Tensor<float> x({static_cast<std::size_t>(channels), 48, 48});
  for (auto& v : x.data) v = u(rng);
  typename Conv2d<float>::Cache cache;
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, cache));
}
BENCHMARK(BM_Conv2d)->Arg(8)->Arg(32);

void BM_RectnetForward(benchmark::State& state) {
  const auto cfg = preset_config(ArchKind::rectnet, Preset::desk);
  auto net = make_network<float>(cfg, 3);
  const auto phantom = generate_phantom(random_phantom_spec(4));
  const auto& d = phantom.volume.dims();
  const Voxel center{static_cast<int>(d.nx / 2), static_cast<int>(d.ny / 2), static_cast<int>(d.nz / 2)};
  const auto stack = extract_stack(phantom.volume, center, cfg.k, cfg.patch_size, cfg.patch_size);
  for (auto _ : state) benchmark::DoNotOptimize(nodule_probability(*net, stack));
}
BENCHMARK(BM_RectnetForward)->Unit(benchmark::kMicrosecond);

void BM_GrowClusters(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> c(0, 40);
  ProbabilityMap map;
  std::set<GridPoint> used;
  while (used.size() < static_cast<std::size_t>(state.range(0))) used.insert({c(rng), c(rng), c(rng)});
  for (const auto& g : used) map.entries.push_back({g, Voxel{g.gx, g.gy, g.j}, 0.9});
  for (auto _ : state) benchmark::DoNotOptimize(grow_clusters(map));
}
BENCHMARK(BM_GrowClusters)->Arg(500)->Arg(2000);

void BM_SegmentLungs(benchmark::State& state) {
  const auto phantom = generate_phantom(random_phantom_spec(5));
  for (auto _ : state) benchmark::DoNotOptimize(segment_lungs(phantom.volume));
}
BENCHMARK(BM_SegmentLungs)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
