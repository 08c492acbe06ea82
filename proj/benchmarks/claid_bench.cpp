#include <benchmark/benchmark.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "claid/affinity_graph.hpp"
#include "claid/hier_decomposer.hpp"
#include "claid/ksums_bisect.hpp"
#include "claid/search_index.hpp"
#include "claid/synthetic.hpp"

using namespace claid;

namespace {

// One rendered image per grid shape, dim 768.
const synth::SynthImage& bench_image(std::uint32_t h, std::uint32_t w) {
  static std::map<std::pair<std::uint32_t, std::uint32_t>, synth::SynthImage> cache;
  const auto key = std::make_pair(h, w);
  auto it = cache.find(key);
  if (it == cache.end()) {
    synth::SynthParams p;
    p.grid_h = h;
    p.grid_w = w;
    p.dim = 768;
    const synth::World world(p);
    it = cache.emplace(key, world.render(synth::random_layout(p, 3, true), "bench", 5)).first;
  }
  return it->second;
}

std::vector<PatchIndex> all_patches(const FeatureGrid& g) {
  std::vector<PatchIndex> s(g.size());
  std::iota(s.begin(), s.end(), PatchIndex{0});
  return s;
}

void BM_AffinityDegrees(benchmark::State& state) {
  const auto& img = bench_image(static_cast<std::uint32_t>(state.range(0)),
                                static_cast<std::uint32_t>(state.range(1)));
  const auto subset = all_patches(img.grid);
  for (auto _ : state) benchmark::DoNotOptimize(affinity_degrees(img.grid, subset, {}));
  state.counters["patches"] = static_cast<double>(subset.size());
}
BENCHMARK(BM_AffinityDegrees)->Args({24, 32})->Args({45, 60})->Unit(benchmark::kMillisecond);

void BM_Bisect(benchmark::State& state) {
  const auto& img = bench_image(static_cast<std::uint32_t>(state.range(0)),
                                static_cast<std::uint32_t>(state.range(1)));
  const auto subset = all_patches(img.grid);
  const auto seeds = select_seeds(img.grid, subset, {}, false);
  for (auto _ : state) benchmark::DoNotOptimize(bisect(img.grid, subset, seeds, {}));
}
BENCHMARK(BM_Bisect)->Args({24, 32})->Args({45, 60})->Unit(benchmark::kMillisecond);

void BM_Decompose(benchmark::State& state) {
  const auto& img = bench_image(static_cast<std::uint32_t>(state.range(0)),
                                static_cast<std::uint32_t>(state.range(1)));
  std::size_t cuts = 0;
  for (auto _ : state) {
    const auto h = decompose(img.grid, {}, img.image_id);
    cuts = h.cut_count;
    benchmark::DoNotOptimize(h.emitted.data());
  }
  state.counters["cuts"] = static_cast<double>(cuts);
}
BENCHMARK(BM_Decompose)->Args({24, 32})->Args({45, 60})->Unit(benchmark::kMillisecond);

void BM_Search(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::uint32_t dim = 256;
  std::mt19937_64 gen(1);
  std::normal_distribution<float> nd(0.0F, 1.0F);
  DescriptorIndex index(dim);
  auto unit = [&] {
    std::vector<float> v(dim);
    float sq = 0.0F;
    for (float& x : v) {
      x = nd(gen);
      sq += x * x;
    }
    for (float& x : v) x /= std::sqrt(sq);
    return v;
  };
  for (std::size_t i = 0; i < rows; ++i) {
    if (i % 20 == 0) index.add_image("img" + std::to_string(i / 20));
    RegionDescriptor d;
    d.region_id = static_cast<std::uint32_t>(i % 20);
    d.vector = unit();
    index.add(static_cast<std::uint32_t>(i / 20), d);
  }
  const auto q = unit();
  for (auto _ : state) benchmark::DoNotOptimize(search(index, q, 100));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rows));
}
BENCHMARK(BM_Search)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
