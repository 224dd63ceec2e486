// Serial reference pooling against the sort-then-reduce kernel.

#include <benchmark/benchmark.h>

#include <random>

#include "bevkit/fvtm.hpp"
#include "bevkit/io.hpp"

namespace {

using namespace bevkit;

const LiftedPoints& rig_points() {
  static const LiftedPoints pts =
      geometric_lift(io::load_rig(BEVKIT_DATA_DIR "/reference_rig.json"), DepthBins{});
  return pts;
}

LiftedPoints random_points(std::size_t n, int channels) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> pos(-60, 60), w(0, 1);
  LiftedPoints pts(channels);
  std::vector<double> f(channels);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : f) v = w(rng);
    pts.push_back({pos(rng), pos(rng), 0.0}, f, w(rng));
  }
  return pts;
}

void BM_SplatNaiveRig(benchmark::State& state) {
  const auto spec = BevSpec::square(51.2, static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(splat_naive(rig_points(), spec));
  state.SetItemsProcessed(state.iterations() * rig_points().size());
}

void BM_SplatPooledRig(benchmark::State& state) {
  const auto spec = BevSpec::square(51.2, static_cast<int>(state.range(0)), 1);
  const int threads = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(splat_pooled(rig_points(), spec, threads));
  state.SetItemsProcessed(state.iterations() * rig_points().size());
}

void BM_SplatNaiveRandom(benchmark::State& state) {
  const auto pts = random_points(static_cast<std::size_t>(state.range(0)), 16);
  const auto spec = BevSpec::square(51.2, 128, 16);
  for (auto _ : state) benchmark::DoNotOptimize(splat_naive(pts, spec));
  state.SetItemsProcessed(state.iterations() * pts.size());
}

void BM_SplatPooledRandom(benchmark::State& state) {
  const auto pts = random_points(static_cast<std::size_t>(state.range(0)), 16);
  const auto spec = BevSpec::square(51.2, 128, 16);
  const int threads = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(splat_pooled(pts, spec, threads));
  state.SetItemsProcessed(state.iterations() * pts.size());
}

}  // namespace

BENCHMARK(BM_SplatNaiveRig)->Arg(128)->Arg(400)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SplatPooledRig)
    ->ArgsProduct({{128, 400}, {1, 4}})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SplatNaiveRandom)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SplatPooledRandom)
    ->ArgsProduct({{1 << 20}, {1, 4}})
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
