#include <benchmark/benchmark.h>

#include "histolime/lime.hpp"
#include "histolime/rng.hpp"
#include "histolime/superpixel.hpp"

namespace {

using namespace histolime;

Raster tile(int side) {
  SplitMix64 rng(17);
  Raster img(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const auto n = static_cast<std::uint8_t>(rng.below(40));
      const bool blob = (x - side / 2) * (x - side / 2) + (y - side / 3) * (y - side / 3) < side * side / 25;
      img.set(x, y, blob ? Rgb{static_cast<std::uint8_t>(200 + n / 4), 40, 60}
                         : Rgb{static_cast<std::uint8_t>(60 + n), 100, 170});
    }
  }
  return img;
}

std::unique_ptr<Classifier> red_toy(int side) {
  ModelManifest m;
  m.input_side = side;
  m.backend = ToySpec{Channel::R, 0.3, 10.0};
  return make_classifier(std::move(m));
}

void BM_RidgeSolve(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  PerturbationBatch b;
  b.masks = sample_masks(k, 5000, 1);
  for (int r = 0; r < b.masks.rows; ++r) {
    b.weights.push_back(proximity_weight(b.masks.row(r), 0.25));
    double y = 0.0;
    for (int j = 0; j < k; ++j) y += 0.01 * (j % 5) * b.masks.at(r, j);
    b.responses.push_back(y);
  }
  for (auto _ : state) benchmark::DoNotOptimize(fit_surrogate(b, 1.0));
}
BENCHMARK(BM_RidgeSolve)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_Segment(benchmark::State& state) {
  const Raster img = tile(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(segment(img, 50));
}
BENCHMARK(BM_Segment)->Arg(64)->Arg(224)->Unit(benchmark::kMillisecond);

void BM_ApplyMask(benchmark::State& state) {
  const Raster img = tile(224);
  const auto sp = segment(img, 50);
  const auto fill = baseline_colors(img, sp, Baseline::segment_mean());
  const auto masks = sample_masks(sp.k, 64, 3);
  int r = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(apply_mask(img, masks.row(r), sp, fill));
    r = (r + 1) % masks.rows;
  }
}
BENCHMARK(BM_ApplyMask)->Unit(benchmark::kMicrosecond);

void BM_Explain(benchmark::State& state) {
  const Raster img = tile(224);
  const auto clf = red_toy(224);
  LimeConfig cfg;
  cfg.n_samples = static_cast<int>(state.range(0));
  cfg.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(explain(*clf, img, cfg));
}
BENCHMARK(BM_Explain)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
