#include <benchmark/benchmark.h>

#include "textiq/codec.hpp"
#include "textiq/neural_codec.hpp"
#include "textiq/synthetic.hpp"

using namespace textiq;

namespace {

const RasterImage& scene_image() {
  static const RasterImage image = [] {
    Rng rng(8);
    SceneOptions options;
    return generate_scene(rng, options).image;
  }();
  return image;
}

void BM_DctCompress(benchmark::State& state) {
  const DeterministicCodec codec;
  const RasterImage& img = scene_image();
  const QualityMap qmap =
      QualityMap::constant(img.width, img.height, static_cast<float>(state.range(0)) / 10.0f);
  for (auto _ : state) {
    benchmark::DoNotOptimize(codec.compress(img, qmap));
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) * img.size());
}
BENCHMARK(BM_DctCompress)->Arg(2)->Arg(5)->Arg(10);

void BM_DctRoundTrip(benchmark::State& state) {
  const DeterministicCodec codec;
  const RasterImage& img = scene_image();
  const QualityMap qmap = QualityMap::constant(img.width, img.height, 0.5f);
  for (auto _ : state) {
    benchmark::DoNotOptimize(codec.decompress(codec.compress(img, qmap)));
  }
}
BENCHMARK(BM_DctRoundTrip);

void BM_NeuralCompress(benchmark::State& state) {
  const NeuralCodecConfig config;
  static const NeuralCodec codec(config);
  const RasterImage& img = scene_image();
  const QualityMap qmap = QualityMap::constant(img.width, img.height, 0.5f);
  for (auto _ : state) {
    benchmark::DoNotOptimize(codec.compress(img, qmap));
  }
}
BENCHMARK(BM_NeuralCompress);

}  // namespace

BENCHMARK_MAIN();
