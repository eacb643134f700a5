#include <benchmark/benchmark.h>

#include "textiq/labels.hpp"
#include "textiq/metrics.hpp"

using namespace textiq;

namespace {

RasterImage random_image(std::uint64_t seed, int w, int h) {
  Rng rng(seed);
  RasterImage img(w, h);
  for (float& v : img.pixels) v = static_cast<float>(rng.uniform());
  return img;
}

void BM_Ssim(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const RasterImage a = random_image(1, n, n);
  const RasterImage b = random_image(2, n, n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ssim(a, b));
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) * n * n);
}
BENCHMARK(BM_Ssim)->Arg(64)->Arg(192)->Arg(512);

void BM_Psnr(benchmark::State& state) {
  const RasterImage a = random_image(3, 192, 128);
  const RasterImage b = random_image(4, 192, 128);
  for (auto _ : state) {
    benchmark::DoNotOptimize(psnr(a, b));
  }
}
BENCHMARK(BM_Psnr);

void BM_Levenshtein(benchmark::State& state) {
  Rng rng(5);
  std::string a, b;
  for (int i = 0; i < state.range(0); ++i) {
    a.push_back(char_class_symbol(static_cast<int>(rng.uniform_index(36))));
    b.push_back(char_class_symbol(static_cast<int>(rng.uniform_index(36))));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(levenshtein(a, b));
  }
}
BENCHMARK(BM_Levenshtein)->Arg(8)->Arg(64)->Arg(512);

}  // namespace
