#include <benchmark/benchmark.h>

#include "textiq/stiqa.hpp"

using namespace textiq;

namespace {

RasterImage random_region(std::uint64_t seed) {
  Rng rng(seed);
  RasterImage img(kAssessWidth, kAssessHeight);
  for (float& v : img.pixels) v = static_cast<float>(rng.uniform());
  return img;
}

void BM_Assess(benchmark::State& state) {
  StiqaConfig config;
  config.variant = static_cast<StiqaVariant>(state.range(0));
  static thread_local std::unique_ptr<StiqaModel> model;
  model = std::make_unique<StiqaModel>(config);
  const RasterImage region = random_region(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model->assess(region).value);
  }
}
BENCHMARK(BM_Assess)->Arg(0)->Arg(1)->Arg(2);

void BM_TrainStep(benchmark::State& state) {
  StiqaConfig config;
  config.epochs = 1;
  config.batch_size = static_cast<int>(state.range(0));
  std::vector<LabeledRegion> data;
  for (int i = 0; i < config.batch_size + 2; ++i) {
    data.push_back(LabeledRegion{random_region(static_cast<std::uint64_t>(i) + 2),
                                 (i % 2) ? 0.8 : 0.2});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_stiqa(config, data));
  }
}
BENCHMARK(BM_TrainStep)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace
