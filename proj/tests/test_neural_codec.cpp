#include <doctest.h>

#include <filesystem>

#include "textiq/metrics.hpp"
#include "textiq/neural_codec.hpp"
#include "textiq/synthetic.hpp"

using namespace textiq;

namespace {

NeuralCodecConfig tiny_config() {
  NeuralCodecConfig config;
  config.crop = 32;
  config.epochs = 2;
  config.batch_size = 2;
  config.seed = 3;
  return config;
}

std::vector<RasterImage> tiny_corpus(size_t n) {
  std::vector<RasterImage> corpus;
  Rng rng(50);
  for (size_t i = 0; i < n; ++i) {
    SceneOptions options;
    Rng scene_rng = rng.fork(i);
    corpus.push_back(generate_scene(scene_rng, options).image);
  }
  return corpus;
}

}  // namespace

TEST_SUITE("neural_codec") {
  TEST_CASE("untrained model round-trips shape-correctly, odd dims included") {
    const NeuralCodec codec(tiny_config());
    Rng rng(1);
    for (auto [w, h] : {std::pair{64, 48}, std::pair{37, 21}, std::pair{8, 8}}) {
      RasterImage img(w, h);
      for (float& v : img.pixels) v = static_cast<float>(rng.uniform());
      const QualityMap qmap = QualityMap::constant(w, h, 0.5f);
      const CompressedBlob blob = codec.compress(img, qmap);
      CHECK(blob.backend == CodecBackend::kNeural);
      const RasterImage recon = codec.decompress(blob);
      CHECK(recon.width == w);
      CHECK(recon.height == h);
      for (float v : recon.pixels) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }
    }
  }

  TEST_CASE("compression is deterministic given weights") {
    const NeuralCodec codec(tiny_config());
    Rng rng(2);
    RasterImage img(40, 40);
    for (float& v : img.pixels) v = static_cast<float>(rng.uniform());
    const QualityMap qmap = QualityMap::constant(40, 40, 0.8f);
    const CompressedBlob a = codec.compress(img, qmap);
    const CompressedBlob b = codec.compress(img, qmap);
    CHECK(a.payload == b.payload);
    CHECK(codec.decompress(a).pixels == codec.decompress(b).pixels);
  }

  TEST_CASE("quality gain drives bits up with the map even untrained") {
    const NeuralCodec codec(tiny_config());
    Rng rng(3);
    RasterImage img(64, 64);
    for (float& v : img.pixels) v = static_cast<float>(rng.uniform());
    const CompressedBlob low = codec.compress(img, QualityMap::constant(64, 64, 0.1f));
    const CompressedBlob high = codec.compress(img, QualityMap::constant(64, 64, 1.0f));
    CHECK(high.bit_count() > low.bit_count());
  }

  TEST_CASE("training smoke: 2 images, 2 epochs, finite loss") {
    NeuralCodec codec(tiny_config());
    std::vector<double> losses;
    codec.train(tiny_corpus(2), [&](const NeuralCodec::TrainStats& s) {
      losses.push_back(s.loss);
    });
    REQUIRE(losses.size() == 2);
    for (double l : losses) CHECK(std::isfinite(l));
    CHECK_THROWS_AS(codec.train({}), InvalidArgument);
  }

  TEST_CASE("save/load round-trips the bitstream") {
    const auto dir = std::filesystem::temp_directory_path() / "textiq_nc_tests";
    std::filesystem::create_directories(dir);
    NeuralCodec codec(tiny_config());
    codec.train(tiny_corpus(2));
    codec.save(dir / "nc.tiqn");
    const NeuralCodec back = NeuralCodec::load(dir / "nc.tiqn");

    Rng rng(4);
    RasterImage img(48, 32);
    for (float& v : img.pixels) v = static_cast<float>(rng.uniform());
    const QualityMap qmap = QualityMap::constant(48, 32, 0.6f);
    const CompressedBlob a = codec.compress(img, qmap);
    const CompressedBlob b = back.compress(img, qmap);
    CHECK(a.payload == b.payload);
    CHECK(codec.decompress(a).pixels == back.decompress(b).pixels);
  }

  TEST_CASE("brief training orders rate and distortion by quality") {
    NeuralCodecConfig config;
    config.crop = 32;
    config.epochs = 20;
    config.batch_size = 4;
    config.seed = 11;
    NeuralCodec codec(config);
    codec.train(tiny_corpus(6));

    const auto held_out = tiny_corpus(9);
    double psnr_low = 0.0, psnr_high = 0.0;
    std::uint64_t bits_low = 0, bits_high = 0;
    for (size_t i = 6; i < held_out.size(); ++i) {
      const RasterImage& img = held_out[i];
      const QualityMap lo = QualityMap::constant(img.width, img.height, 0.1f);
      const QualityMap hi = QualityMap::constant(img.width, img.height, 1.0f);
      const CompressedBlob blob_lo = codec.compress(img, lo);
      const CompressedBlob blob_hi = codec.compress(img, hi);
      bits_low += blob_lo.bit_count();
      bits_high += blob_hi.bit_count();
      psnr_low += psnr(img, codec.decompress(blob_lo));
      psnr_high += psnr(img, codec.decompress(blob_hi));
    }
    CHECK(bits_high > bits_low);
    CHECK(psnr_high > psnr_low);
  }
}
