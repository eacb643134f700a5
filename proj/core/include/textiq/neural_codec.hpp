#pragma once

#include <filesystem>
#include <functional>
#include <memory>

#include "textiq/codec.hpp"
#include "textiq/nn.hpp"

namespace textiq {

struct NeuralCodecConfig {
  int latent_channels = 8;
  int cond_channels = 8;
  double distortion_weight = 150.0;
  double rate_weight = 1.0;
  double learning_rate = 1e-3;
  int epochs = 30;
  int batch_size = 4;
  int crop = 64;  // training crop edge, multiple of 8
  std::uint64_t seed = 1;

  void validate() const {
    require(latent_channels >= 1 && cond_channels >= 1, "channel counts must be positive");
    require(crop >= 16 && crop % 8 == 0, "training crop must be a positive multiple of 8");
    require(epochs >= 1 && batch_size >= 1, "epochs and batch size must be positive");
  }
};

// Conditional autoencoder: three downsampling stages, quality-map features
// injected through feature-wise affine (SFT) layers on both sides, a
// channel-wise gain on the latent driven by the local quality, and the shared
// range coder for the actual bitstream. The latent-resolution quality grid is
// transmitted so decoding is self-contained.
class NeuralCodec : public Codec {
 public:
  explicit NeuralCodec(NeuralCodecConfig config);
  ~NeuralCodec() override;
  NeuralCodec(NeuralCodec&&) noexcept;
  NeuralCodec& operator=(NeuralCodec&&) noexcept;

  CodecBackend backend() const override { return CodecBackend::kNeural; }
  CompressedBlob compress(const RasterImage& image, const QualityMap& qmap) const override;
  RasterImage decompress(const CompressedBlob& blob) const override;

  const NeuralCodecConfig& config() const;

  struct TrainStats {
    int epoch = 0;
    double loss = 0.0;
    double distortion = 0.0;
    double rate_bits_per_pixel = 0.0;
  };
  using Callback = std::function<void(const TrainStats&)>;

  // Random crops, random quality maps (constants, gradients, rectangles).
  // Throws on an empty corpus or non-finite loss.
  void train(const std::vector<RasterImage>& corpus, const Callback& callback = nullptr);

  void save(const std::filesystem::path& path) const;
  static NeuralCodec load(const std::filesystem::path& path);

  struct Net;  // implementation detail, exposed for white-box tests

 private:
  std::unique_ptr<Net> net_;
};

}  // namespace textiq
