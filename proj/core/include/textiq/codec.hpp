#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "textiq/image.hpp"

namespace textiq {

// Per-pixel rate/quality control signal in [0,1], aligned to the target image.
struct QualityMap {
  int width = 0;
  int height = 0;
  std::vector<float> weights;

  QualityMap() = default;
  QualityMap(int w, int h, float fill = 0.0f)
      : width(w), height(h), weights(static_cast<size_t>(w) * h, fill) {
    require(w >= 1 && h >= 1, "quality map dimensions must be positive");
  }

  static QualityMap constant(int w, int h, float value) { return QualityMap(w, h, value); }

  float at(int x, int y) const { return weights[static_cast<size_t>(y) * width + x]; }
  float& at(int x, int y) { return weights[static_cast<size_t>(y) * width + x]; }

  void validate() const {
    for (float w : weights) {
      require(w >= 0.0f && w <= 1.0f, "quality map weight outside [0,1]");
    }
  }
};

enum class CodecBackend : std::uint8_t {
  kDeterministic = 0,
  kNeural = 1,
};

struct CompressedBlob {
  CodecBackend backend = CodecBackend::kDeterministic;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> payload;

  std::uint64_t bit_count() const { return static_cast<std::uint64_t>(payload.size()) * 8; }
  double bpp() const {
    return static_cast<double>(bit_count()) / (static_cast<double>(width) * height);
  }
};

struct CompressionResult {
  RasterImage reconstruction;
  double bpp = 0.0;
  std::vector<double> per_region_psnr;
};

class Codec {
 public:
  virtual ~Codec() = default;
  virtual CodecBackend backend() const = 0;
  virtual CompressedBlob compress(const RasterImage& image, const QualityMap& qmap) const = 0;
  virtual RasterImage decompress(const CompressedBlob& blob) const = 0;
};

// Spatially varying block-transform codec: 8x8 DCT blocks, the block's mean
// quality picks a rung on a geometric quantization-step ladder, quantized
// coefficients go through an adaptive range coder.
struct DctCodecParams {
  double step_max = 0.8;    // coarsest quantization step (quality 0)
  double step_ratio = 32.0; // step(0) / step(1)
  int ladder_rungs = 33;    // quality is discretized onto this many steps
};

class DeterministicCodec : public Codec {
 public:
  explicit DeterministicCodec(DctCodecParams params = {});
  CodecBackend backend() const override { return CodecBackend::kDeterministic; }
  CompressedBlob compress(const RasterImage& image, const QualityMap& qmap) const override;
  RasterImage decompress(const CompressedBlob& blob) const override;

  double step_for_rung(int rung) const;
  int rung_for_quality(double q) const;

 private:
  DctCodecParams params_;
};

// Compress + decompress + PSNR per region crop against the original.
CompressionResult roundtrip(const Codec& codec, const RasterImage& image, const QualityMap& qmap,
                            const std::vector<TextRegion>& regions = {});

// ---- container + quality-map files -------------------------------------
// Blob layout: "TIQB", version byte, backend id byte, u32 width, u32 height,
// u32 payload length, payload (all integers little-endian).

std::vector<std::uint8_t> serialize_blob(const CompressedBlob& blob);
CompressedBlob parse_blob(const std::uint8_t* data, size_t size);
void save_blob(const CompressedBlob& blob, const std::filesystem::path& path);
CompressedBlob load_blob(const std::filesystem::path& path);

// PGM/PNG (weight = intensity) or the ".qmap" float sidecar:
// "TIQQ", u32 width, u32 height, f32[width*height] little-endian.
QualityMap load_quality_map(const std::filesystem::path& path);
void save_quality_map(const QualityMap& qmap, const std::filesystem::path& path);

}  // namespace textiq
