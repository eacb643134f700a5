#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "textiq/common.hpp"

namespace textiq {

// Grayscale raster with intensities in [0,1], row-major.
struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  RasterImage() = default;
  RasterImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {
    require(w >= 1 && h >= 1, "image dimensions must be positive");
  }

  float at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
  float& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
  size_t size() const { return pixels.size(); }

  bool same_dims(const RasterImage& other) const {
    return width == other.width && height == other.height;
  }
};

struct Box {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool inside(int image_w, int image_h) const {
    return x >= 0 && y >= 0 && w >= 1 && h >= 1 && x + w <= image_w && y + h <= image_h;
  }
};

struct TextRegion {
  Box box;
  std::string transcription;            // over the 37-class alphabet
  std::optional<double> label;          // quality in [0,1] when known
};

struct ManifestEntry {
  std::string image_path;               // relative to the manifest file
  int image_width = 0;                  // filled during validation
  int image_height = 0;
  std::vector<TextRegion> regions;
};

struct DatasetManifest {
  std::filesystem::path base_dir;       // directory the image paths resolve against
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const ManifestEntry& e) const { return base_dir / e.image_path; }
};

// ---- image file I/O ----------------------------------------------------

// 8-bit PGM (P5) or PNG by extension; color PNG collapses to the channel mean.
RasterImage load_image(const std::filesystem::path& path);
void save_image(const RasterImage& image, const std::filesystem::path& path);

RasterImage load_pgm(const std::filesystem::path& path);
void save_pgm(const RasterImage& image, const std::filesystem::path& path);
RasterImage load_png(const std::filesystem::path& path);
void save_png(const RasterImage& image, const std::filesystem::path& path);

// ---- manifest ----------------------------------------------------------

// One JSON record per line:
//   {"image": <relpath>, "regions": [{"box":[x,y,w,h], "text": <string>, "label": <float|null>}]}
// Every referenced image is opened and every region checked against its bounds.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// ---- region geometry ---------------------------------------------------

inline constexpr int kAssessHeight = 32;
inline constexpr int kAssessWidth = 128;

// Verbatim pixel copy of the region box.
RasterImage crop_region(const RasterImage& image, const TextRegion& region);
RasterImage crop_box(const RasterImage& image, const Box& box);

// Fit a cropped text region onto the fixed 32x128 assessment canvas without
// rescaling. Undersized inputs are centered on a canvas filled with the
// second-lowest of the four corner values plus clamped Gaussian noise;
// oversized dimensions are cropped at a seeded random offset.
RasterImage resize_for_assessment(const RasterImage& region_image, std::uint64_t rng_seed,
                                  double noise_sigma = 0.02);

}  // namespace textiq
