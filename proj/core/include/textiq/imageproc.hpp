#pragma once

#include <vector>

#include "textiq/image.hpp"

namespace textiq {

// Binary pixel mask aligned to an image or region box.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(static_cast<size_t>(w) * h, 0) {}

  bool at(int x, int y) const { return bits[static_cast<size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { bits[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
  size_t count() const;
};

RasterImage gaussian_blur(const RasterImage& image, double sigma);

// Canny edges on [0,1] intensities; thresholds apply to Sobel magnitudes
// normalized by their maximum.
Mask canny_edges(const RasterImage& image, double low_threshold, double high_threshold,
                 double blur_sigma = 1.4);

Mask dilate3x3(const Mask& mask);
Mask erode3x3(const Mask& mask);
Mask dilate(const Mask& mask, int times);

// Morphological closing followed by filling of enclosed holes: the standard
// edge-map to character-body extraction.
Mask close_and_fill(const Mask& edges);

}  // namespace textiq
