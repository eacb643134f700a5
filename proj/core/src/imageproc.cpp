#include "textiq/imageproc.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace textiq {

size_t Mask::count() const {
  return static_cast<size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

RasterImage gaussian_blur(const RasterImage& image, double sigma) {
  if (sigma <= 0.0) return image;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  const int w = image.width;
  const int h = image.height;
  std::vector<double> tmp(static_cast<size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = std::clamp(x + i, 0, w - 1);
        acc += kernel[i + radius] * image.at(xx, y);
      }
      tmp[static_cast<size_t>(y) * w + x] = acc;
    }
  }
  RasterImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, h - 1);
        acc += kernel[i + radius] * tmp[static_cast<size_t>(yy) * w + x];
      }
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

Mask canny_edges(const RasterImage& image, double low_threshold, double high_threshold,
                 double blur_sigma) {
  require(low_threshold <= high_threshold, "canny: low threshold exceeds high");
  const int w = image.width;
  const int h = image.height;
  const RasterImage smooth = gaussian_blur(image, blur_sigma);

  std::vector<double> gx(static_cast<size_t>(w) * h, 0.0);
  std::vector<double> gy(static_cast<size_t>(w) * h, 0.0);
  std::vector<double> mag(static_cast<size_t>(w) * h, 0.0);
  double max_mag = 0.0;
  auto px = [&](int x, int y) {
    return static_cast<double>(smooth.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
      const double sy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
      const size_t i = static_cast<size_t>(y) * w + x;
      gx[i] = sx;
      gy[i] = sy;
      mag[i] = std::hypot(sx, sy);
      max_mag = std::max(max_mag, mag[i]);
    }
  }
  if (max_mag == 0.0) return Mask(w, h);

  // Non-maximum suppression along the quantized gradient direction.
  std::vector<std::uint8_t> thin(static_cast<size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      if (mag[i] == 0.0) continue;
      const double angle = std::atan2(gy[i], gx[i]);
      const double deg = std::fmod(angle * 180.0 / M_PI + 180.0, 180.0);
      int dx = 1, dy = 0;
      if (deg >= 22.5 && deg < 67.5) {
        dx = 1;
        dy = 1;
      } else if (deg >= 67.5 && deg < 112.5) {
        dx = 0;
        dy = 1;
      } else if (deg >= 112.5 && deg < 157.5) {
        dx = -1;
        dy = 1;
      }
      auto m = [&](int xx, int yy) {
        if (xx < 0 || xx >= w || yy < 0 || yy >= h) return 0.0;
        return mag[static_cast<size_t>(yy) * w + xx];
      };
      if (mag[i] >= m(x + dx, y + dy) && mag[i] >= m(x - dx, y - dy)) {
        thin[i] = 1;
      }
    }
  }

  const double low = low_threshold * max_mag;
  const double high = high_threshold * max_mag;

  // Hysteresis: seed from strong pixels, grow through weak ones.
  Mask edges(w, h);
  std::deque<std::pair<int, int>> frontier;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      if (thin[i] && mag[i] >= high) {
        edges.set(x, y, true);
        frontier.emplace_back(x, y);
      }
    }
  }
  while (!frontier.empty()) {
    const auto [x, y] = frontier.front();
    frontier.pop_front();
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int xx = x + dx;
        const int yy = y + dy;
        if (xx < 0 || xx >= w || yy < 0 || yy >= h) continue;
        const size_t j = static_cast<size_t>(yy) * w + xx;
        if (!edges.at(xx, yy) && thin[j] && mag[j] >= low) {
          edges.set(xx, yy, true);
          frontier.emplace_back(xx, yy);
        }
      }
    }
  }
  return edges;
}

Mask dilate3x3(const Mask& mask) {
  Mask out(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      bool v = false;
      for (int dy = -1; dy <= 1 && !v; ++dy) {
        for (int dx = -1; dx <= 1 && !v; ++dx) {
          const int xx = x + dx;
          const int yy = y + dy;
          if (xx >= 0 && xx < mask.width && yy >= 0 && yy < mask.height && mask.at(xx, yy)) {
            v = true;
          }
        }
      }
      out.set(x, y, v);
    }
  }
  return out;
}

Mask erode3x3(const Mask& mask) {
  Mask out(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      bool v = true;
      for (int dy = -1; dy <= 1 && v; ++dy) {
        for (int dx = -1; dx <= 1 && v; ++dx) {
          const int xx = x + dx;
          const int yy = y + dy;
          // Pixels outside the box count as background.
          if (xx < 0 || xx >= mask.width || yy < 0 || yy >= mask.height || !mask.at(xx, yy)) {
            v = false;
          }
        }
      }
      out.set(x, y, v);
    }
  }
  return out;
}

Mask dilate(const Mask& mask, int times) {
  Mask out = mask;
  for (int i = 0; i < times; ++i) out = dilate3x3(out);
  return out;
}

Mask close_and_fill(const Mask& edges) {
  const Mask closed = erode3x3(dilate3x3(edges));

  // Flood the true background from the border; anything unreachable is a hole.
  const int w = closed.width;
  const int h = closed.height;
  Mask background(w, h);
  std::deque<std::pair<int, int>> frontier;
  auto seed = [&](int x, int y) {
    if (!closed.at(x, y) && !background.at(x, y)) {
      background.set(x, y, true);
      frontier.emplace_back(x, y);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  while (!frontier.empty()) {
    const auto [x, y] = frontier.front();
    frontier.pop_front();
    constexpr int dx[4] = {1, -1, 0, 0};
    constexpr int dy[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int xx = x + dx[k];
      const int yy = y + dy[k];
      if (xx >= 0 && xx < w && yy >= 0 && yy < h && !closed.at(xx, yy) && !background.at(xx, yy)) {
        background.set(xx, yy, true);
        frontier.emplace_back(xx, yy);
      }
    }
  }

  // Union of edges (pre-closing, so thin strokes stay) and everything enclosed.
  Mask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out.set(x, y, edges.at(x, y) || closed.at(x, y) || !background.at(x, y));
    }
  }
  return out;
}

}  // namespace textiq
