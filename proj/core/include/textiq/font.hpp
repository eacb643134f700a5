#pragma once

#include <string>

#include "textiq/image.hpp"
#include "textiq/imageproc.hpp"

namespace textiq {

// 5x7 bitmap glyphs for the 37-class alphabet, scaled by integer replication.

inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;
inline constexpr int kGlyphAdvance = 6;  // 1 column of spacing

struct TextRender {
  RasterImage image;  // ink on paper
  Mask coverage;      // exact ink pixels
};

int text_render_width(const std::string& text, int scale, int margin);
int text_render_height(int scale, int margin);

// Renders normalized text. `ink` and `paper` are intensities in [0,1].
TextRender render_text(const std::string& text, int scale, float ink, float paper, int margin);

}  // namespace textiq
