#include "textiq/font.hpp"

#include <array>

namespace textiq {

namespace {

// Row-per-string 5x7 glyph masks, '#' = ink. Indexed by character class.
using GlyphRows = std::array<const char*, 7>;

const std::array<GlyphRows, kNumCharClasses>& glyph_table() {
  static const std::array<GlyphRows, kNumCharClasses> glyphs = {{
      // a
      {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"},
      // b
      {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."},
      // c
      {".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."},
      // d
      {"####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."},
      // e
      {"#####", "#....", "#....", "####.", "#....", "#....", "#####"},
      // f
      {"#####", "#....", "#....", "####.", "#....", "#....", "#...."},
      // g
      {".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".###."},
      // h
      {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"},
      // i
      {".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."},
      // j
      {"..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."},
      // k
      {"#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"},
      // l
      {"#....", "#....", "#....", "#....", "#....", "#....", "#####"},
      // m
      {"#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"},
      // n
      {"#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"},
      // o
      {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."},
      // p
      {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."},
      // q
      {".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"},
      // r
      {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"},
      // s
      {".####", "#....", "#....", ".###.", "....#", "....#", "####."},
      // t
      {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."},
      // u
      {"#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."},
      // v
      {"#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."},
      // w
      {"#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"},
      // x
      {"#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"},
      // y
      {"#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."},
      // z
      {"#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"},
      // 0
      {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."},
      // 1
      {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."},
      // 2
      {".###.", "#...#", "....#", "..##.", ".#...", "#....", "#####"},
      // 3
      {".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."},
      // 4
      {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."},
      // 5
      {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."},
      // 6
      {".###.", "#....", "#....", "####.", "#...#", "#...#", ".###."},
      // 7
      {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."},
      // 8
      {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."},
      // 9
      {".###.", "#...#", "#...#", ".####", "....#", "....#", ".###."},
      // space
      {".....", ".....", ".....", ".....", ".....", ".....", "....."},
  }};
  return glyphs;
}

}  // namespace

int text_render_width(const std::string& text, int scale, int margin) {
  const int cols =
      text.empty() ? 1 : static_cast<int>(text.size()) * kGlyphAdvance - 1;
  return cols * scale + 2 * margin;
}

int text_render_height(int scale, int margin) { return kGlyphHeight * scale + 2 * margin; }

TextRender render_text(const std::string& text, int scale, float ink, float paper, int margin) {
  require(scale >= 1, "glyph scale must be positive");
  const std::string normalized = normalize_transcription(text);
  const int w = text_render_width(normalized, scale, margin);
  const int h = text_render_height(scale, margin);

  TextRender out;
  out.image = RasterImage(w, h, paper);
  out.coverage = Mask(w, h);

  const auto& glyphs = glyph_table();
  for (size_t ci = 0; ci < normalized.size(); ++ci) {
    const int cls = char_class_index(normalized[ci]);
    const auto& rows = glyphs[static_cast<size_t>(cls)];
    const int gx = margin + static_cast<int>(ci) * kGlyphAdvance * scale;
    for (int ry = 0; ry < kGlyphHeight; ++ry) {
      for (int rx = 0; rx < kGlyphWidth; ++rx) {
        if (rows[ry][rx] != '#') continue;
        for (int sy = 0; sy < scale; ++sy) {
          for (int sx = 0; sx < scale; ++sx) {
            const int px = gx + rx * scale + sx;
            const int py = margin + ry * scale + sy;
            out.image.at(px, py) = ink;
            out.coverage.set(px, py, true);
          }
        }
      }
    }
  }
  return out;
}

}  // namespace textiq
