#include "textiq/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "textiq/codec.hpp"
#include "textiq/font.hpp"
#include "textiq/labels.hpp"

namespace textiq {

namespace {

const std::vector<std::string>& word_list() {
  static const std::vector<std::string> words = {
      "stop",  "exit",   "open",  "sale",   "cafe",  "park",  "hotel", "north",
      "south", "east",   "west",  "food",   "gas",   "shop",  "bank",  "taxi",
      "bus",   "rail",   "air",   "mall",   "book",  "milk",  "fresh", "daily",
      "news",  "pizza",  "sushi", "bread",  "water", "beer",  "wine",  "tea",
      "89",    "route 6", "no 42", "call us", "24h",  "free",  "menu",  "kids",
  };
  return words;
}

std::string random_text(Rng& rng) {
  if (rng.uniform() < 0.7) {
    return word_list()[rng.uniform_index(word_list().size())];
  }
  const int len = rng.uniform_int(3, 8);
  std::string s;
  for (int i = 0; i < len; ++i) {
    s.push_back(char_class_symbol(static_cast<int>(rng.uniform_index(36))));
  }
  return s;
}

RasterImage render_background(Rng& rng, int w, int h) {
  const double base = rng.uniform(0.45, 0.8);
  const double gx = rng.uniform(-0.25, 0.25);
  const double gy = rng.uniform(-0.25, 0.25);
  struct Blob {
    double cx, cy, r, amp;
  };
  std::vector<Blob> blobs;
  const int n_blobs = rng.uniform_int(1, 4);
  for (int i = 0; i < n_blobs; ++i) {
    blobs.push_back({rng.uniform(0, w), rng.uniform(0, h), rng.uniform(w / 8.0, w / 2.0),
                     rng.uniform(-0.2, 0.2)});
  }
  RasterImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = base + gx * (static_cast<double>(x) / w - 0.5) +
                 gy * (static_cast<double>(y) / h - 0.5);
      for (const auto& b : blobs) {
        const double d2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
        v += b.amp * std::exp(-d2 / (2.0 * b.r * b.r));
      }
      img.at(x, y) = static_cast<float>(clamp01(v + rng.normal(0.0, 0.01)));
    }
  }
  return img;
}

bool overlaps(const Box& a, const Box& b, int gap) {
  return a.x < b.x + b.w + gap && b.x < a.x + a.w + gap && a.y < b.y + b.h + gap &&
         b.y < a.y + a.h + gap;
}

}  // namespace

SyntheticScene generate_scene(Rng& rng, const SceneOptions& options) {
  require(options.width >= 64 && options.height >= 48, "scene too small");
  SyntheticScene scene;
  scene.severity = options.severity;
  scene.image = render_background(rng, options.width, options.height);

  const int target_regions = rng.uniform_int(options.min_regions, options.max_regions);
  for (int r = 0; r < target_regions; ++r) {
    // Cap the word length so the render fits the scene at this scale.
    const int scale = rng.uniform_int(2, 3);
    std::string text = random_text(rng);
    const int max_cols = (options.width - 8) / (kGlyphAdvance * scale);
    if (static_cast<int>(text.size()) > max_cols) {
      text = text.substr(0, static_cast<size_t>(std::max(1, max_cols)));
    }
    text = normalize_transcription(text);
    if (text.empty()) continue;

    const int margin = 2 * scale;
    const int rw = text_render_width(text, scale, margin);
    const int rh = text_render_height(scale, margin);
    if (rw >= options.width || rh >= options.height) continue;

    Box box{};
    bool placed = false;
    for (int attempt = 0; attempt < 25 && !placed; ++attempt) {
      box = Box{rng.uniform_int(0, options.width - rw - 1),
                rng.uniform_int(0, options.height - rh - 1), rw, rh};
      placed = std::none_of(scene.regions.begin(), scene.regions.end(),
                            [&](const TextRegion& existing) {
                              return overlaps(existing.box, box, 3);
                            });
    }
    if (!placed) continue;

    // Pick ink against the local background so the text has contrast.
    double local = 0.0;
    for (int y = 0; y < box.h; ++y) {
      for (int x = 0; x < box.w; ++x) {
        local += scene.image.at(box.x + x, box.y + y);
      }
    }
    local /= static_cast<double>(box.w) * box.h;
    const bool dark_ink = local > 0.45;
    const float ink = static_cast<float>(dark_ink ? rng.uniform(0.02, 0.2)
                                                  : rng.uniform(0.8, 0.98));
    const float paper = static_cast<float>(dark_ink ? rng.uniform(0.75, 0.95)
                                                    : rng.uniform(0.05, 0.25));

    const TextRender render = render_text(text, scale, ink, paper, margin);
    for (int y = 0; y < box.h; ++y) {
      for (int x = 0; x < box.w; ++x) {
        scene.image.at(box.x + x, box.y + y) = render.image.at(x, y);
      }
    }
    scene.regions.push_back(TextRegion{box, text, std::nullopt});
    scene.glyph_coverage.push_back(render.coverage);
  }
  return scene;
}

RasterImage degrade_image(const RasterImage& image, double severity, Rng& rng) {
  require(severity >= 0.0 && severity <= 1.0, "severity outside [0,1]");
  if (severity == 0.0) return image;

  RasterImage out = image;
  const double blur_sigma = 2.2 * severity;
  if (blur_sigma > 0.05) out = gaussian_blur(out, blur_sigma);

  // Block-transform crunch via the deterministic codec at low quality.
  if (severity > 0.15) {
    const DeterministicCodec codec;
    const float q = static_cast<float>(clamp01(0.55 - 0.55 * severity));
    const QualityMap qmap = QualityMap::constant(out.width, out.height, q);
    out = codec.decompress(codec.compress(out, qmap));
  }

  const double noise_sigma = 0.10 * severity;
  for (float& v : out.pixels) {
    v = static_cast<float>(clamp01(v + rng.normal(0.0, noise_sigma)));
  }
  return out;
}

const std::vector<double>& default_severity_grid() {
  static const std::vector<double> grid = {0.0, 0.15, 0.3, 0.5, 0.7, 0.85, 1.0};
  return grid;
}

SyntheticCorpus generate_synthetic_corpus(std::uint64_t seed, int scene_count,
                                          const std::vector<double>& severity_grid,
                                          const SceneOptions& base_options) {
  require(scene_count >= 1, "corpus needs at least one scene");
  require(!severity_grid.empty(), "severity grid must be non-empty");

  SyntheticCorpus corpus;
  Rng master(seed);
  for (int i = 0; i < scene_count; ++i) {
    Rng scene_rng = master.fork(static_cast<std::uint64_t>(i));
    SceneOptions options = base_options;
    options.severity = severity_grid[static_cast<size_t>(i) % severity_grid.size()];
    SyntheticScene scene = generate_scene(scene_rng, options);
    scene.image = degrade_image(scene.image, options.severity, scene_rng);

    for (auto& region : scene.regions) {
      const RasterImage crop = crop_region(scene.image, region);
      const std::uint64_t resize_seed =
          fnv1a("corpus:" + std::to_string(i), seed ^ region.box.x * 7919u);
      const RasterImage canvas = resize_for_assessment(crop, resize_seed);
      const RecognizerOutput rec =
          synthetic_recognizer(canvas, region.transcription, options.severity);
      const double label = make_label(region.transcription, rec).q;
      region.label = label;
      corpus.labeled.push_back(LabeledRegion{canvas, label});
    }
    corpus.scenes.push_back(std::move(scene));
  }
  return corpus;
}

}  // namespace textiq
