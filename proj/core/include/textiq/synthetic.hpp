#pragma once

#include <vector>

#include "textiq/image.hpp"
#include "textiq/imageproc.hpp"
#include "textiq/stiqa.hpp"

namespace textiq {

// A rendered scene with known text geometry and a degradation severity.
struct SyntheticScene {
  RasterImage image;
  std::vector<TextRegion> regions;     // labels filled by the corpus generator
  std::vector<Mask> glyph_coverage;    // box-local rasterization masks
  double severity = 0.0;
};

struct SceneOptions {
  int width = 192;
  int height = 128;
  int min_regions = 1;
  int max_regions = 3;
  double severity = 0.0;  // 0 pristine .. 1 destroyed
};

SyntheticScene generate_scene(Rng& rng, const SceneOptions& options);

// Blur + block-transform crunch + sensor noise, all scaled by severity.
RasterImage degrade_image(const RasterImage& image, double severity, Rng& rng);

struct SyntheticCorpus {
  std::vector<SyntheticScene> scenes;
  std::vector<LabeledRegion> labeled;  // 32x128 assessment crops with labels
};

// Deterministic given the seed. Scene i draws its severity from the grid in
// round-robin order; labels come from the synthetic recognizer on the
// degraded crops, so they track both the knob and the visible damage.
SyntheticCorpus generate_synthetic_corpus(std::uint64_t seed, int scene_count,
                                          const std::vector<double>& severity_grid,
                                          const SceneOptions& base_options = {});

// Convenience default grid: seven severities spanning pristine to destroyed.
const std::vector<double>& default_severity_grid();

}  // namespace textiq
