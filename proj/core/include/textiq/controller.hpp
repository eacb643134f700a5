#pragma once

#include <functional>
#include <vector>

#include "textiq/codec.hpp"
#include "textiq/image.hpp"
#include "textiq/imageproc.hpp"

namespace textiq {

struct ControllerConfig {
  double lambda = 5.0;
  double score_target = 0.90;
  int iterations = 3;
  double edge_weight = 0.5;
  double interior_weight = 0.5;
  double background_weight = 0.2;
  double canny_low = 0.1;
  double canny_high = 0.3;
  std::uint64_t resize_seed = 7;  // fixed so per-round assessment is repeatable

  void validate() const {
    require(background_weight >= 0.0 && background_weight <= edge_weight && edge_weight <= 1.0,
            "weights must satisfy 0 <= background <= edge <= 1");
    require(interior_weight >= 0.0 && interior_weight <= 1.0, "interior weight outside [0,1]");
    require(iterations >= 1, "iterations must be positive");
    require(canny_low <= canny_high, "canny thresholds out of order");
  }
};

// Box-local text geometry extracted once per region at initialization.
struct RegionTextMasks {
  std::vector<Box> boxes;
  std::vector<Mask> edges;     // Canny edge pixels
  std::vector<Mask> interior;  // closed + hole-filled body minus the edges
  std::vector<Mask> text;      // edges OR interior
};

RegionTextMasks compute_region_masks(const RasterImage& image,
                                     const std::vector<TextRegion>& regions,
                                     const ControllerConfig& config);

// Edge/interior pixels inside region boxes get their configured weights,
// everything else the background weight.
QualityMap init_quality_map(const RasterImage& image, const std::vector<TextRegion>& regions,
                            const ControllerConfig& config);

// k_new = clamp(k_old + lambda * (target - score), 0, 1).
double update_weight(double k_old, double score, const ControllerConfig& config);

// Rebuilds the map from the initialization-time text masks: each region's text
// pixels take that region's weight (max wins on overlap), background stays put.
QualityMap apply_region_weights(const RegionTextMasks& masks, int image_width, int image_height,
                                const std::vector<double>& weights,
                                const ControllerConfig& config);

struct PipelineRound {
  QualityMap qmap;
  CompressionResult result;
  std::vector<double> weights;  // per-region k used for this round's compression
  std::vector<double> scores;   // per-region assessed quality of the reconstruction
  double mean_score = 0.0;
  double bpp = 0.0;
};

struct PipelineOutput {
  size_t best_round = 0;
  CompressedBlob best_blob;
  std::vector<PipelineRound> trace;

  const PipelineRound& best() const { return trace[best_round]; }
};

// Maps a 32x128 reconstruction crop to a quality score in [0,1].
using Assessor = std::function<double(const RasterImage&)>;

// Compress, assess every region, update weights, repeat; returns the round with
// the highest mean assessed score (ties broken toward lower bpp) plus the full
// trace. Zero regions degrade to a single constant-background compression.
PipelineOutput run_pipeline(const RasterImage& image, const std::vector<TextRegion>& regions,
                            const Assessor& assess, const Codec& codec,
                            const ControllerConfig& config);

}  // namespace textiq
