#include "textiq/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "textiq/metrics.hpp"

namespace textiq {

RegionTextMasks compute_region_masks(const RasterImage& image,
                                     const std::vector<TextRegion>& regions,
                                     const ControllerConfig& config) {
  config.validate();
  RegionTextMasks masks;
  masks.boxes.reserve(regions.size());
  for (const auto& region : regions) {
    require(region.box.inside(image.width, image.height), "region outside image bounds");
    const RasterImage crop = crop_region(image, region);
    const Mask edges = canny_edges(crop, config.canny_low, config.canny_high);
    const Mask body = close_and_fill(edges);
    Mask interior(edges.width, edges.height);
    Mask text(edges.width, edges.height);
    for (int y = 0; y < edges.height; ++y) {
      for (int x = 0; x < edges.width; ++x) {
        const bool e = edges.at(x, y);
        const bool b = body.at(x, y);
        interior.set(x, y, b && !e);
        text.set(x, y, b || e);
      }
    }
    masks.boxes.push_back(region.box);
    masks.edges.push_back(std::move(edges));
    masks.interior.push_back(std::move(interior));
    masks.text.push_back(std::move(text));
  }
  return masks;
}

QualityMap init_quality_map(const RasterImage& image, const std::vector<TextRegion>& regions,
                            const ControllerConfig& config) {
  const RegionTextMasks masks = compute_region_masks(image, regions, config);
  QualityMap qmap(image.width, image.height, static_cast<float>(config.background_weight));
  for (size_t r = 0; r < masks.boxes.size(); ++r) {
    const Box& box = masks.boxes[r];
    for (int y = 0; y < box.h; ++y) {
      for (int x = 0; x < box.w; ++x) {
        float w = 0.0f;
        if (masks.edges[r].at(x, y)) {
          w = static_cast<float>(config.edge_weight);
        } else if (masks.interior[r].at(x, y)) {
          w = static_cast<float>(config.interior_weight);
        } else {
          continue;
        }
        float& cell = qmap.at(box.x + x, box.y + y);
        cell = std::max(cell, w);
      }
    }
  }
  return qmap;
}

double update_weight(double k_old, double score, const ControllerConfig& config) {
  require(k_old >= 0.0 && k_old <= 1.0, "k_old outside [0,1]");
  require(score >= 0.0 && score <= 1.0, "score outside [0,1]");
  return clamp01(k_old + config.lambda * (config.score_target - score));
}

QualityMap apply_region_weights(const RegionTextMasks& masks, int image_width, int image_height,
                                const std::vector<double>& weights,
                                const ControllerConfig& config) {
  require(weights.size() == masks.boxes.size(), "one weight per region required");
  QualityMap qmap(image_width, image_height, static_cast<float>(config.background_weight));
  for (size_t r = 0; r < masks.boxes.size(); ++r) {
    require(weights[r] >= 0.0 && weights[r] <= 1.0, "region weight outside [0,1]");
    const Box& box = masks.boxes[r];
    const float k = static_cast<float>(weights[r]);
    for (int y = 0; y < box.h; ++y) {
      for (int x = 0; x < box.w; ++x) {
        if (!masks.text[r].at(x, y)) continue;
        float& cell = qmap.at(box.x + x, box.y + y);
        cell = std::max(cell, k);  // overlapping regions: the hungrier one wins
      }
    }
  }
  return qmap;
}

PipelineOutput run_pipeline(const RasterImage& image, const std::vector<TextRegion>& regions,
                            const Assessor& assess, const Codec& codec,
                            const ControllerConfig& config) {
  config.validate();
  PipelineOutput output;

  if (regions.empty()) {
    QualityMap qmap =
        QualityMap::constant(image.width, image.height, static_cast<float>(config.background_weight));
    PipelineRound round;
    round.result = roundtrip(codec, image, qmap, {});
    round.bpp = round.result.bpp;
    round.qmap = std::move(qmap);
    output.trace.push_back(std::move(round));
    output.best_round = 0;
    output.best_blob = codec.compress(image, output.trace[0].qmap);
    return output;
  }

  const RegionTextMasks masks = compute_region_masks(image, regions, config);

  // Round one uses the two-level initialization map; later rounds rebuild the
  // map from the per-region weights.
  std::vector<double> weights(regions.size(), config.edge_weight);
  QualityMap qmap = init_quality_map(image, regions, config);

  for (int iter = 0; iter < config.iterations; ++iter) {
    PipelineRound round;
    round.weights = weights;
    round.result = roundtrip(codec, image, qmap, regions);
    round.bpp = round.result.bpp;

    round.scores.reserve(regions.size());
    for (size_t r = 0; r < regions.size(); ++r) {
      const RasterImage crop = crop_region(round.result.reconstruction, regions[r]);
      const std::uint64_t seed = fnv1a("round-crop:" + std::to_string(r), config.resize_seed);
      const double score = assess(resize_for_assessment(crop, seed));
      require(score >= 0.0 && score <= 1.0, "assessor returned a score outside [0,1]");
      round.scores.push_back(score);
    }
    round.mean_score =
        std::accumulate(round.scores.begin(), round.scores.end(), 0.0) /
        static_cast<double>(round.scores.size());
    round.qmap = qmap;
    output.trace.push_back(std::move(round));

    if (iter + 1 < config.iterations) {
      for (size_t r = 0; r < regions.size(); ++r) {
        weights[r] = update_weight(weights[r], output.trace.back().scores[r], config);
      }
      qmap = apply_region_weights(masks, image.width, image.height, weights, config);
    }
  }

  size_t best = 0;
  for (size_t i = 1; i < output.trace.size(); ++i) {
    const auto& cand = output.trace[i];
    const auto& cur = output.trace[best];
    if (cand.mean_score > cur.mean_score ||
        (cand.mean_score == cur.mean_score && cand.bpp < cur.bpp)) {
      best = i;
    }
  }
  output.best_round = best;
  output.best_blob = codec.compress(image, output.trace[best].qmap);
  return output;
}

}  // namespace textiq
