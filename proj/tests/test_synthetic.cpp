#include <doctest.h>

#include <map>
#include <set>

#include "textiq/synthetic.hpp"

using namespace textiq;

TEST_SUITE("synthetic") {
  TEST_CASE("same seed gives a bit-identical corpus") {
    const SyntheticCorpus a = generate_synthetic_corpus(99, 6, default_severity_grid());
    const SyntheticCorpus b = generate_synthetic_corpus(99, 6, default_severity_grid());
    REQUIRE(a.scenes.size() == b.scenes.size());
    REQUIRE(a.labeled.size() == b.labeled.size());
    for (size_t i = 0; i < a.scenes.size(); ++i) {
      CHECK(a.scenes[i].image.pixels == b.scenes[i].image.pixels);
    }
    for (size_t i = 0; i < a.labeled.size(); ++i) {
      CHECK(a.labeled[i].label == b.labeled[i].label);
      CHECK(a.labeled[i].image.pixels == b.labeled[i].image.pixels);
    }
    const SyntheticCorpus c = generate_synthetic_corpus(100, 6, default_severity_grid());
    bool any_diff = false;
    for (size_t i = 0; i < std::min(a.scenes.size(), c.scenes.size()); ++i) {
      any_diff = any_diff || a.scenes[i].image.pixels != c.scenes[i].image.pixels;
    }
    CHECK(any_diff);
  }

  TEST_CASE("scene geometry is consistent") {
    const SyntheticCorpus corpus = generate_synthetic_corpus(7, 10, {0.0, 0.5});
    for (const auto& scene : corpus.scenes) {
      REQUIRE(scene.regions.size() == scene.glyph_coverage.size());
      for (size_t r = 0; r < scene.regions.size(); ++r) {
        const Box& box = scene.regions[r].box;
        CHECK(box.inside(scene.image.width, scene.image.height));
        CHECK(scene.glyph_coverage[r].width == box.w);
        CHECK(scene.glyph_coverage[r].height == box.h);
        CHECK(scene.glyph_coverage[r].count() > 0);
        CHECK(!scene.regions[r].transcription.empty());
        CHECK(scene.regions[r].label.has_value());
      }
    }
  }

  TEST_CASE("clean renders label high, destroyed renders label low") {
    const SyntheticCorpus clean = generate_synthetic_corpus(11, 8, {0.0});
    REQUIRE(!clean.labeled.empty());
    for (const auto& item : clean.labeled) CHECK(item.label >= 0.95);

    const SyntheticCorpus wrecked = generate_synthetic_corpus(11, 8, {1.0});
    REQUIRE(!wrecked.labeled.empty());
    for (const auto& item : wrecked.labeled) CHECK(item.label <= 0.2);
  }

  TEST_CASE("label span covers the range with distinct severity levels") {
    const SyntheticCorpus corpus = generate_synthetic_corpus(13, 35, default_severity_grid());
    REQUIRE(corpus.labeled.size() >= 35);
    double lo = 1.0, hi = 0.0;
    for (const auto& item : corpus.labeled) {
      lo = std::min(lo, item.label);
      hi = std::max(hi, item.label);
      CHECK(item.label >= 0.0);
      CHECK(item.label <= 1.0);
    }
    CHECK(lo <= 0.2);
    CHECK(hi >= 0.95);
    std::set<double> severities;
    for (const auto& scene : corpus.scenes) severities.insert(scene.severity);
    CHECK(severities.size() >= 5);
  }

  TEST_CASE("severity ordering shows in mean labels") {
    const SyntheticCorpus corpus =
        generate_synthetic_corpus(17, 30, {0.0, 0.3, 0.7, 1.0});
    std::map<double, std::pair<double, int>> by_severity;
    for (size_t i = 0; i < corpus.scenes.size(); ++i) {
      for (const auto& region : corpus.scenes[i].regions) {
        auto& [sum, count] = by_severity[corpus.scenes[i].severity];
        sum += *region.label;
        ++count;
      }
    }
    REQUIRE(by_severity.size() == 4);
    double prev = 2.0;
    for (const auto& [severity, stat] : by_severity) {
      const double mean = stat.first / stat.second;
      CHECK(mean < prev);
      prev = mean;
    }
  }

  TEST_CASE("degrade_image: severity zero is identity, severity damages fidelity") {
    Rng rng(3);
    SceneOptions options;
    const SyntheticScene scene = generate_scene(rng, options);
    Rng r1(5);
    const RasterImage same = degrade_image(scene.image, 0.0, r1);
    CHECK(same.pixels == scene.image.pixels);

    // Damage grows with severity, measured as MSE against the clean scene.
    auto mse = [&](const RasterImage& img) {
      double acc = 0.0;
      for (size_t i = 0; i < img.pixels.size(); ++i) {
        const double d = img.pixels[i] - scene.image.pixels[i];
        acc += d * d;
      }
      return acc / static_cast<double>(img.pixels.size());
    };
    Rng r2(5);
    const RasterImage mild = degrade_image(scene.image, 0.3, r2);
    Rng r3(5);
    const RasterImage harsh = degrade_image(scene.image, 0.9, r3);
    CHECK(mse(mild) > 0.0);
    CHECK(mse(harsh) > mse(mild));
  }
}
