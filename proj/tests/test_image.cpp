#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "textiq/image.hpp"

using namespace textiq;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "textiq_image_tests";
  fs::create_directories(dir);
  return dir;
}

RasterImage checkerboard(int w, int h) {
  RasterImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(x, y) = ((x / 4 + y / 4) % 2) ? 0.8f : 0.15f;
    }
  }
  return img;
}

void write_manifest_line(std::ofstream& out, const std::string& image,
                         const std::string& regions_json) {
  out << R"({"image": ")" << image << R"(", "regions": )" << regions_json << "}\n";
}

}  // namespace

TEST_SUITE("image") {
  TEST_CASE("pgm round-trip preserves bytes") {
    const fs::path path = temp_dir() / "rt.pgm";
    const RasterImage img = checkerboard(33, 17);
    save_pgm(img, path);
    const RasterImage back = load_pgm(path);
    REQUIRE(back.width == 33);
    REQUIRE(back.height == 17);
    for (size_t i = 0; i < img.pixels.size(); ++i) {
      CHECK(back.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(1.0 / 255.0));
    }
  }

  TEST_CASE("png round-trip preserves bytes") {
    const fs::path path = temp_dir() / "rt.png";
    const RasterImage img = checkerboard(40, 25);
    save_png(img, path);
    const RasterImage back = load_png(path);
    REQUIRE(back.same_dims(img));
    for (size_t i = 0; i < img.pixels.size(); ++i) {
      CHECK(std::abs(back.pixels[i] - img.pixels[i]) <= 1.0f / 255.0f);
    }
  }

  TEST_CASE("manifest: minimal well-formed case") {
    const fs::path dir = temp_dir();
    save_pgm(checkerboard(100, 60), dir / "one.pgm");
    std::ofstream out(dir / "ok.jsonl");
    write_manifest_line(out, "one.pgm",
                        R"([{"box":[10,10,40,20], "text": "stop", "label": null}])");
    out.close();

    const DatasetManifest manifest = load_manifest(dir / "ok.jsonl");
    REQUIRE(manifest.entries.size() == 1);
    REQUIRE(manifest.entries[0].regions.size() == 1);
    CHECK(manifest.entries[0].regions[0].transcription == "stop");
    CHECK(!manifest.entries[0].regions[0].label.has_value());
    CHECK(manifest.entries[0].image_width == 100);
  }

  TEST_CASE("manifest: out-of-bounds region names the entry") {
    const fs::path dir = temp_dir();
    save_pgm(checkerboard(50, 50), dir / "small.pgm");
    std::ofstream out(dir / "bad.jsonl");
    write_manifest_line(out, "small.pgm", R"([{"box":[20,10,40,20], "text": "x"}])");
    out.close();

    CHECK_THROWS_WITH_AS(load_manifest(dir / "bad.jsonl"),
                         doctest::Contains("manifest entry 0"), FormatError);
  }

  TEST_CASE("manifest: empty list is valid") {
    const fs::path dir = temp_dir();
    std::ofstream out(dir / "empty.jsonl");
    out.close();
    const DatasetManifest manifest = load_manifest(dir / "empty.jsonl");
    CHECK(manifest.entries.empty());
  }

  TEST_CASE("manifest: missing file errors") {
    CHECK_THROWS_AS(load_manifest(temp_dir() / "nope.jsonl"), IoError);
  }

  TEST_CASE("manifest: save/load round-trip") {
    const fs::path dir = temp_dir();
    save_pgm(checkerboard(64, 48), dir / "rt_img.pgm");
    DatasetManifest manifest;
    manifest.base_dir = dir;
    ManifestEntry entry;
    entry.image_path = "rt_img.pgm";
    entry.regions.push_back(TextRegion{Box{4, 4, 30, 12}, "cafe", 0.75});
    manifest.entries.push_back(entry);
    save_manifest(manifest, dir / "rt.jsonl");

    const DatasetManifest back = load_manifest(dir / "rt.jsonl");
    REQUIRE(back.entries.size() == 1);
    REQUIRE(back.entries[0].regions.size() == 1);
    CHECK(back.entries[0].regions[0].label == doctest::Approx(0.75));
    CHECK(back.entries[0].regions[0].transcription == "cafe");
  }

  TEST_CASE("crop: identity") {
    const RasterImage img = checkerboard(100, 100);
    const RasterImage out = crop_region(img, TextRegion{Box{0, 0, 100, 100}, "", {}});
    CHECK(out.pixels == img.pixels);
  }

  TEST_CASE("crop: shape arithmetic") {
    const RasterImage img = checkerboard(100, 100);
    const RasterImage out = crop_region(img, TextRegion{Box{10, 10, 40, 20}, "", {}});
    CHECK(out.width == 40);
    CHECK(out.height == 20);
    CHECK(out.at(0, 0) == img.at(10, 10));
    CHECK(out.at(39, 19) == img.at(49, 29));
  }

  TEST_CASE("crop: bounds violation") {
    const RasterImage img = checkerboard(100, 100);
    CHECK_THROWS_AS(crop_region(img, TextRegion{Box{95, 95, 10, 10}, "", {}}), InvalidArgument);
  }

  TEST_CASE("resize: undersized input is preserved verbatim") {
    RasterImage img(60, 20);
    for (size_t i = 0; i < img.pixels.size(); ++i) {
      img.pixels[i] = static_cast<float>((i * 37 % 251)) / 251.0f;
    }
    const RasterImage out = resize_for_assessment(img, 5);
    REQUIRE(out.width == kAssessWidth);
    REQUIRE(out.height == kAssessHeight);
    const int off_x = (kAssessWidth - img.width) / 2;
    const int off_y = (kAssessHeight - img.height) / 2;
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        CHECK(out.at(off_x + x, off_y + y) == img.at(x, y));
      }
    }
    for (float v : out.pixels) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }

  TEST_CASE("resize: oversized input yields a contiguous window") {
    RasterImage img(256, 64);
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 256; ++x) {
        img.at(x, y) = static_cast<float>((x * 64 + y) % 997) / 997.0f;
      }
    }
    const RasterImage out = resize_for_assessment(img, 11);
    REQUIRE(out.width == kAssessWidth);
    REQUIRE(out.height == kAssessHeight);
    bool found = false;
    for (int oy = 0; oy + kAssessHeight <= img.height && !found; ++oy) {
      for (int ox = 0; ox + kAssessWidth <= img.width && !found; ++ox) {
        bool match = true;
        for (int y = 0; y < kAssessHeight && match; ++y) {
          for (int x = 0; x < kAssessWidth && match; ++x) {
            match = out.at(x, y) == img.at(ox + x, oy + y);
          }
        }
        found = match;
      }
    }
    CHECK(found);
  }

  TEST_CASE("resize: constant input with zero noise fills with the corner value") {
    const RasterImage img(60, 20, 0.3f);
    const RasterImage out = resize_for_assessment(img, 3, /*noise_sigma=*/0.0);
    for (float v : out.pixels) CHECK(v == doctest::Approx(0.3f));
  }

  TEST_CASE("resize: second-lowest corner picks index 1 of the sorted corners") {
    RasterImage img(40, 10, 0.5f);
    img.at(0, 0) = 0.05f;        // lowest
    img.at(39, 0) = 0.25f;       // second-lowest -> the fill
    img.at(0, 9) = 0.6f;
    img.at(39, 9) = 0.9f;
    const RasterImage out = resize_for_assessment(img, 3, 0.0);
    CHECK(out.at(0, 0) == doctest::Approx(0.25f));
  }

  TEST_CASE("resize: deterministic given seed") {
    RasterImage img(200, 50);
    for (size_t i = 0; i < img.pixels.size(); ++i) {
      img.pixels[i] = static_cast<float>(i % 173) / 173.0f;
    }
    const RasterImage a = resize_for_assessment(img, 99);
    const RasterImage b = resize_for_assessment(img, 99);
    const RasterImage c = resize_for_assessment(img, 100);
    CHECK(a.pixels == b.pixels);
    CHECK(a.pixels != c.pixels);
  }

  TEST_CASE("resize: mixed case pads the small dim then crops the large one") {
    RasterImage img(300, 12, 0.4f);
    const RasterImage out = resize_for_assessment(img, 21, 0.0);
    REQUIRE(out.width == kAssessWidth);
    REQUIRE(out.height == kAssessHeight);
    // Rows 10..21 hold original content (height padded 12 -> 32, centered).
    for (int x = 0; x < kAssessWidth; ++x) CHECK(out.at(x, 15) == doctest::Approx(0.4f));
  }

  TEST_CASE("normalize_transcription") {
    CHECK(normalize_transcription("Stop") == "stop");
    CHECK(normalize_transcription("  A  B\t C ") == "a b c");
    CHECK(normalize_transcription("Route-66!") == "route66");
    CHECK(normalize_transcription("@#$%") == "");
  }
}
