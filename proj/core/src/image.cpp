#include "textiq/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace textiq {

namespace {

std::string lower_ext(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

float byte_to_unit(unsigned v) { return static_cast<float>(v) / 255.0f; }

unsigned unit_to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<unsigned>(std::lround(c * 255.0f));
}

}  // namespace

std::string normalize_transcription(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char raw_c : raw) {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw_c)));
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    const int idx = char_class_index(c);
    if (idx < 0) continue;
    if (idx == kSpaceClass) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  return out;
}

// ---- PGM ----------------------------------------------------------------

namespace {

int read_pnm_token(std::istream& in, const std::filesystem::path& path) {
  // Skips whitespace and '#' comments between tokens.
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  if (c == EOF) throw FormatError("truncated PGM header: " + path.string());
  int value = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw FormatError("malformed PGM header: " + path.string());
  return value;
}

}  // namespace

RasterImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || magic[1] != '5') {
    throw FormatError("not a binary PGM (P5): " + path.string());
  }
  const int w = read_pnm_token(in, path);
  const int h = read_pnm_token(in, path);
  const int maxval = read_pnm_token(in, path);
  if (w < 1 || h < 1) throw FormatError("bad PGM dimensions: " + path.string());
  if (maxval != 255) throw FormatError("only 8-bit PGM supported: " + path.string());

  RasterImage img(w, h);
  std::vector<unsigned char> row(static_cast<size_t>(w));
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), w);
    if (!in) throw FormatError("truncated PGM payload: " + path.string());
    for (int x = 0; x < w; ++x) img.at(x, y) = byte_to_unit(row[x]);
  }
  return img;
}

void save_pgm(const RasterImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path.string());
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(image.width));
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      row[x] = static_cast<unsigned char>(unit_to_byte(image.at(x, y)));
    }
    out.write(reinterpret_cast<const char*>(row.data()), image.width);
  }
  if (!out) throw IoError("short write: " + path.string());
}

// ---- PNG ----------------------------------------------------------------

namespace {

struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngWriteCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngWriteCloser() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

}  // namespace

RasterImage load_png(const std::filesystem::path& path) {
  PngReadCloser ctx;
  ctx.fp = std::fopen(path.string().c_str(), "rb");
  if (!ctx.fp) throw IoError("cannot open image: " + path.string());

  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) throw Error("png_create_read_struct failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw Error("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(ctx.png))) {
    throw FormatError("corrupt PNG: " + path.string());
  }
  png_init_io(ctx.png, ctx.fp);
  png_read_info(ctx.png, ctx.info);

  const png_uint_32 w = png_get_image_width(ctx.png, ctx.info);
  const png_uint_32 h = png_get_image_height(ctx.png, ctx.info);
  const int color_type = png_get_color_type(ctx.png, ctx.info);
  const int bit_depth = png_get_bit_depth(ctx.png, ctx.info);

  if (bit_depth == 16) png_set_strip_16(ctx.png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
  if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
  png_set_strip_alpha(ctx.png);
  png_read_update_info(ctx.png, ctx.info);

  const int channels = png_get_channels(ctx.png, ctx.info);
  if (channels != 1 && channels != 3) {
    throw FormatError("unsupported PNG channel layout: " + path.string());
  }

  RasterImage img(static_cast<int>(w), static_cast<int>(h));
  std::vector<unsigned char> row(static_cast<size_t>(w) * channels);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(ctx.png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x) {
      if (channels == 1) {
        img.at(static_cast<int>(x), static_cast<int>(y)) = byte_to_unit(row[x]);
      } else {
        // Channel mean; the pipeline is grayscale throughout.
        const unsigned sum = row[3 * x] + row[3 * x + 1] + row[3 * x + 2];
        img.at(static_cast<int>(x), static_cast<int>(y)) =
            static_cast<float>(sum) / (3.0f * 255.0f);
      }
    }
  }
  return img;
}

void save_png(const RasterImage& image, const std::filesystem::path& path) {
  PngWriteCloser ctx;
  ctx.fp = std::fopen(path.string().c_str(), "wb");
  if (!ctx.fp) throw IoError("cannot write image: " + path.string());

  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) throw Error("png_create_write_struct failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw Error("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(ctx.png))) {
    throw IoError("PNG write failed: " + path.string());
  }
  png_init_io(ctx.png, ctx.fp);
  png_set_IHDR(ctx.png, ctx.info, image.width, image.height, 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);

  std::vector<unsigned char> row(static_cast<size_t>(image.width));
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      row[x] = static_cast<unsigned char>(unit_to_byte(image.at(x, y)));
    }
    png_write_row(ctx.png, row.data());
  }
  png_write_end(ctx.png, nullptr);
}

RasterImage load_image(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".pgm") return load_pgm(path);
  if (ext == ".png") return load_png(path);
  throw FormatError("unsupported image extension '" + ext + "': " + path.string());
}

void save_image(const RasterImage& image, const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".pgm") return save_pgm(image, path);
  if (ext == ".png") return save_png(image, path);
  throw FormatError("unsupported image extension '" + ext + "': " + path.string());
}

// ---- manifest -----------------------------------------------------------

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());

  DatasetManifest manifest;
  manifest.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "manifest entry " + std::to_string(manifest.entries.size()) +
                              " (line " + std::to_string(line_no) + ")";
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": invalid JSON: " + e.what());
    }
    if (!rec.contains("image") || !rec["image"].is_string()) {
      throw FormatError(where + ": missing \"image\" field");
    }
    ManifestEntry entry;
    entry.image_path = rec["image"].get<std::string>();

    RasterImage img;
    try {
      img = load_image(manifest.base_dir / entry.image_path);
    } catch (const Error& e) {
      throw FormatError(where + ": image failed to load: " + e.what());
    }
    entry.image_width = img.width;
    entry.image_height = img.height;

    if (rec.contains("regions")) {
      if (!rec["regions"].is_array()) throw FormatError(where + ": \"regions\" must be an array");
      for (const auto& r : rec["regions"]) {
        TextRegion region;
        if (!r.contains("box") || !r["box"].is_array() || r["box"].size() != 4) {
          throw FormatError(where + ": region needs \"box\":[x,y,w,h]");
        }
        region.box = Box{r["box"][0].get<int>(), r["box"][1].get<int>(), r["box"][2].get<int>(),
                         r["box"][3].get<int>()};
        if (!region.box.inside(img.width, img.height)) {
          throw FormatError(where + ": region box [" + std::to_string(region.box.x) + "," +
                            std::to_string(region.box.y) + "," + std::to_string(region.box.w) +
                            "," + std::to_string(region.box.h) + "] outside " +
                            std::to_string(img.width) + "x" + std::to_string(img.height) +
                            " image");
        }
        if (r.contains("text") && r["text"].is_string()) {
          region.transcription = normalize_transcription(r["text"].get<std::string>());
        }
        if (r.contains("label") && !r["label"].is_null()) {
          const double label = r["label"].get<double>();
          if (label < 0.0 || label > 1.0) {
            throw FormatError(where + ": label " + std::to_string(label) + " outside [0,1]");
          }
          region.label = label;
        }
        entry.regions.push_back(std::move(region));
      }
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  for (const auto& entry : manifest.entries) {
    nlohmann::json rec;
    rec["image"] = entry.image_path;
    rec["regions"] = nlohmann::json::array();
    for (const auto& region : entry.regions) {
      nlohmann::json r;
      r["box"] = {region.box.x, region.box.y, region.box.w, region.box.h};
      r["text"] = region.transcription;
      if (region.label) {
        r["label"] = *region.label;
      } else {
        r["label"] = nullptr;
      }
      rec["regions"].push_back(std::move(r));
    }
    out << rec.dump() << "\n";
  }
}

// ---- region geometry ----------------------------------------------------

RasterImage crop_box(const RasterImage& image, const Box& box) {
  if (!box.inside(image.width, image.height)) {
    throw InvalidArgument("crop box [" + std::to_string(box.x) + "," + std::to_string(box.y) +
                          "," + std::to_string(box.w) + "," + std::to_string(box.h) +
                          "] outside " + std::to_string(image.width) + "x" +
                          std::to_string(image.height) + " image");
  }
  RasterImage out(box.w, box.h);
  for (int y = 0; y < box.h; ++y) {
    const float* src = &image.pixels[static_cast<size_t>(box.y + y) * image.width + box.x];
    std::copy(src, src + box.w, &out.pixels[static_cast<size_t>(y) * box.w]);
  }
  return out;
}

RasterImage crop_region(const RasterImage& image, const TextRegion& region) {
  return crop_box(image, region.box);
}

RasterImage resize_for_assessment(const RasterImage& region_image, std::uint64_t rng_seed,
                                  double noise_sigma) {
  require(region_image.width >= 1 && region_image.height >= 1,
          "resize_for_assessment: empty input");

  // Background fill: second-lowest of the four corner values.
  std::array<float, 4> corners = {
      region_image.at(0, 0),
      region_image.at(region_image.width - 1, 0),
      region_image.at(0, region_image.height - 1),
      region_image.at(region_image.width - 1, region_image.height - 1),
  };
  std::sort(corners.begin(), corners.end());
  const double fill = corners[1];

  Rng rng(rng_seed);

  // Pad undersized dimensions first (centered), then crop oversized ones.
  const int canvas_w = std::max(region_image.width, kAssessWidth);
  const int canvas_h = std::max(region_image.height, kAssessHeight);

  RasterImage canvas(canvas_w, canvas_h);
  const int off_x = (canvas_w - region_image.width) / 2;
  const int off_y = (canvas_h - region_image.height) / 2;
  for (int y = 0; y < canvas_h; ++y) {
    for (int x = 0; x < canvas_w; ++x) {
      const bool inside = x >= off_x && x < off_x + region_image.width && y >= off_y &&
                          y < off_y + region_image.height;
      if (inside) {
        canvas.at(x, y) = region_image.at(x - off_x, y - off_y);
      } else {
        canvas.at(x, y) = static_cast<float>(clamp01(fill + rng.normal(0.0, noise_sigma)));
      }
    }
  }

  if (canvas_w == kAssessWidth && canvas_h == kAssessHeight) return canvas;

  const int crop_x =
      canvas_w > kAssessWidth ? static_cast<int>(rng.uniform_index(canvas_w - kAssessWidth + 1)) : 0;
  const int crop_y =
      canvas_h > kAssessHeight ? static_cast<int>(rng.uniform_index(canvas_h - kAssessHeight + 1))
                               : 0;
  return crop_box(canvas, Box{crop_x, crop_y, kAssessWidth, kAssessHeight});
}

}  // namespace textiq
