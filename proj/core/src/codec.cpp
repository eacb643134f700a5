#include "textiq/codec.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include "textiq/metrics.hpp"
#include "textiq/range_coder.hpp"

namespace textiq {

namespace {

constexpr int kBlock = 8;

// Orthonormal 1-D DCT-II basis, row k = basis for frequency k.
const std::array<std::array<double, kBlock>, kBlock>& dct_basis() {
  static const auto basis = [] {
    std::array<std::array<double, kBlock>, kBlock> m{};
    for (int k = 0; k < kBlock; ++k) {
      const double scale = k == 0 ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
      for (int n = 0; n < kBlock; ++n) {
        m[k][n] = scale * std::cos(M_PI * (2 * n + 1) * k / (2.0 * kBlock));
      }
    }
    return m;
  }();
  return basis;
}

void forward_dct(const double (&in)[kBlock][kBlock], double (&out)[kBlock][kBlock]) {
  const auto& c = dct_basis();
  double tmp[kBlock][kBlock];
  for (int k = 0; k < kBlock; ++k) {
    for (int x = 0; x < kBlock; ++x) {
      double acc = 0.0;
      for (int n = 0; n < kBlock; ++n) acc += c[k][n] * in[n][x];
      tmp[k][x] = acc;
    }
  }
  for (int k = 0; k < kBlock; ++k) {
    for (int l = 0; l < kBlock; ++l) {
      double acc = 0.0;
      for (int n = 0; n < kBlock; ++n) acc += c[l][n] * tmp[k][n];
      out[k][l] = acc;
    }
  }
}

void inverse_dct(const double (&in)[kBlock][kBlock], double (&out)[kBlock][kBlock]) {
  const auto& c = dct_basis();
  double tmp[kBlock][kBlock];
  for (int y = 0; y < kBlock; ++y) {
    for (int l = 0; l < kBlock; ++l) {
      double acc = 0.0;
      for (int k = 0; k < kBlock; ++k) acc += c[k][y] * in[k][l];
      tmp[y][l] = acc;
    }
  }
  for (int y = 0; y < kBlock; ++y) {
    for (int x = 0; x < kBlock; ++x) {
      double acc = 0.0;
      for (int l = 0; l < kBlock; ++l) acc += c[l][x] * tmp[y][l];
      out[y][x] = acc;
    }
  }
}

const std::array<std::pair<int, int>, 64>& zigzag_order() {
  static const auto order = [] {
    std::array<std::pair<int, int>, 64> zz{};
    int idx = 0;
    for (int s = 0; s < 2 * kBlock - 1; ++s) {
      if (s % 2 == 0) {
        for (int y = std::min(s, kBlock - 1); y >= std::max(0, s - kBlock + 1); --y) {
          zz[idx++] = {y, s - y};
        }
      } else {
        for (int x = std::min(s, kBlock - 1); x >= std::max(0, s - kBlock + 1); --x) {
          zz[idx++] = {s - x, x};
        }
      }
    }
    return zz;
  }();
  return order;
}

int band_group(int zigzag_index) { return std::min(zigzag_index, 15); }
int magnitude_group(int zigzag_index) { return std::min(zigzag_index, 7); }

// The full adaptive-context state for one coding pass.
struct BlockModels {
  BitModel rung_differs;
  std::vector<BitModel> zero_flag{16};
  BitModel ac_present;
  std::vector<std::vector<BitModel>> magnitude{8};
};

// Edge-replicated value fetch so partial border blocks reuse edge content.
template <typename Grid>
double sample_clamped(const Grid& g, int x, int y) {
  x = std::clamp(x, 0, g.width - 1);
  y = std::clamp(y, 0, g.height - 1);
  return g.at(x, y);
}

}  // namespace

DeterministicCodec::DeterministicCodec(DctCodecParams params) : params_(params) {
  require(params_.step_max > 0.0, "step_max must be positive");
  require(params_.step_ratio > 1.0, "step_ratio must exceed 1");
  require(params_.ladder_rungs >= 2, "ladder needs at least two rungs");
}

double DeterministicCodec::step_for_rung(int rung) const {
  require(rung >= 0 && rung < params_.ladder_rungs, "rung out of range");
  const double t = static_cast<double>(rung) / (params_.ladder_rungs - 1);
  return params_.step_max * std::exp(-std::log(params_.step_ratio) * t);
}

int DeterministicCodec::rung_for_quality(double q) const {
  const int rung = static_cast<int>(std::lround(clamp01(q) * (params_.ladder_rungs - 1)));
  return std::clamp(rung, 0, params_.ladder_rungs - 1);
}

CompressedBlob DeterministicCodec::compress(const RasterImage& image,
                                            const QualityMap& qmap) const {
  require(image.width == qmap.width && image.height == qmap.height,
          "image and quality map dimensions differ");
  qmap.validate();

  const int blocks_x = (image.width + kBlock - 1) / kBlock;
  const int blocks_y = (image.height + kBlock - 1) / kBlock;

  RangeEncoder enc;
  BlockModels models;
  std::vector<int> row_rungs(blocks_x, -1);

  for (int by = 0; by < blocks_y; ++by) {
    for (int bx = 0; bx < blocks_x; ++bx) {
      double q_sum = 0.0;
      double block[kBlock][kBlock];
      for (int y = 0; y < kBlock; ++y) {
        for (int x = 0; x < kBlock; ++x) {
          block[y][x] = sample_clamped(image, bx * kBlock + x, by * kBlock + y) - 0.5;
          q_sum += sample_clamped(qmap, bx * kBlock + x, by * kBlock + y);
        }
      }
      const int rung = rung_for_quality(q_sum / (kBlock * kBlock));
      const int predicted = bx > 0 ? row_rungs[bx - 1] : (by > 0 ? row_rungs[0] : 16);
      if (rung == predicted) {
        enc.encode_bit(models.rung_differs, 0);
      } else {
        enc.encode_bit(models.rung_differs, 1);
        enc.encode_direct(static_cast<std::uint32_t>(rung), 6);
      }
      row_rungs[bx] = rung;
      const double step = step_for_rung(rung);

      double coeffs[kBlock][kBlock];
      forward_dct(block, coeffs);

      std::array<long, 64> levels{};
      const auto& zz = zigzag_order();
      bool any_ac = false;
      for (int i = 0; i < 64; ++i) {
        levels[i] = std::lround(coeffs[zz[i].first][zz[i].second] / step);
        if (i > 0 && levels[i] != 0) any_ac = true;
      }

      // DC first, then a presence flag that skips fully flat AC sets.
      const long dc = levels[0];
      if (dc == 0) {
        enc.encode_bit(models.zero_flag[0], 0);
      } else {
        enc.encode_bit(models.zero_flag[0], 1);
        enc.encode_direct(dc < 0 ? 1 : 0, 1);
        enc.encode_magnitude(models.magnitude[0], static_cast<std::uint32_t>(std::labs(dc) - 1));
      }
      enc.encode_bit(models.ac_present, any_ac ? 1 : 0);
      if (any_ac) {
        for (int i = 1; i < 64; ++i) {
          const long level = levels[i];
          if (level == 0) {
            enc.encode_bit(models.zero_flag[band_group(i)], 0);
          } else {
            enc.encode_bit(models.zero_flag[band_group(i)], 1);
            enc.encode_direct(level < 0 ? 1 : 0, 1);
            enc.encode_magnitude(models.magnitude[magnitude_group(i)],
                                 static_cast<std::uint32_t>(std::labs(level) - 1));
          }
        }
      }
    }
  }

  CompressedBlob blob;
  blob.backend = CodecBackend::kDeterministic;
  blob.width = image.width;
  blob.height = image.height;
  blob.payload = enc.finish();
  return blob;
}

RasterImage DeterministicCodec::decompress(const CompressedBlob& blob) const {
  require(blob.backend == CodecBackend::kDeterministic,
          "blob was produced by a different backend");
  require(blob.width >= 1 && blob.height >= 1, "blob header has empty dimensions");

  const int blocks_x = (blob.width + kBlock - 1) / kBlock;
  const int blocks_y = (blob.height + kBlock - 1) / kBlock;

  RangeDecoder dec(blob.payload.data(), blob.payload.size());
  BlockModels models;
  std::vector<int> row_rungs(blocks_x, -1);

  RasterImage out(blob.width, blob.height);
  const auto& zz = zigzag_order();

  for (int by = 0; by < blocks_y; ++by) {
    for (int bx = 0; bx < blocks_x; ++bx) {
      const int predicted = bx > 0 ? row_rungs[bx - 1] : (by > 0 ? row_rungs[0] : 16);
      int rung = predicted;
      if (dec.decode_bit(models.rung_differs) == 1) {
        rung = static_cast<int>(dec.decode_direct(6));
        if (rung >= params_.ladder_rungs) throw CorruptStream("rung outside the ladder");
      }
      row_rungs[bx] = rung;
      const double step = step_for_rung(rung);

      std::array<long, 64> levels{};
      if (dec.decode_bit(models.zero_flag[0]) == 1) {
        const int sign = dec.decode_direct(1) ? -1 : 1;
        levels[0] = sign * (static_cast<long>(dec.decode_magnitude(models.magnitude[0])) + 1);
      }
      if (dec.decode_bit(models.ac_present) == 1) {
        for (int i = 1; i < 64; ++i) {
          if (dec.decode_bit(models.zero_flag[band_group(i)]) == 1) {
            const int sign = dec.decode_direct(1) ? -1 : 1;
            levels[i] =
                sign * (static_cast<long>(dec.decode_magnitude(models.magnitude[magnitude_group(i)])) + 1);
          }
        }
      }

      double coeffs[kBlock][kBlock] = {};
      for (int i = 0; i < 64; ++i) {
        coeffs[zz[i].first][zz[i].second] = static_cast<double>(levels[i]) * step;
      }
      double block[kBlock][kBlock];
      inverse_dct(coeffs, block);

      for (int y = 0; y < kBlock; ++y) {
        const int py = by * kBlock + y;
        if (py >= blob.height) break;
        for (int x = 0; x < kBlock; ++x) {
          const int px = bx * kBlock + x;
          if (px >= blob.width) break;
          out.at(px, py) = static_cast<float>(clamp01(block[y][x] + 0.5));
        }
      }
    }
  }
  return out;
}

CompressionResult roundtrip(const Codec& codec, const RasterImage& image, const QualityMap& qmap,
                            const std::vector<TextRegion>& regions) {
  const CompressedBlob blob = codec.compress(image, qmap);
  CompressionResult result;
  result.reconstruction = codec.decompress(blob);
  result.bpp = blob.bpp();
  result.per_region_psnr.reserve(regions.size());
  for (const auto& region : regions) {
    result.per_region_psnr.push_back(
        psnr(crop_region(image, region), crop_region(result.reconstruction, region)));
  }
  return result;
}

// ---- container ------------------------------------------------------------

namespace {

constexpr std::array<std::uint8_t, 4> kBlobMagic = {'T', 'I', 'Q', 'B'};
constexpr std::uint8_t kBlobVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> serialize_blob(const CompressedBlob& blob) {
  std::vector<std::uint8_t> out;
  out.reserve(18 + blob.payload.size());
  out.insert(out.end(), kBlobMagic.begin(), kBlobMagic.end());
  out.push_back(kBlobVersion);
  out.push_back(static_cast<std::uint8_t>(blob.backend));
  put_u32(out, static_cast<std::uint32_t>(blob.width));
  put_u32(out, static_cast<std::uint32_t>(blob.height));
  put_u32(out, static_cast<std::uint32_t>(blob.payload.size()));
  out.insert(out.end(), blob.payload.begin(), blob.payload.end());
  return out;
}

CompressedBlob parse_blob(const std::uint8_t* data, size_t size) {
  if (size < 18) throw CorruptStream("blob shorter than its header");
  if (!std::equal(kBlobMagic.begin(), kBlobMagic.end(), data)) {
    throw CorruptStream("bad blob magic");
  }
  if (data[4] != kBlobVersion) {
    throw CorruptStream("unsupported blob version " + std::to_string(data[4]));
  }
  CompressedBlob blob;
  if (data[5] > static_cast<std::uint8_t>(CodecBackend::kNeural)) {
    throw CorruptStream("unknown backend id " + std::to_string(data[5]));
  }
  blob.backend = static_cast<CodecBackend>(data[5]);
  blob.width = static_cast<int>(get_u32(data + 6));
  blob.height = static_cast<int>(get_u32(data + 10));
  const std::uint32_t payload_len = get_u32(data + 14);
  if (size - 18 < payload_len) throw CorruptStream("truncated blob payload");
  if (size - 18 > payload_len) throw CorruptStream("trailing garbage after blob payload");
  blob.payload.assign(data + 18, data + 18 + payload_len);
  return blob;
}

void save_blob(const CompressedBlob& blob, const std::filesystem::path& path) {
  const auto bytes = serialize_blob(blob);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write blob: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write: " + path.string());
}

CompressedBlob load_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open blob: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_blob(bytes.data(), bytes.size());
}

// ---- quality-map files ------------------------------------------------------

namespace {
constexpr std::array<char, 4> kQmapMagic = {'T', 'I', 'Q', 'Q'};
}

QualityMap load_quality_map(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  QualityMap qmap;
  if (ext == ".qmap") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open quality map: " + path.string());
    char magic[4];
    std::uint8_t dims[8];
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(dims), 8);
    if (!in || !std::equal(kQmapMagic.begin(), kQmapMagic.end(), magic)) {
      throw FormatError("bad quality-map sidecar header: " + path.string());
    }
    const int w = static_cast<int>(get_u32(dims));
    const int h = static_cast<int>(get_u32(dims + 4));
    if (w < 1 || h < 1) throw FormatError("bad quality-map dimensions: " + path.string());
    qmap = QualityMap(w, h);
    static_assert(sizeof(float) == 4);
    in.read(reinterpret_cast<char*>(qmap.weights.data()),
            static_cast<std::streamsize>(qmap.weights.size() * sizeof(float)));
    if (!in) throw FormatError("truncated quality-map sidecar: " + path.string());
  } else {
    const RasterImage img = load_image(path);
    qmap = QualityMap(img.width, img.height);
    qmap.weights.assign(img.pixels.begin(), img.pixels.end());
  }
  qmap.validate();
  return qmap;
}

void save_quality_map(const QualityMap& qmap, const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".qmap") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write quality map: " + path.string());
    out.write(kQmapMagic.data(), 4);
    std::vector<std::uint8_t> dims;
    put_u32(dims, static_cast<std::uint32_t>(qmap.width));
    put_u32(dims, static_cast<std::uint32_t>(qmap.height));
    out.write(reinterpret_cast<const char*>(dims.data()), 8);
    out.write(reinterpret_cast<const char*>(qmap.weights.data()),
              static_cast<std::streamsize>(qmap.weights.size() * sizeof(float)));
    if (!out) throw IoError("short write: " + path.string());
  } else {
    RasterImage img(qmap.width, qmap.height);
    img.pixels.assign(qmap.weights.begin(), qmap.weights.end());
    save_image(img, path);
  }
}

}  // namespace textiq
