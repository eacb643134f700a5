#include "textiq/neural_codec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "textiq/range_coder.hpp"

namespace textiq {

namespace {

constexpr int kQualityRungs = 16;  // transmitted latent-resolution quality levels

using Tape = nn::Tape<float>;
using Ref = Tape::Ref;
using MatF = nn::Mat<float>;

MatF grid_from_image(const RasterImage& img, int pad_w, int pad_h) {
  MatF m(static_cast<Eigen::Index>(pad_h) * pad_w, 1);
  for (int y = 0; y < pad_h; ++y) {
    for (int x = 0; x < pad_w; ++x) {
      const int sx = std::min(x, img.width - 1);
      const int sy = std::min(y, img.height - 1);
      m(static_cast<Eigen::Index>(y) * pad_w + x, 0) = img.at(sx, sy);
    }
  }
  return m;
}

MatF grid_from_qmap(const QualityMap& qmap, int pad_w, int pad_h) {
  MatF m(static_cast<Eigen::Index>(pad_h) * pad_w, 1);
  for (int y = 0; y < pad_h; ++y) {
    for (int x = 0; x < pad_w; ++x) {
      const int sx = std::min(x, qmap.width - 1);
      const int sy = std::min(y, qmap.height - 1);
      m(static_cast<Eigen::Index>(y) * pad_w + x, 0) = qmap.at(sx, sy);
    }
  }
  return m;
}

// Mean-pool a [h*w x 1] grid down by 8 in each direction.
MatF pool8(const MatF& grid, int w, int h) {
  const int w8 = w / 8;
  const int h8 = h / 8;
  MatF out = MatF::Zero(static_cast<Eigen::Index>(h8) * w8, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out(static_cast<Eigen::Index>(y / 8) * w8 + x / 8, 0) +=
          grid(static_cast<Eigen::Index>(y) * w + x, 0) / 64.0f;
    }
  }
  return out;
}

}  // namespace

struct NeuralCodec::Net {
  NeuralCodecConfig config;
  nn::ParamStore<float> params;

  // encoder trunk
  nn::Param<float>*e1_w, *e1_b, *e2_w, *e2_b, *e3_w, *e3_b, *ez_w, *ez_b;
  // encoder-side condition pyramid (from the full-resolution qmap)
  nn::Param<float>*ce1_w, *ce1_b, *ce2_w, *ce2_b, *ce3_w, *ce3_b;
  // SFT injections, encoder
  nn::Param<float>*es1_s, *es1_t, *es2_s, *es2_t, *es3_s, *es3_t;
  // latent gain driven by local quality
  nn::Param<float>* gain;
  // decoder-side condition stack (from the transmitted latent-res quality)
  nn::Param<float>*cd3_w, *cd3_b, *cd2_w, *cd2_b, *cd1_w, *cd1_b;
  // decoder trunk
  nn::Param<float>*d3_w, *d3_b, *d2_w, *d2_b, *d1_w, *d1_b, *dout_w, *dout_b;
  // SFT injections, decoder
  nn::Param<float>*ds3_s, *ds3_t, *ds2_s, *ds2_t, *ds1_s, *ds1_t;

  explicit Net(NeuralCodecConfig cfg) : config(cfg) {
    config.validate();
    const int cc = config.cond_channels;
    const int cz = config.latent_channels;

    e1_w = &params.add("enc.c1_w", 9, 16);
    e1_b = &params.add("enc.c1_b", 1, 16);
    e2_w = &params.add("enc.c2_w", 9 * 16, 32);
    e2_b = &params.add("enc.c2_b", 1, 32);
    e3_w = &params.add("enc.c3_w", 9 * 32, 32);
    e3_b = &params.add("enc.c3_b", 1, 32);
    ez_w = &params.add("enc.z_w", 9 * 32, cz);
    ez_b = &params.add("enc.z_b", 1, cz);

    ce1_w = &params.add("cond_e.c1_w", 9, cc);
    ce1_b = &params.add("cond_e.c1_b", 1, cc);
    ce2_w = &params.add("cond_e.c2_w", 9 * cc, cc);
    ce2_b = &params.add("cond_e.c2_b", 1, cc);
    ce3_w = &params.add("cond_e.c3_w", 9 * cc, cc);
    ce3_b = &params.add("cond_e.c3_b", 1, cc);

    es1_s = &params.add("sft_e1.scale", cc, 16);
    es1_t = &params.add("sft_e1.shift", cc, 16);
    es2_s = &params.add("sft_e2.scale", cc, 32);
    es2_t = &params.add("sft_e2.shift", cc, 32);
    es3_s = &params.add("sft_e3.scale", cc, 32);
    es3_t = &params.add("sft_e3.shift", cc, 32);

    gain = &params.add("latent.gain", 1, cz);
    gain->value.setConstant(1.5f);  // bits grow with quality from step one

    cd3_w = &params.add("cond_d.c3_w", 9, cc);
    cd3_b = &params.add("cond_d.c3_b", 1, cc);
    cd2_w = &params.add("cond_d.c2_w", 9 * cc, cc);
    cd2_b = &params.add("cond_d.c2_b", 1, cc);
    cd1_w = &params.add("cond_d.c1_w", 9 * cc, cc);
    cd1_b = &params.add("cond_d.c1_b", 1, cc);

    d3_w = &params.add("dec.c3_w", 9 * cz, 32);
    d3_b = &params.add("dec.c3_b", 1, 32);
    d2_w = &params.add("dec.c2_w", 9 * 32, 32);
    d2_b = &params.add("dec.c2_b", 1, 32);
    d1_w = &params.add("dec.c1_w", 9 * 32, 16);
    d1_b = &params.add("dec.c1_b", 1, 16);
    dout_w = &params.add("dec.out_w", 9 * 16, 1);
    dout_b = &params.add("dec.out_b", 1, 1);

    ds3_s = &params.add("sft_d3.scale", cc, 32);
    ds3_t = &params.add("sft_d3.shift", cc, 32);
    ds2_s = &params.add("sft_d2.scale", cc, 32);
    ds2_t = &params.add("sft_d2.shift", cc, 32);
    ds1_s = &params.add("sft_d1.scale", cc, 16);
    ds1_t = &params.add("sft_d1.shift", cc, 16);

    Rng rng(config.seed);
    for (auto& p : params.all()) {
      if (p->name.find("_b") != std::string::npos || p->name == "latent.gain") continue;
      const double scale = p->name.find("sft_") == 0 ? 0.2 : 1.0;
      const double bound =
          scale * std::sqrt(6.0 / (p->value.rows() + p->value.cols()));
      for (Eigen::Index i = 0; i < p->value.size(); ++i) {
        p->value.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
      }
    }
  }

  Ref leaf(Tape& tape, nn::Param<float>& p, bool training) {
    return training ? tape.leaf(p) : tape.constant(p.value);
  }

  Ref conv(Tape& tape, Ref x, const nn::ConvSpec& spec, nn::Param<float>& w,
           nn::Param<float>& b, bool training, bool activate = true) {
    Ref y = tape.add_row_broadcast(tape.matmul(tape.im2col(x, spec), leaf(tape, w, training)),
                                   leaf(tape, b, training));
    return activate ? tape.gelu(y) : y;
  }

  Ref sft(Tape& tape, Ref x, Ref cond, nn::Param<float>& ws, nn::Param<float>& wt,
          bool training) {
    Ref s = tape.matmul(cond, leaf(tape, ws, training));
    Ref t = tape.matmul(cond, leaf(tape, wt, training));
    return tape.add(tape.add(x, tape.mul(x, s)), t);
  }

  struct Encoded {
    Ref z = nullptr;  // [latent positions x latent channels], gain applied
    int w8 = 0;
    int h8 = 0;
  };

  // `q_latent` is the quantized latent-resolution quality used for the gain
  // (it matches what the decoder will see).
  Encoded encode(Tape& tape, const MatF& image_grid, const MatF& qmap_grid,
                 const MatF& q_latent, int w, int h, bool training) {
    const int cc = config.cond_channels;
    Ref img = tape.constant(image_grid);
    Ref qm = tape.constant(qmap_grid);

    nn::ConvSpec q1{nn::GridShape{h, w, 1}, 3, 2, 1, cc};
    Ref c1 = conv(tape, qm, q1, *ce1_w, *ce1_b, training);
    nn::ConvSpec q2{q1.out(), 3, 2, 1, cc};
    Ref c2 = conv(tape, c1, q2, *ce2_w, *ce2_b, training);
    nn::ConvSpec q3{q2.out(), 3, 2, 1, cc};
    Ref c3 = conv(tape, c2, q3, *ce3_w, *ce3_b, training);

    nn::ConvSpec s1{nn::GridShape{h, w, 1}, 3, 2, 1, 16};
    Ref f = conv(tape, img, s1, *e1_w, *e1_b, training);
    f = sft(tape, f, c1, *es1_s, *es1_t, training);
    nn::ConvSpec s2{s1.out(), 3, 2, 1, 32};
    f = conv(tape, f, s2, *e2_w, *e2_b, training);
    f = sft(tape, f, c2, *es2_s, *es2_t, training);
    nn::ConvSpec s3{s2.out(), 3, 2, 1, 32};
    f = conv(tape, f, s3, *e3_w, *e3_b, training);
    f = sft(tape, f, c3, *es3_s, *es3_t, training);
    nn::ConvSpec sz{s3.out(), 3, 1, 1, config.latent_channels};
    Ref z = conv(tape, f, sz, *ez_w, *ez_b, training, /*activate=*/false);

    // Channel gain: exp(g_c * (q - 0.5)) with the transmitted local quality.
    Ref g = leaf(tape, *gain, training);
    Ref centered = tape.constant((q_latent.array() - 0.5f).matrix());
    Ref log_gain = tape.matmul(centered, g);  // [pos8 x cz]
    Encoded out;
    out.z = tape.mul(z, tape.expm(log_gain));
    out.w8 = w / 8;
    out.h8 = h / 8;
    return out;
  }

  Ref decode(Tape& tape, Ref z_hat, const MatF& q_latent, int w8, int h8, bool training) {
    const int cc = config.cond_channels;
    Ref ql = tape.constant(q_latent);

    nn::ConvSpec qc3{nn::GridShape{h8, w8, 1}, 3, 1, 1, cc};
    Ref c3 = conv(tape, ql, qc3, *cd3_w, *cd3_b, training);
    Ref c3_up = tape.upsample2x(c3, h8, w8);
    nn::ConvSpec qc2{nn::GridShape{2 * h8, 2 * w8, cc}, 3, 1, 1, cc};
    Ref c2 = conv(tape, c3_up, qc2, *cd2_w, *cd2_b, training);
    Ref c2_up = tape.upsample2x(c2, 2 * h8, 2 * w8);
    nn::ConvSpec qc1{nn::GridShape{4 * h8, 4 * w8, cc}, 3, 1, 1, cc};
    Ref c1 = conv(tape, c2_up, qc1, *cd1_w, *cd1_b, training);

    nn::ConvSpec t3{nn::GridShape{h8, w8, config.latent_channels}, 3, 1, 1, 32};
    Ref f = conv(tape, z_hat, t3, *d3_w, *d3_b, training);
    f = sft(tape, f, c3, *ds3_s, *ds3_t, training);
    f = tape.upsample2x(f, h8, w8);
    nn::ConvSpec t2{nn::GridShape{2 * h8, 2 * w8, 32}, 3, 1, 1, 32};
    f = conv(tape, f, t2, *d2_w, *d2_b, training);
    f = sft(tape, f, c2, *ds2_s, *ds2_t, training);
    f = tape.upsample2x(f, 2 * h8, 2 * w8);
    nn::ConvSpec t1{nn::GridShape{4 * h8, 4 * w8, 32}, 3, 1, 1, 16};
    f = conv(tape, f, t1, *d1_w, *d1_b, training);
    f = sft(tape, f, c1, *ds1_s, *ds1_t, training);
    f = tape.upsample2x(f, 4 * h8, 4 * w8);
    nn::ConvSpec tout{nn::GridShape{8 * h8, 8 * w8, 16}, 3, 1, 1, 1};
    return conv(tape, f, tout, *dout_w, *dout_b, training, /*activate=*/false);
  }
};

namespace {

// Quantize the pooled quality grid onto the transmitted rungs.
MatF quantize_q_latent(const MatF& pooled) {
  MatF out = pooled;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const int rung = static_cast<int>(std::lround(
        clamp01(static_cast<double>(out.data()[i])) * (kQualityRungs - 1)));
    out.data()[i] = static_cast<float>(rung) / (kQualityRungs - 1);
  }
  return out;
}

std::vector<int> q_latent_rungs(const MatF& q_latent) {
  std::vector<int> rungs(static_cast<size_t>(q_latent.size()));
  for (Eigen::Index i = 0; i < q_latent.size(); ++i) {
    rungs[static_cast<size_t>(i)] =
        static_cast<int>(std::lround(q_latent.data()[i] * (kQualityRungs - 1)));
  }
  return rungs;
}

QualityMap random_training_qmap(Rng& rng, int w, int h) {
  QualityMap qmap(w, h, 0.0f);
  const double pick = rng.uniform();
  if (pick < 0.4) {
    const float v = static_cast<float>(rng.uniform());
    std::fill(qmap.weights.begin(), qmap.weights.end(), v);
  } else if (pick < 0.7) {
    const bool horizontal = rng.uniform() < 0.5;
    const float a = static_cast<float>(rng.uniform());
    const float b = static_cast<float>(rng.uniform());
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const float t = horizontal ? static_cast<float>(x) / (w - 1)
                                   : static_cast<float>(y) / (h - 1);
        qmap.at(x, y) = a + (b - a) * t;
      }
    }
  } else {
    const float base = static_cast<float>(rng.uniform(0.0, 0.4));
    std::fill(qmap.weights.begin(), qmap.weights.end(), base);
    const int nrect = rng.uniform_int(1, 3);
    for (int i = 0; i < nrect; ++i) {
      const int rw = rng.uniform_int(w / 8, w / 2);
      const int rh = rng.uniform_int(h / 8, h / 2);
      const int rx = rng.uniform_int(0, w - rw - 1);
      const int ry = rng.uniform_int(0, h - rh - 1);
      const float v = static_cast<float>(rng.uniform(0.5, 1.0));
      for (int y = ry; y < ry + rh; ++y) {
        for (int x = rx; x < rx + rw; ++x) qmap.at(x, y) = v;
      }
    }
  }
  return qmap;
}

}  // namespace

NeuralCodec::NeuralCodec(NeuralCodecConfig config) : net_(std::make_unique<Net>(config)) {}
NeuralCodec::~NeuralCodec() = default;
NeuralCodec::NeuralCodec(NeuralCodec&&) noexcept = default;
NeuralCodec& NeuralCodec::operator=(NeuralCodec&&) noexcept = default;

const NeuralCodecConfig& NeuralCodec::config() const { return net_->config; }

CompressedBlob NeuralCodec::compress(const RasterImage& image, const QualityMap& qmap) const {
  require(image.width == qmap.width && image.height == qmap.height,
          "image and quality map dimensions differ");
  qmap.validate();
  const int pad_w = (image.width + 7) / 8 * 8;
  const int pad_h = (image.height + 7) / 8 * 8;

  const MatF img_grid = grid_from_image(image, pad_w, pad_h);
  const MatF qmap_grid = grid_from_qmap(qmap, pad_w, pad_h);
  const MatF q_latent = quantize_q_latent(pool8(qmap_grid, pad_w, pad_h));

  Tape tape;
  const auto encoded = net_->encode(tape, img_grid, qmap_grid, q_latent, pad_w, pad_h, false);

  RangeEncoder enc;
  // Latent-resolution quality rungs, delta-flagged against the previous cell.
  const auto rungs = q_latent_rungs(q_latent);
  BitModel q_same;
  int prev = kQualityRungs / 2;
  for (int r : rungs) {
    if (r == prev) {
      enc.encode_bit(q_same, 0);
    } else {
      enc.encode_bit(q_same, 1);
      enc.encode_direct(static_cast<std::uint32_t>(r), 4);
    }
    prev = r;
  }
  // Latent levels, channel-context magnitude coding.
  const auto& z = encoded.z->value;
  std::vector<BitModel> zero_flags(static_cast<size_t>(z.cols()));
  std::vector<std::vector<BitModel>> magnitudes(static_cast<size_t>(z.cols()));
  for (Eigen::Index pos = 0; pos < z.rows(); ++pos) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      const long level = std::lround(static_cast<double>(z(pos, c)));
      if (level == 0) {
        enc.encode_bit(zero_flags[static_cast<size_t>(c)], 0);
      } else {
        enc.encode_bit(zero_flags[static_cast<size_t>(c)], 1);
        enc.encode_direct(level < 0 ? 1 : 0, 1);
        enc.encode_magnitude(magnitudes[static_cast<size_t>(c)],
                             static_cast<std::uint32_t>(std::labs(level) - 1));
      }
    }
  }

  CompressedBlob blob;
  blob.backend = CodecBackend::kNeural;
  blob.width = image.width;
  blob.height = image.height;
  blob.payload = enc.finish();
  return blob;
}

RasterImage NeuralCodec::decompress(const CompressedBlob& blob) const {
  require(blob.backend == CodecBackend::kNeural, "blob was produced by a different backend");
  require(blob.width >= 1 && blob.height >= 1, "blob header has empty dimensions");
  const int pad_w = (blob.width + 7) / 8 * 8;
  const int pad_h = (blob.height + 7) / 8 * 8;
  const int w8 = pad_w / 8;
  const int h8 = pad_h / 8;
  const Eigen::Index latent_positions = static_cast<Eigen::Index>(w8) * h8;

  RangeDecoder dec(blob.payload.data(), blob.payload.size());
  MatF q_latent(latent_positions, 1);
  BitModel q_same;
  int prev = kQualityRungs / 2;
  for (Eigen::Index i = 0; i < latent_positions; ++i) {
    int r = prev;
    if (dec.decode_bit(q_same) == 1) {
      r = static_cast<int>(dec.decode_direct(4));
    }
    q_latent(i, 0) = static_cast<float>(r) / (kQualityRungs - 1);
    prev = r;
  }

  MatF z(latent_positions, net_->config.latent_channels);
  std::vector<BitModel> zero_flags(static_cast<size_t>(z.cols()));
  std::vector<std::vector<BitModel>> magnitudes(static_cast<size_t>(z.cols()));
  for (Eigen::Index pos = 0; pos < z.rows(); ++pos) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      float v = 0.0f;
      if (dec.decode_bit(zero_flags[static_cast<size_t>(c)]) == 1) {
        const int sign = dec.decode_direct(1) ? -1 : 1;
        v = static_cast<float>(
            sign * (static_cast<long>(dec.decode_magnitude(magnitudes[static_cast<size_t>(c)])) + 1));
      }
      z(pos, c) = v;
    }
  }

  Tape tape;
  Ref z_node = tape.constant(std::move(z));
  Ref recon = net_->decode(tape, z_node, q_latent, w8, h8, false);

  RasterImage out(blob.width, blob.height);
  for (int y = 0; y < blob.height; ++y) {
    for (int x = 0; x < blob.width; ++x) {
      out.at(x, y) = static_cast<float>(
          clamp01(static_cast<double>(recon->value(static_cast<Eigen::Index>(y) * pad_w + x, 0))));
    }
  }
  return out;
}

void NeuralCodec::train(const std::vector<RasterImage>& corpus, const Callback& callback) {
  require(!corpus.empty(), "neural codec training needs a non-empty corpus");
  auto& net = *net_;
  const auto& cfg = net.config;
  const int crop = cfg.crop;

  nn::Adam<float> optimizer(nn::AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
  Rng rng(cfg.seed);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    double epoch_dist = 0.0;
    double epoch_rate = 0.0;
    int steps = 0;
    const int steps_per_epoch =
        std::max<int>(1, static_cast<int>(corpus.size() + cfg.batch_size - 1) / cfg.batch_size);
    for (int s = 0; s < steps_per_epoch; ++s) {
      Tape tape;
      Ref total = nullptr;
      double batch_rate = 0.0;
      double batch_dist = 0.0;
      for (int b = 0; b < cfg.batch_size; ++b) {
        const RasterImage& src = corpus[rng.uniform_index(corpus.size())];
        require(src.width >= crop && src.height >= crop,
                "corpus image smaller than the training crop");
        const int ox = static_cast<int>(rng.uniform_index(src.width - crop + 1));
        const int oy = static_cast<int>(rng.uniform_index(src.height - crop + 1));
        const RasterImage patch = crop_box(src, Box{ox, oy, crop, crop});
        const QualityMap qmap = random_training_qmap(rng, crop, crop);

        const MatF img_grid = grid_from_image(patch, crop, crop);
        const MatF qmap_grid = grid_from_qmap(qmap, crop, crop);
        const MatF q_pooled = pool8(qmap_grid, crop, crop);
        const MatF q_latent = quantize_q_latent(q_pooled);

        auto encoded = net.encode(tape, img_grid, qmap_grid, q_latent, crop, crop, true);

        // Additive-noise relaxation of rounding.
        MatF noise(encoded.z->value.rows(), encoded.z->value.cols());
        for (Eigen::Index i = 0; i < noise.size(); ++i) {
          noise.data()[i] = static_cast<float>(rng.uniform() - 0.5);
        }
        Ref z_noisy = tape.add(encoded.z, tape.constant(std::move(noise)));

        Ref recon = net.decode(tape, z_noisy, q_latent, encoded.w8, encoded.h8, true);

        // Distortion weighted toward high-quality pixels; rate weighted toward
        // low-quality latents so bits migrate to where quality is wanted.
        MatF dist_w = (qmap_grid.array() + 0.1f).matrix() *
                      static_cast<float>(cfg.distortion_weight /
                                         static_cast<double>(crop * crop));
        Ref distortion = tape.weighted_sq_error(recon, img_grid, dist_w);
        MatF rate_w = MatF::Constant(encoded.z->value.rows(), encoded.z->value.cols(),
                                     static_cast<float>(cfg.rate_weight /
                                                        static_cast<double>(crop * crop)));
        for (Eigen::Index pos = 0; pos < rate_w.rows(); ++pos) {
          rate_w.row(pos) *= (1.5f - q_latent(pos, 0));
        }
        Ref rate = tape.rate_bits(z_noisy, rate_w);

        Ref loss = tape.add(distortion, rate);
        total = total ? tape.add(total, loss) : loss;
        batch_dist += distortion->value(0, 0);
        batch_rate += rate->value(0, 0);
      }
      total = tape.scale(total, 1.0f / static_cast<float>(cfg.batch_size));
      const double loss_value = static_cast<double>(total->value(0, 0));
      if (!std::isfinite(loss_value)) {
        throw Error("non-finite codec training loss at epoch " + std::to_string(epoch));
      }
      net.params.zero_grads();
      tape.backward(total);
      optimizer.step(net.params);
      epoch_loss += loss_value;
      epoch_dist += batch_dist / cfg.batch_size;
      epoch_rate += batch_rate / cfg.batch_size;
      ++steps;
    }
    if (callback) {
      callback(TrainStats{epoch, epoch_loss / steps, epoch_dist / steps, epoch_rate / steps});
    }
  }
}

// ---- serialization ---------------------------------------------------------

namespace {
constexpr char kNcMagic[4] = {'T', 'I', 'Q', 'N'};
}

void NeuralCodec::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write codec model: " + path.string());
  out.write(kNcMagic, 4);
  const auto& cfg = net_->config;
  const std::int32_t header[4] = {1, cfg.latent_channels, cfg.cond_channels,
                                  static_cast<std::int32_t>(net_->params.all().size())};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  for (const auto& p : net_->params.all()) {
    const std::uint32_t name_len = static_cast<std::uint32_t>(p->name.size());
    const std::uint32_t rows = static_cast<std::uint32_t>(p->value.rows());
    const std::uint32_t cols = static_cast<std::uint32_t>(p->value.cols());
    out.write(reinterpret_cast<const char*>(&name_len), 4);
    out.write(p->name.data(), name_len);
    out.write(reinterpret_cast<const char*>(&rows), 4);
    out.write(reinterpret_cast<const char*>(&cols), 4);
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  }
  if (!out) throw IoError("short write: " + path.string());
}

NeuralCodec NeuralCodec::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open codec model: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kNcMagic)) {
    throw FormatError("not a codec model file: " + path.string());
  }
  std::int32_t header[4];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || header[0] != 1) throw FormatError("unsupported codec model version");

  NeuralCodecConfig cfg;
  cfg.latent_channels = header[1];
  cfg.cond_channels = header[2];
  NeuralCodec codec(cfg);
  auto& params = codec.net_->params.all();
  if (static_cast<size_t>(header[3]) != params.size()) {
    throw FormatError("codec model parameter count mismatch");
  }
  for (std::int32_t i = 0; i < header[3]; ++i) {
    std::uint32_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), 4);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    std::uint32_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), 4);
    in.read(reinterpret_cast<char*>(&cols), 4);
    auto it = std::find_if(params.begin(), params.end(),
                           [&](const auto& p) { return p->name == name; });
    if (it == params.end()) throw FormatError("unknown codec parameter: " + name);
    auto& p = **it;
    if (p.value.rows() != static_cast<Eigen::Index>(rows) ||
        p.value.cols() != static_cast<Eigen::Index>(cols)) {
      throw FormatError("codec parameter shape mismatch: " + name);
    }
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.size() * sizeof(float)));
    if (!in) throw FormatError("truncated codec model file");
  }
  return codec;
}

}  // namespace textiq
