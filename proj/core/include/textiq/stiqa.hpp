#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "textiq/image.hpp"
#include "textiq/labels.hpp"
#include "textiq/nn.hpp"

namespace textiq {

enum class StiqaVariant {
  kProbOnly = 0,         // recognizer branch, pooled straight into the head
  kProbTransformer = 1,  // recognizer branch + encoder self-attention
  kFull = 2,             // + conv image branch fused by decoder cross-attention
};

std::string to_string(StiqaVariant v);
StiqaVariant stiqa_variant_from_string(const std::string& s);

struct StiqaConfig {
  int embed_dim = 128;
  int num_heads = 4;
  int encoder_layers = 2;
  int decoder_layers = 2;
  double epsilon = 0.1;
  double learning_rate = 1e-3;
  int batch_size = 16;
  int epochs = 500;
  std::uint64_t seed = 1;

  StiqaVariant variant = StiqaVariant::kFull;
  bool freeze_prob_branch = false;
  std::uint64_t val_split_seed = 17;  // recorded in the model artifact

  // Which loss terms train the regressor (both on reproduces the default).
  bool use_l1 = true;
  bool use_epsilon = true;

  // Optional early exit once held-out metrics reach these (0 disables).
  double target_val_spearman = 0.0;
  double target_val_mae = 0.0;

  void validate() const {
    require(embed_dim >= 8, "embed_dim too small");
    require(num_heads >= 1 && embed_dim % num_heads == 0,
            "embed_dim must be divisible by num_heads");
    require(encoder_layers >= 1 && decoder_layers >= 1, "layer counts must be positive");
    require(epsilon >= 0.0, "epsilon must be non-negative");
    require(batch_size >= 1 && epochs >= 1, "batch_size and epochs must be positive");
    require(use_l1 || use_epsilon, "at least one loss term must be enabled");
  }
};

// The 80:20 shuffle both training and the experiment harness use, so held-out
// indices agree everywhere.
struct DatasetSplit {
  std::vector<size_t> train;
  std::vector<size_t> val;
};
DatasetSplit stiqa_split(size_t n, std::uint64_t seed);

struct QualityScore {
  double value = 0.0;  // strictly inside (0,1)
};

// Pure loss functions (the model trains on their sum).
inline double epsilon_loss(double gt, double pred, double epsilon) {
  require(epsilon >= 0.0, "epsilon must be non-negative");
  const double err = std::abs(gt - pred);
  return err >= epsilon ? err - epsilon : 0.0;
}

inline double total_loss(double gt, double pred, double epsilon) {
  return std::abs(gt - pred) + epsilon_loss(gt, pred, epsilon);
}

// ---- network -------------------------------------------------------------
// Templated on the scalar so training runs in float while gradient checks can
// instantiate the identical architecture in double.

template <typename S>
class StiqaNet {
 public:
  using Tape = nn::Tape<S>;
  using Ref = typename Tape::Ref;

  struct Forward {
    Ref score = nullptr;       // 1x1 sigmoid output
    Ref char_probs = nullptr;  // [T x 37] softmax rows
  };

  static constexpr int kSeqLen = 16;     // recognizer positions after downsampling
  static constexpr int kGruHidden = 48;
  static constexpr int kCrnnC1 = 12;
  static constexpr int kCrnnC2 = 24;
  static constexpr int kCrnnC3 = 32;
  static constexpr int kImgC1 = 16;
  static constexpr int kImgC2 = 32;
  static constexpr int kImgTokens = 64;  // 4 x 16 grid

  explicit StiqaNet(const StiqaConfig& config) : config_(config) {
    config_.validate();
    build_params();
    Rng rng(config_.seed);
    for (auto& p : params_.all()) {
      // Biases and norm gains/offsets keep their zero/one defaults.
      if (p->name.find("_b") != std::string::npos ||
          p->name.find("ln") != std::string::npos ||
          p->name.find("norm") != std::string::npos) {
        continue;
      }
      nn::init_uniform(*p, rng, static_cast<double>(p->value.rows()),
                       static_cast<double>(p->value.cols()));
    }
  }

  const StiqaConfig& config() const { return config_; }
  nn::ParamStore<S>& params() { return params_; }
  const nn::ParamStore<S>& params() const { return params_; }

  void set_prob_branch_trainable(bool trainable) {
    for (auto& p : params_.all()) {
      if (p->name.rfind("crnn.", 0) == 0) p->trainable = trainable;
    }
  }

  // Builds the forward graph for one 32x128 sample. When `training` is false
  // parameters enter the graph as constants and no backward closures build.
  Forward forward(Tape& tape, const RasterImage& region, bool training) {
    require(region.width == kAssessWidth && region.height == kAssessHeight,
            "assess input must be 32x128");

    auto P = [&](Param& p) -> Ref {
      return training ? tape.leaf(p) : tape.constant(p.value);
    };

    // Input grid [positions x 1], centered.
    nn::Mat<S> input(static_cast<Eigen::Index>(kAssessHeight) * kAssessWidth, 1);
    for (int y = 0; y < kAssessHeight; ++y) {
      for (int x = 0; x < kAssessWidth; ++x) {
        input(static_cast<Eigen::Index>(y) * kAssessWidth + x, 0) =
            static_cast<S>(region.at(x, y)) - S(0.5);
      }
    }
    Ref img = tape.constant(std::move(input));

    Forward out;
    Ref probs = prob_branch(tape, img, P);
    out.char_probs = probs;

    if (config_.variant == StiqaVariant::kProbOnly) {
      Ref pooled = tape.mean_rows(probs);
      Ref h = tape.gelu(tape.add_row_broadcast(tape.matmul(pooled, P(*p_.phead1_w)),
                                               P(*p_.phead1_b)));
      Ref logit = tape.add_row_broadcast(tape.matmul(h, P(*p_.phead2_w)), P(*p_.phead2_b));
      out.score = tape.sigmoid(logit);
      return out;
    }

    // Embed probability rows and add the sequence positional encoding.
    Ref x = tape.add_row_broadcast(tape.matmul(probs, P(*p_.embed_w)), P(*p_.embed_b));
    x = tape.add(x, tape.constant(rpe_));
    for (auto& layer : p_.encoder) {
      Ref normed = tape.layernorm_rows(x, P(*layer.ln1_g), P(*layer.ln1_b));
      x = tape.add(x, attention(tape, normed, normed, layer, P));
      Ref normed2 = tape.layernorm_rows(x, P(*layer.ln2_g), P(*layer.ln2_b));
      x = tape.add(x, ffn(tape, normed2, layer, P));
    }
    Ref enc_out = tape.layernorm_rows(x, P(*p_.enc_norm_g), P(*p_.enc_norm_b));

    if (config_.variant == StiqaVariant::kProbTransformer) {
      Ref pooled = tape.mean_rows(enc_out);
      out.score = head(tape, pooled, P);
      return out;
    }

    // Image branch: 7x7 window first, then one more downsampling stage.
    nn::ConvSpec cv1{nn::GridShape{kAssessHeight, kAssessWidth, 1}, 7, 4, 3, kImgC1};
    Ref f = tape.gelu(tape.add_row_broadcast(
        tape.matmul(tape.im2col(img, cv1), P(*p_.img1_w)), P(*p_.img1_b)));
    nn::ConvSpec cv2{cv1.out(), 3, 2, 1, kImgC2};
    f = tape.gelu(tape.add_row_broadcast(tape.matmul(tape.im2col(f, cv2), P(*p_.img2_w)),
                                         P(*p_.img2_b)));
    Ref y = tape.add_row_broadcast(tape.matmul(f, P(*p_.img_proj_w)), P(*p_.img_proj_b));
    y = tape.add(y, tape.constant(fpe_));

    for (auto& layer : p_.decoder) {
      Ref normed = tape.layernorm_rows(y, P(*layer.ln1_g), P(*layer.ln1_b));
      y = tape.add(y, attention(tape, normed, enc_out, layer, P));
      Ref normed2 = tape.layernorm_rows(y, P(*layer.ln2_g), P(*layer.ln2_b));
      y = tape.add(y, ffn(tape, normed2, layer, P));
    }
    Ref final = tape.layernorm_rows(y, P(*p_.final_norm_g), P(*p_.final_norm_b));
    out.score = head(tape, tape.mean_rows(final), P);
    return out;
  }

  double assess_value(const RasterImage& region) {
    Tape tape;
    return static_cast<double>(forward(tape, region, false).score->value(0, 0));
  }

  CharProbSequence char_probs(const RasterImage& region) {
    Tape tape;
    Ref probs = forward(tape, region, false).char_probs;
    CharProbSequence seq;
    seq.rows.resize(static_cast<size_t>(probs->value.rows()));
    for (Eigen::Index r = 0; r < probs->value.rows(); ++r) {
      for (int c = 0; c < kNumCharClasses; ++c) {
        seq.rows[static_cast<size_t>(r)][c] = static_cast<double>(probs->value(r, c));
      }
    }
    return seq;
  }

 private:
  using Param = nn::Param<S>;
  using Getter = std::function<Ref(Param&)>;

  struct AttnLayer {
    Param* ln1_g;
    Param* ln1_b;
    Param* wq;
    Param* bq;
    Param* wk;
    Param* bk;
    Param* wv;
    Param* bv;
    Param* wo;
    Param* bo;
    Param* ln2_g;
    Param* ln2_b;
    Param* ffn1_w;
    Param* ffn1_b;
    Param* ffn2_w;
    Param* ffn2_b;
  };

  struct Named {
    // CRNN recognizer head
    Param* crnn1_w;
    Param* crnn1_b;
    Param* crnn2_w;
    Param* crnn2_b;
    Param* crnn3_w;
    Param* crnn3_b;
    Param* gru_wz;
    Param* gru_uz;
    Param* gru_bz;
    Param* gru_wr;
    Param* gru_ur;
    Param* gru_br;
    Param* gru_wh;
    Param* gru_uh;
    Param* gru_bh;
    Param* crnn_out_w;
    Param* crnn_out_b;
    // shared-space embedding + transformer
    Param* embed_w = nullptr;
    Param* embed_b = nullptr;
    std::vector<AttnLayer> encoder;
    Param* enc_norm_g = nullptr;
    Param* enc_norm_b = nullptr;
    // image branch + decoder
    Param* img1_w = nullptr;
    Param* img1_b = nullptr;
    Param* img2_w = nullptr;
    Param* img2_b = nullptr;
    Param* img_proj_w = nullptr;
    Param* img_proj_b = nullptr;
    std::vector<AttnLayer> decoder;
    Param* final_norm_g = nullptr;
    Param* final_norm_b = nullptr;
    // heads
    Param* head1_w = nullptr;
    Param* head1_b = nullptr;
    Param* head2_w = nullptr;
    Param* head2_b = nullptr;
    Param* phead1_w = nullptr;
    Param* phead1_b = nullptr;
    Param* phead2_w = nullptr;
    Param* phead2_b = nullptr;
  };

  static nn::Mat<S> sinusoidal_encoding(int length, int dim) {
    nn::Mat<S> pe(length, dim);
    for (int pos = 0; pos < length; ++pos) {
      for (int i = 0; i < dim; ++i) {
        const double angle = pos / std::pow(10000.0, 2.0 * (i / 2) / dim);
        pe(pos, i) = static_cast<S>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
      }
    }
    return pe;
  }

  AttnLayer make_attn_layer(const std::string& prefix, int ffn_dim) {
    const int e = config_.embed_dim;
    AttnLayer l;
    l.ln1_g = &params_.add(prefix + ".ln1_g", 1, e);
    l.ln1_g->value.setOnes();
    l.ln1_b = &params_.add(prefix + ".ln1_b", 1, e);
    l.wq = &params_.add(prefix + ".wq", e, e);
    l.bq = &params_.add(prefix + ".bq", 1, e);
    l.wk = &params_.add(prefix + ".wk", e, e);
    l.bk = &params_.add(prefix + ".bk", 1, e);
    l.wv = &params_.add(prefix + ".wv", e, e);
    l.bv = &params_.add(prefix + ".bv", 1, e);
    l.wo = &params_.add(prefix + ".wo", e, e);
    l.bo = &params_.add(prefix + ".bo", 1, e);
    l.ln2_g = &params_.add(prefix + ".ln2_g", 1, e);
    l.ln2_g->value.setOnes();
    l.ln2_b = &params_.add(prefix + ".ln2_b", 1, e);
    l.ffn1_w = &params_.add(prefix + ".ffn1_w", e, ffn_dim);
    l.ffn1_b = &params_.add(prefix + ".ffn1_b", 1, ffn_dim);
    l.ffn2_w = &params_.add(prefix + ".ffn2_w", ffn_dim, e);
    l.ffn2_b = &params_.add(prefix + ".ffn2_b", 1, e);
    return l;
  }

  void build_params() {
    const int e = config_.embed_dim;
    const int ffn_dim = 2 * e;
    const int head_dim = std::max(16, e / 2);

    p_.crnn1_w = &params_.add("crnn.conv1_w", 9, kCrnnC1);
    p_.crnn1_b = &params_.add("crnn.conv1_b", 1, kCrnnC1);
    p_.crnn2_w = &params_.add("crnn.conv2_w", 9 * kCrnnC1, kCrnnC2);
    p_.crnn2_b = &params_.add("crnn.conv2_b", 1, kCrnnC2);
    p_.crnn3_w = &params_.add("crnn.conv3_w", 9 * kCrnnC2, kCrnnC3);
    p_.crnn3_b = &params_.add("crnn.conv3_b", 1, kCrnnC3);
    p_.gru_wz = &params_.add("crnn.gru_wz", kCrnnC3, kGruHidden);
    p_.gru_uz = &params_.add("crnn.gru_uz", kGruHidden, kGruHidden);
    p_.gru_bz = &params_.add("crnn.gru_bz", 1, kGruHidden);
    p_.gru_wr = &params_.add("crnn.gru_wr", kCrnnC3, kGruHidden);
    p_.gru_ur = &params_.add("crnn.gru_ur", kGruHidden, kGruHidden);
    p_.gru_br = &params_.add("crnn.gru_br", 1, kGruHidden);
    p_.gru_wh = &params_.add("crnn.gru_wh", kCrnnC3, kGruHidden);
    p_.gru_uh = &params_.add("crnn.gru_uh", kGruHidden, kGruHidden);
    p_.gru_bh = &params_.add("crnn.gru_bh", 1, kGruHidden);
    p_.crnn_out_w = &params_.add("crnn.out_w", kGruHidden, kNumCharClasses);
    p_.crnn_out_b = &params_.add("crnn.out_b", 1, kNumCharClasses);

    if (config_.variant == StiqaVariant::kProbOnly) {
      p_.phead1_w = &params_.add("phead.fc1_w", kNumCharClasses, 64);
      p_.phead1_b = &params_.add("phead.fc1_b", 1, 64);
      p_.phead2_w = &params_.add("phead.fc2_w", 64, 1);
      p_.phead2_b = &params_.add("phead.fc2_b", 1, 1);
      return;
    }

    p_.embed_w = &params_.add("embed_w", kNumCharClasses, e);
    p_.embed_b = &params_.add("embed_b", 1, e);
    rpe_ = sinusoidal_encoding(kSeqLen, e);
    for (int i = 0; i < config_.encoder_layers; ++i) {
      p_.encoder.push_back(make_attn_layer("enc" + std::to_string(i), ffn_dim));
    }
    p_.enc_norm_g = &params_.add("enc_norm_g", 1, e);
    p_.enc_norm_g->value.setOnes();
    p_.enc_norm_b = &params_.add("enc_norm_b", 1, e);

    p_.head1_w = &params_.add("head.fc1_w", e, head_dim);
    p_.head1_b = &params_.add("head.fc1_b", 1, head_dim);
    p_.head2_w = &params_.add("head.fc2_w", head_dim, 1);
    p_.head2_b = &params_.add("head.fc2_b", 1, 1);

    if (config_.variant == StiqaVariant::kProbTransformer) return;

    p_.img1_w = &params_.add("img.conv1_w", 49, kImgC1);
    p_.img1_b = &params_.add("img.conv1_b", 1, kImgC1);
    p_.img2_w = &params_.add("img.conv2_w", 9 * kImgC1, kImgC2);
    p_.img2_b = &params_.add("img.conv2_b", 1, kImgC2);
    p_.img_proj_w = &params_.add("img.proj_w", kImgC2, e);
    p_.img_proj_b = &params_.add("img.proj_b", 1, e);
    fpe_ = sinusoidal_encoding(kImgTokens, e);
    for (int i = 0; i < config_.decoder_layers; ++i) {
      p_.decoder.push_back(make_attn_layer("dec" + std::to_string(i), ffn_dim));
    }
    p_.final_norm_g = &params_.add("final_norm_g", 1, e);
    p_.final_norm_g->value.setOnes();
    p_.final_norm_b = &params_.add("final_norm_b", 1, e);
  }

  // CRNN: three stride-2 convs, height collapse, single GRU, per-step softmax.
  Ref prob_branch(Tape& tape, Ref img, const Getter& P) {
    nn::ConvSpec c1{nn::GridShape{kAssessHeight, kAssessWidth, 1}, 3, 2, 1, kCrnnC1};
    Ref f = tape.gelu(tape.add_row_broadcast(tape.matmul(tape.im2col(img, c1), P(*p_.crnn1_w)),
                                             P(*p_.crnn1_b)));
    nn::ConvSpec c2{c1.out(), 3, 2, 1, kCrnnC2};
    f = tape.gelu(tape.add_row_broadcast(tape.matmul(tape.im2col(f, c2), P(*p_.crnn2_w)),
                                         P(*p_.crnn2_b)));
    nn::ConvSpec c3{c2.out(), 3, 2, 1, kCrnnC3};
    f = tape.gelu(tape.add_row_broadcast(tape.matmul(tape.im2col(f, c3), P(*p_.crnn3_w)),
                                         P(*p_.crnn3_b)));

    // Collapse the 4-row grid into a width-ordered sequence by mean pooling.
    const auto grid = c3.out();
    nn::Mat<S> pool = nn::Mat<S>::Zero(kSeqLen, grid.positions());
    for (int t = 0; t < kSeqLen; ++t) {
      for (int y = 0; y < grid.h; ++y) {
        pool(t, y * grid.w + t) = S(1) / static_cast<S>(grid.h);
      }
    }
    Ref seq = tape.matmul(tape.constant(std::move(pool)), f);  // [T x C3]

    Ref ones = tape.constant(nn::Mat<S>::Ones(1, kGruHidden));
    Ref h = tape.constant(nn::Mat<S>::Zero(1, kGruHidden));
    std::vector<Ref> states;
    states.reserve(kSeqLen);
    for (int t = 0; t < kSeqLen; ++t) {
      Ref xt = tape.slice_rows(seq, t, 1);
      Ref z = tape.sigmoid(tape.add(tape.add(tape.matmul(xt, P(*p_.gru_wz)),
                                             tape.matmul(h, P(*p_.gru_uz))),
                                    P(*p_.gru_bz)));
      Ref r = tape.sigmoid(tape.add(tape.add(tape.matmul(xt, P(*p_.gru_wr)),
                                             tape.matmul(h, P(*p_.gru_ur))),
                                    P(*p_.gru_br)));
      Ref cand = tape.tanh(tape.add(tape.add(tape.matmul(xt, P(*p_.gru_wh)),
                                             tape.matmul(tape.mul(r, h), P(*p_.gru_uh))),
                                    P(*p_.gru_bh)));
      Ref keep = tape.add(ones, tape.scale(z, S(-1)));
      h = tape.add(tape.mul(keep, h), tape.mul(z, cand));
      states.push_back(h);
    }
    Ref hidden = tape.concat_rows(states);  // [T x hidden]
    Ref logits = tape.add_row_broadcast(tape.matmul(hidden, P(*p_.crnn_out_w)),
                                        P(*p_.crnn_out_b));
    return tape.softmax_rows(logits);
  }

  Ref attention(Tape& tape, Ref queries, Ref keys_values, AttnLayer& layer, const Getter& P) {
    const int e = config_.embed_dim;
    const int heads = config_.num_heads;
    const int dh = e / heads;
    Ref q = tape.add_row_broadcast(tape.matmul(queries, P(*layer.wq)), P(*layer.bq));
    Ref k = tape.add_row_broadcast(tape.matmul(keys_values, P(*layer.wk)), P(*layer.bk));
    Ref v = tape.add_row_broadcast(tape.matmul(keys_values, P(*layer.wv)), P(*layer.bv));
    std::vector<Ref> outs;
    outs.reserve(heads);
    const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
    for (int hd = 0; hd < heads; ++hd) {
      Ref qh = tape.slice_cols(q, hd * dh, dh);
      Ref kh = tape.slice_cols(k, hd * dh, dh);
      Ref vh = tape.slice_cols(v, hd * dh, dh);
      Ref scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), scale);
      Ref weights = tape.softmax_rows(scores);
      outs.push_back(tape.matmul(weights, vh));
    }
    Ref cat = tape.concat_cols(outs);
    return tape.add_row_broadcast(tape.matmul(cat, P(*layer.wo)), P(*layer.bo));
  }

  Ref ffn(Tape& tape, Ref x, AttnLayer& layer, const Getter& P) {
    Ref hth = tape.gelu(
        tape.add_row_broadcast(tape.matmul(x, P(*layer.ffn1_w)), P(*layer.ffn1_b)));
    return tape.add_row_broadcast(tape.matmul(hth, P(*layer.ffn2_w)), P(*layer.ffn2_b));
  }

  Ref head(Tape& tape, Ref pooled, const Getter& P) {
    Ref hidden = tape.gelu(
        tape.add_row_broadcast(tape.matmul(pooled, P(*p_.head1_w)), P(*p_.head1_b)));
    Ref logit =
        tape.add_row_broadcast(tape.matmul(hidden, P(*p_.head2_w)), P(*p_.head2_b));
    return tape.sigmoid(logit);
  }

  StiqaConfig config_;
  nn::ParamStore<S> params_;
  Named p_{};
  nn::Mat<S> rpe_;
  nn::Mat<S> fpe_;
};

// ---- public artifact -------------------------------------------------------

struct LabeledRegion {
  RasterImage image;  // 32x128 assessment crop
  double label = 0.0;
};

struct EvalMetrics {
  double mae = 0.0;
  double spearman = 0.0;
  double pearson = 0.0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_mae = 0.0;
  double val_spearman = 0.0;
};

class StiqaModel {
 public:
  explicit StiqaModel(const StiqaConfig& config);

  const StiqaConfig& config() const;
  QualityScore assess(const RasterImage& region_32x128) const;
  CharProbSequence char_probs(const RasterImage& region_32x128) const;

  StiqaNet<float>& net();
  const StiqaNet<float>& net() const;

 private:
  std::unique_ptr<StiqaNet<float>> net_;
};

using TrainCallback = std::function<void(const EpochStats&)>;

// Returns the parameter snapshot with the lowest validation MAE. Deterministic
// given config.seed; throws on an empty dataset or non-finite loss.
StiqaModel train_stiqa(const StiqaConfig& config, const std::vector<LabeledRegion>& data,
                       const TrainCallback& callback = nullptr);

EvalMetrics evaluate_stiqa(const StiqaModel& model, const std::vector<LabeledRegion>& data);

void save_stiqa_model(const StiqaModel& model, const std::filesystem::path& path);
StiqaModel load_stiqa_model(const std::filesystem::path& path);

}  // namespace textiq
