#include "textiq/stiqa.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "textiq/metrics.hpp"

namespace textiq {

std::string to_string(StiqaVariant v) {
  switch (v) {
    case StiqaVariant::kProbOnly:
      return "prob_only";
    case StiqaVariant::kProbTransformer:
      return "prob_transformer";
    case StiqaVariant::kFull:
      return "full";
  }
  throw InvalidArgument("unknown variant");
}

StiqaVariant stiqa_variant_from_string(const std::string& s) {
  if (s == "prob_only") return StiqaVariant::kProbOnly;
  if (s == "prob_transformer") return StiqaVariant::kProbTransformer;
  if (s == "full") return StiqaVariant::kFull;
  throw InvalidArgument("unknown model variant: " + s);
}

StiqaModel::StiqaModel(const StiqaConfig& config)
    : net_(std::make_unique<StiqaNet<float>>(config)) {
  net_->set_prob_branch_trainable(!config.freeze_prob_branch);
}

const StiqaConfig& StiqaModel::config() const { return net_->config(); }

QualityScore StiqaModel::assess(const RasterImage& region) const {
  return QualityScore{net_->assess_value(region)};
}

CharProbSequence StiqaModel::char_probs(const RasterImage& region) const {
  return net_->char_probs(region);
}

StiqaNet<float>& StiqaModel::net() { return *net_; }
const StiqaNet<float>& StiqaModel::net() const { return *net_; }

DatasetSplit stiqa_split(size_t n, std::uint64_t seed) {
  require(n >= 2, "split needs at least two samples");
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(seed);
  for (size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_index(i)]);
  }
  // 80:20, with at least one sample on each side.
  size_t val_count = std::max<size_t>(1, static_cast<size_t>(std::lround(0.2 * n)));
  val_count = std::min(val_count, n - 1);
  DatasetSplit split;
  split.val.assign(order.begin(), order.begin() + val_count);
  split.train.assign(order.begin() + val_count, order.end());
  return split;
}

namespace {

// strict: zero-variance correlations raise (the documented evaluate behavior).
// lenient: the training loop reports 0 instead so constant-label validation
// sets still train.
EvalMetrics metrics_over(StiqaNet<float>& net, const std::vector<LabeledRegion>& data,
                         const std::vector<size_t>& indices, bool strict) {
  std::vector<double> labels;
  std::vector<double> preds;
  labels.reserve(indices.size());
  preds.reserve(indices.size());
  for (size_t i : indices) {
    labels.push_back(data[i].label);
    preds.push_back(net.assess_value(data[i].image));
  }
  EvalMetrics metrics;
  metrics.mae = mean_absolute_error(labels, preds);
  if (strict) {
    metrics.spearman = spearman(labels, preds);
    metrics.pearson = pearson(labels, preds);
    return metrics;
  }
  try {
    metrics.spearman = spearman(labels, preds);
    metrics.pearson = pearson(labels, preds);
  } catch (const InvalidArgument&) {
    metrics.spearman = 0.0;
    metrics.pearson = 0.0;
  }
  return metrics;
}

}  // namespace

StiqaModel train_stiqa(const StiqaConfig& config, const std::vector<LabeledRegion>& data,
                       const TrainCallback& callback) {
  config.validate();
  require(data.size() >= 2, "training needs at least two labeled regions");
  for (const auto& item : data) {
    require(item.label >= 0.0 && item.label <= 1.0, "labels must be in [0,1]");
  }

  StiqaModel model(config);
  auto& net = model.net();
  auto& params = net.params();

  const DatasetSplit split = stiqa_split(data.size(), config.val_split_seed);
  nn::Adam<float> optimizer(nn::AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8});

  Rng shuffle_rng(config.seed ^ 0xa5a5a5a5ull);
  std::vector<size_t> order = split.train;

  std::vector<double> best_params;
  double best_val_mae = std::numeric_limits<double>::infinity();

  const float epsilon = static_cast<float>(config.epsilon);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
    }

    double epoch_loss = 0.0;
    size_t batches = 0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t end = std::min(order.size(), start + config.batch_size);
      nn::Tape<float> tape;
      typename nn::Tape<float>::Ref total = nullptr;
      for (size_t k = start; k < end; ++k) {
        const auto& item = data[order[k]];
        auto fwd = net.forward(tape, item.image, true);
        auto loss = tape.quality_loss(fwd.score, static_cast<float>(item.label), epsilon,
                                      config.use_l1, config.use_epsilon);
        total = total ? tape.add(total, loss) : loss;
      }
      total = tape.scale(total, 1.0f / static_cast<float>(end - start));
      const double batch_loss = static_cast<double>(total->value(0, 0));
      if (!std::isfinite(batch_loss)) {
        throw Error("non-finite training loss at epoch " + std::to_string(epoch) +
                    ", batch " + std::to_string(batches));
      }
      params.zero_grads();
      tape.backward(total);
      optimizer.step(params);
      epoch_loss += batch_loss;
      ++batches;
    }

    const EvalMetrics val = metrics_over(net, data, split.val, /*strict=*/false);
    if (val.mae < best_val_mae) {
      best_val_mae = val.mae;
      best_params = params.flatten_values();
    }
    if (callback) {
      callback(EpochStats{epoch, epoch_loss / std::max<size_t>(1, batches), val.mae,
                          val.spearman});
    }
    const bool spearman_ok =
        config.target_val_spearman <= 0.0 || val.spearman >= config.target_val_spearman;
    const bool mae_ok = config.target_val_mae <= 0.0 || val.mae <= config.target_val_mae;
    const bool any_target = config.target_val_spearman > 0.0 || config.target_val_mae > 0.0;
    if (any_target && spearman_ok && mae_ok) break;
  }

  if (!best_params.empty()) params.unflatten_values(best_params);
  return model;
}

EvalMetrics evaluate_stiqa(const StiqaModel& model, const std::vector<LabeledRegion>& data) {
  require(data.size() >= 2, "evaluation needs at least two regions");
  std::vector<size_t> indices(data.size());
  std::iota(indices.begin(), indices.end(), size_t{0});
  // net() is const-safe here: inference does not touch parameters.
  return metrics_over(const_cast<StiqaModel&>(model).net(), data, indices, /*strict=*/true);
}

// ---- serialization -----------------------------------------------------
// "TIQM", u32 version, u32 config-block length, config key=value text,
// u32 param count, then per parameter: name, rows, cols, f32 data (LE).

namespace {

constexpr char kModelMagic[4] = {'T', 'I', 'Q', 'M'};
constexpr std::uint32_t kModelVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError("truncated model file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string config_text(const StiqaConfig& c) {
  std::ostringstream out;
  out << "embed_dim=" << c.embed_dim << "\n";
  out << "num_heads=" << c.num_heads << "\n";
  out << "encoder_layers=" << c.encoder_layers << "\n";
  out << "decoder_layers=" << c.decoder_layers << "\n";
  out << "epsilon=" << c.epsilon << "\n";
  out << "learning_rate=" << c.learning_rate << "\n";
  out << "batch_size=" << c.batch_size << "\n";
  out << "epochs=" << c.epochs << "\n";
  out << "seed=" << c.seed << "\n";
  out << "variant=" << to_string(c.variant) << "\n";
  out << "freeze_prob_branch=" << (c.freeze_prob_branch ? 1 : 0) << "\n";
  out << "val_split_seed=" << c.val_split_seed << "\n";
  out << "use_l1=" << (c.use_l1 ? 1 : 0) << "\n";
  out << "use_epsilon=" << (c.use_epsilon ? 1 : 0) << "\n";
  return out.str();
}

StiqaConfig config_from_text(const std::string& text) {
  StiqaConfig c;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "embed_dim") c.embed_dim = std::stoi(value);
    else if (key == "num_heads") c.num_heads = std::stoi(value);
    else if (key == "encoder_layers") c.encoder_layers = std::stoi(value);
    else if (key == "decoder_layers") c.decoder_layers = std::stoi(value);
    else if (key == "epsilon") c.epsilon = std::stod(value);
    else if (key == "learning_rate") c.learning_rate = std::stod(value);
    else if (key == "batch_size") c.batch_size = std::stoi(value);
    else if (key == "epochs") c.epochs = std::stoi(value);
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "variant") c.variant = stiqa_variant_from_string(value);
    else if (key == "freeze_prob_branch") c.freeze_prob_branch = value == "1";
    else if (key == "val_split_seed") c.val_split_seed = std::stoull(value);
    else if (key == "use_l1") c.use_l1 = value == "1";
    else if (key == "use_epsilon") c.use_epsilon = value == "1";
  }
  return c;
}

}  // namespace

void save_stiqa_model(const StiqaModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model: " + path.string());
  out.write(kModelMagic, 4);
  write_u32(out, kModelVersion);
  const std::string cfg = config_text(model.config());
  write_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

  const auto& params = model.net().params().all();
  write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    write_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_u32(out, static_cast<std::uint32_t>(p->value.rows()));
    write_u32(out, static_cast<std::uint32_t>(p->value.cols()));
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  }
  if (!out) throw IoError("short write: " + path.string());
}

StiqaModel load_stiqa_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kModelMagic)) {
    throw FormatError("not a model file: " + path.string());
  }
  const std::uint32_t version = read_u32(in);
  if (version != kModelVersion) {
    throw FormatError("unsupported model version " + std::to_string(version));
  }
  const std::uint32_t cfg_len = read_u32(in);
  std::string cfg(cfg_len, '\0');
  in.read(cfg.data(), cfg_len);
  if (!in) throw FormatError("truncated model file: " + path.string());

  StiqaModel model(config_from_text(cfg));
  auto& params = model.net().params().all();

  const std::uint32_t count = read_u32(in);
  if (count != params.size()) {
    throw FormatError("model file parameter count mismatch: " + path.string());
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rows = read_u32(in);
    const std::uint32_t cols = read_u32(in);
    auto it = std::find_if(params.begin(), params.end(),
                           [&](const auto& p) { return p->name == name; });
    if (it == params.end()) {
      throw FormatError("unknown parameter '" + name + "' in " + path.string());
    }
    auto& p = **it;
    if (p.value.rows() != static_cast<Eigen::Index>(rows) ||
        p.value.cols() != static_cast<Eigen::Index>(cols)) {
      throw FormatError("parameter '" + name + "' has unexpected shape in " + path.string());
    }
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.size() * sizeof(float)));
    if (!in) throw FormatError("truncated model file: " + path.string());
  }
  return model;
}

}  // namespace textiq
