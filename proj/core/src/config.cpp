#include "textiq/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <vector>

namespace textiq {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig config;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(line_no) + " is not key = value");
    }
    const std::string key = trim(trimmed.substr(0, eq));
    const std::string value = trim(trimmed.substr(eq + 1));
    if (key.empty()) {
      throw FormatError("config line " + std::to_string(line_no) + " has an empty key");
    }
    config.values_[key] = value;
  }
  return config;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

void KeyValueConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config: " + path.string());
  out << canonical_text();
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw FormatError("config key '" + key + "' is not a number: " + it->second);
  }
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw FormatError("config key '" + key + "' is not an integer: " + it->second);
  }
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw FormatError("config key '" + key + "' is not an integer: " + it->second);
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "1" || it->second == "true" || it->second == "on") return true;
  if (it->second == "0" || it->second == "false" || it->second == "off") return false;
  throw FormatError("config key '" + key + "' is not a boolean: " + it->second);
}

std::string KeyValueConfig::canonical_text() const {
  std::ostringstream out;
  for (const auto& [key, value] : values_) {
    out << key << " = " << value << "\n";
  }
  return out.str();
}

namespace {

void reject_unknown(const KeyValueConfig& file, const std::string& prefix,
                    const std::vector<std::string>& known) {
  for (const auto& [key, value] : file.entries()) {
    if (key.rfind(prefix, 0) != 0) continue;
    const std::string bare = key.substr(prefix.size());
    if (std::find(known.begin(), known.end(), bare) == known.end()) {
      throw FormatError("unknown config key: " + key);
    }
  }
}

}  // namespace

void apply_config(const KeyValueConfig& file, StiqaConfig& c) {
  const std::string p = "stiqa.";
  reject_unknown(file, p,
                 {"embed_dim", "num_heads", "encoder_layers", "decoder_layers", "epsilon",
                  "learning_rate", "batch_size", "epochs", "seed", "variant",
                  "freeze_prob_branch", "val_split_seed", "use_l1", "use_epsilon",
                  "target_val_spearman", "target_val_mae"});
  c.embed_dim = file.get_int(p + "embed_dim", c.embed_dim);
  c.num_heads = file.get_int(p + "num_heads", c.num_heads);
  c.encoder_layers = file.get_int(p + "encoder_layers", c.encoder_layers);
  c.decoder_layers = file.get_int(p + "decoder_layers", c.decoder_layers);
  c.epsilon = file.get_double(p + "epsilon", c.epsilon);
  c.learning_rate = file.get_double(p + "learning_rate", c.learning_rate);
  c.batch_size = file.get_int(p + "batch_size", c.batch_size);
  c.epochs = file.get_int(p + "epochs", c.epochs);
  c.seed = file.get_u64(p + "seed", c.seed);
  c.variant = stiqa_variant_from_string(file.get_string(p + "variant", to_string(c.variant)));
  c.freeze_prob_branch = file.get_bool(p + "freeze_prob_branch", c.freeze_prob_branch);
  c.val_split_seed = file.get_u64(p + "val_split_seed", c.val_split_seed);
  c.use_l1 = file.get_bool(p + "use_l1", c.use_l1);
  c.use_epsilon = file.get_bool(p + "use_epsilon", c.use_epsilon);
  c.target_val_spearman = file.get_double(p + "target_val_spearman", c.target_val_spearman);
  c.target_val_mae = file.get_double(p + "target_val_mae", c.target_val_mae);
}

void apply_config(const KeyValueConfig& file, ControllerConfig& c) {
  const std::string p = "controller.";
  reject_unknown(file, p,
                 {"lambda", "score_target", "iterations", "edge_weight", "interior_weight",
                  "background_weight", "canny_low", "canny_high", "resize_seed"});
  c.lambda = file.get_double(p + "lambda", c.lambda);
  c.score_target = file.get_double(p + "score_target", c.score_target);
  c.iterations = file.get_int(p + "iterations", c.iterations);
  c.edge_weight = file.get_double(p + "edge_weight", c.edge_weight);
  c.interior_weight = file.get_double(p + "interior_weight", c.interior_weight);
  c.background_weight = file.get_double(p + "background_weight", c.background_weight);
  c.canny_low = file.get_double(p + "canny_low", c.canny_low);
  c.canny_high = file.get_double(p + "canny_high", c.canny_high);
  c.resize_seed = file.get_u64(p + "resize_seed", c.resize_seed);
}

void apply_config(const KeyValueConfig& file, DctCodecParams& params) {
  const std::string p = "codec.";
  reject_unknown(file, p, {"step_max", "step_ratio", "ladder_rungs"});
  params.step_max = file.get_double(p + "step_max", params.step_max);
  params.step_ratio = file.get_double(p + "step_ratio", params.step_ratio);
  params.ladder_rungs = file.get_int(p + "ladder_rungs", params.ladder_rungs);
}

void apply_config(const KeyValueConfig& file, NeuralCodecConfig& c) {
  const std::string p = "neural_codec.";
  reject_unknown(file, p,
                 {"latent_channels", "cond_channels", "distortion_weight", "rate_weight",
                  "learning_rate", "epochs", "batch_size", "crop", "seed"});
  c.latent_channels = file.get_int(p + "latent_channels", c.latent_channels);
  c.cond_channels = file.get_int(p + "cond_channels", c.cond_channels);
  c.distortion_weight = file.get_double(p + "distortion_weight", c.distortion_weight);
  c.rate_weight = file.get_double(p + "rate_weight", c.rate_weight);
  c.learning_rate = file.get_double(p + "learning_rate", c.learning_rate);
  c.epochs = file.get_int(p + "epochs", c.epochs);
  c.batch_size = file.get_int(p + "batch_size", c.batch_size);
  c.crop = file.get_int(p + "crop", c.crop);
  c.seed = file.get_u64(p + "seed", c.seed);
}

namespace {

template <typename T>
std::string num(T v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

}  // namespace

KeyValueConfig describe(const StiqaConfig& c) {
  KeyValueConfig out;
  out.set("stiqa.embed_dim", num(c.embed_dim));
  out.set("stiqa.num_heads", num(c.num_heads));
  out.set("stiqa.encoder_layers", num(c.encoder_layers));
  out.set("stiqa.decoder_layers", num(c.decoder_layers));
  out.set("stiqa.epsilon", num(c.epsilon));
  out.set("stiqa.learning_rate", num(c.learning_rate));
  out.set("stiqa.batch_size", num(c.batch_size));
  out.set("stiqa.epochs", num(c.epochs));
  out.set("stiqa.seed", num(c.seed));
  out.set("stiqa.variant", to_string(c.variant));
  out.set("stiqa.freeze_prob_branch", c.freeze_prob_branch ? "1" : "0");
  out.set("stiqa.val_split_seed", num(c.val_split_seed));
  out.set("stiqa.use_l1", c.use_l1 ? "1" : "0");
  out.set("stiqa.use_epsilon", c.use_epsilon ? "1" : "0");
  return out;
}

KeyValueConfig describe(const ControllerConfig& c) {
  KeyValueConfig out;
  out.set("controller.lambda", num(c.lambda));
  out.set("controller.score_target", num(c.score_target));
  out.set("controller.iterations", num(c.iterations));
  out.set("controller.edge_weight", num(c.edge_weight));
  out.set("controller.interior_weight", num(c.interior_weight));
  out.set("controller.background_weight", num(c.background_weight));
  out.set("controller.canny_low", num(c.canny_low));
  out.set("controller.canny_high", num(c.canny_high));
  out.set("controller.resize_seed", num(c.resize_seed));
  return out;
}

KeyValueConfig describe(const DctCodecParams& params) {
  KeyValueConfig out;
  out.set("codec.step_max", num(params.step_max));
  out.set("codec.step_ratio", num(params.step_ratio));
  out.set("codec.ladder_rungs", num(params.ladder_rungs));
  return out;
}

KeyValueConfig describe(const NeuralCodecConfig& c) {
  KeyValueConfig out;
  out.set("neural_codec.latent_channels", num(c.latent_channels));
  out.set("neural_codec.cond_channels", num(c.cond_channels));
  out.set("neural_codec.distortion_weight", num(c.distortion_weight));
  out.set("neural_codec.rate_weight", num(c.rate_weight));
  out.set("neural_codec.learning_rate", num(c.learning_rate));
  out.set("neural_codec.epochs", num(c.epochs));
  out.set("neural_codec.batch_size", num(c.batch_size));
  out.set("neural_codec.crop", num(c.crop));
  out.set("neural_codec.seed", num(c.seed));
  return out;
}

}  // namespace textiq
