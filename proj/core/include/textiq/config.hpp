#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "textiq/common.hpp"
#include "textiq/controller.hpp"
#include "textiq/neural_codec.hpp"
#include "textiq/stiqa.hpp"

namespace textiq {

// Flat `key = value` text format with '#' comments. Keys are namespaced per
// config type, e.g. "stiqa.embed_dim" or "controller.lambda".
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig load(const std::filesystem::path& path);
  static KeyValueConfig parse(const std::string& text);
  void save(const std::filesystem::path& path) const;

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Sorted key=value text; the basis of provenance hashes.
  std::string canonical_text() const;
  std::uint64_t hash() const { return fnv1a(canonical_text()); }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Overlay file values onto defaults; unknown keys in the file are rejected so
// typos fail loudly.
void apply_config(const KeyValueConfig& file, StiqaConfig& config);
void apply_config(const KeyValueConfig& file, ControllerConfig& config);
void apply_config(const KeyValueConfig& file, DctCodecParams& params);
void apply_config(const KeyValueConfig& file, NeuralCodecConfig& config);

KeyValueConfig describe(const StiqaConfig& config);
KeyValueConfig describe(const ControllerConfig& config);
KeyValueConfig describe(const DctCodecParams& params);
KeyValueConfig describe(const NeuralCodecConfig& config);

}  // namespace textiq
