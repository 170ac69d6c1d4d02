#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cmta/model.hpp"

namespace cmta {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// `key = value` per line; '#' starts a comment. Duplicate keys keep the last
// value. Malformed lines throw ConfigError.
KeyValues parse_key_values(const std::string& text, const std::string& origin);
KeyValues read_key_values(const std::string& path);

enum class ValMetric { kAuc, kAcc, kLoss };
std::string to_string(ValMetric m);
ValMetric parse_val_metric(const std::string& s);

struct TrainConfig {
  ModelConfig model;
  std::size_t epochs = 200;
  std::size_t batch_size = 256;
  double lr = 1e-4;
  double lr_factor = 0.5;
  std::size_t patience = 5;
  double plateau_threshold = 1e-4;  // relative
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  ValMetric val_metric = ValMetric::kAuc;
  // Sample one clip window per video once instead of every epoch.
  bool freeze_clips = false;
  double val_split = 0.1;

  void validate() const;
  // Throws ConfigError for unknown keys or unparsable values.
  void apply(const std::string& key, const std::string& value);
  void apply(const KeyValues& kv);
  // Canonical `key = value` text, fixed key order; parses back to an equal
  // configuration.
  std::string to_text() const;
  static TrainConfig from_text(const std::string& text);
};

// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);

// Shared value parsers; ConfigError names the key on failure.
std::size_t parse_size(const std::string& key, const std::string& value);
double parse_real(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
std::string format_real(double v);

}  // namespace cmta
