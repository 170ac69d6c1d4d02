#include "cmta/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cmta/errors.hpp"

namespace cmta {

namespace {
std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}
}  // namespace

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    std::erase_if(kv, [&](const auto& p) { return p.first == key; });
    kv.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path);
}

std::string to_string(ValMetric m) {
  switch (m) {
    case ValMetric::kAuc: return "auc";
    case ValMetric::kAcc: return "acc";
    case ValMetric::kLoss: return "loss";
  }
  return "unknown";
}

ValMetric parse_val_metric(const std::string& s) {
  if (s == "auc" || s == "AUC") return ValMetric::kAuc;
  if (s == "acc" || s == "ACC") return ValMetric::kAcc;
  if (s == "loss") return ValMetric::kLoss;
  throw ConfigError("val_metric must be auc, acc or loss, got '" + s + "'");
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("key '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("key '" + key + "' expects an unsigned integer, got '" + value + "'");
  }
  return v;
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size() || !std::isfinite(v)) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects a real number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("key '" + key + "' expects true or false, got '" + value + "'");
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void TrainConfig::validate() const {
  model.validate();
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (!(lr_factor > 0 && lr_factor < 1)) throw ConfigError("lr_factor must lie in (0, 1)");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (plateau_threshold < 0) throw ConfigError("plateau_threshold must be non-negative");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1) || !(adam_eps > 0)) {
    throw ConfigError("Adam constants out of range");
  }
  if (!(val_split > 0 && val_split < 1)) throw ConfigError("val_split must lie in (0, 1)");
}

void TrainConfig::apply(const std::string& key, const std::string& value) {
  if (key == "epochs") epochs = parse_size(key, value);
  else if (key == "batch_size") batch_size = parse_size(key, value);
  else if (key == "lr") lr = parse_real(key, value);
  else if (key == "lr_factor") lr_factor = parse_real(key, value);
  else if (key == "patience") patience = parse_size(key, value);
  else if (key == "plateau_threshold") plateau_threshold = parse_real(key, value);
  else if (key == "adam_beta1") adam_beta1 = parse_real(key, value);
  else if (key == "adam_beta2") adam_beta2 = parse_real(key, value);
  else if (key == "adam_eps") adam_eps = parse_real(key, value);
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "val_metric") val_metric = parse_val_metric(value);
  else if (key == "freeze_clips") freeze_clips = parse_bool(key, value);
  else if (key == "val_split") val_split = parse_real(key, value);
  else if (key == "clip_len") model.clip_len = parse_size(key, value);
  else if (key == "visual_dim") model.visual_dim = parse_size(key, value);
  else if (key == "text_dim") model.text_dim = parse_size(key, value);
  else if (key == "hidden") model.hidden = parse_size(key, value);
  else if (key == "model_dim") model.model_dim = parse_size(key, value);
  else if (key == "layers") model.layers = parse_size(key, value);
  else if (key == "heads") model.heads = parse_size(key, value);
  else if (key == "ff_dim") model.ff_dim = parse_size(key, value);
  else if (key == "dropout") model.dropout = static_cast<Real>(parse_real(key, value));
  else if (key == "variant") model.variant = parse_variant(value);
  else throw ConfigError("unknown configuration key '" + key + "'");
}

void TrainConfig::apply(const KeyValues& kv) {
  for (const auto& [k, v] : kv) apply(k, v);
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  auto line = [&](const char* k, const std::string& v) { os << k << " = " << v << '\n'; };
  line("variant", to_string(model.variant));
  line("clip_len", std::to_string(model.clip_len));
  line("visual_dim", std::to_string(model.visual_dim));
  line("text_dim", std::to_string(model.text_dim));
  line("hidden", std::to_string(model.hidden));
  line("model_dim", std::to_string(model.model_dim));
  line("layers", std::to_string(model.layers));
  line("heads", std::to_string(model.heads));
  line("ff_dim", std::to_string(model.ff_dim));
  line("dropout", format_real(model.dropout));
  line("epochs", std::to_string(epochs));
  line("batch_size", std::to_string(batch_size));
  line("lr", format_real(lr));
  line("lr_factor", format_real(lr_factor));
  line("patience", std::to_string(patience));
  line("plateau_threshold", format_real(plateau_threshold));
  line("adam_beta1", format_real(adam_beta1));
  line("adam_beta2", format_real(adam_beta2));
  line("adam_eps", format_real(adam_eps));
  line("seed", std::to_string(seed));
  line("val_metric", to_string(val_metric));
  line("freeze_clips", freeze_clips ? "true" : "false");
  line("val_split", format_real(val_split));
  return os.str();
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  TrainConfig c;
  c.apply(parse_key_values(text, "<config>"));
  return c;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace cmta
