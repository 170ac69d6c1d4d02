#include "cmta/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cmta/errors.hpp"

namespace cmta {

void SynthConfig::validate() const {
  if (dim < 2) throw ConfigError("synthetic dim must be at least 2");
  if (frames == 0) throw ConfigError("synthetic frames must be positive");
  if (clips_per_class == 0) throw ConfigError("clips_per_class must be positive");
  if (!(amp_fake >= 0 && amp_fake <= amp_real && amp_real <= 1.0 - std::abs(base_alignment))) {
    throw ConfigError("synthetic amplitudes must satisfy 0 <= amp_fake <= amp_real <= 1 - |base_alignment|");
  }
  if (noise < 0) throw ConfigError("noise must be non-negative");
  if (subset.empty() || subset.find(',') != std::string::npos) throw ConfigError("subset tag must be non-empty without commas");
}

void SynthConfig::apply(const std::string& key, const std::string& value) {
  if (key == "dim") dim = parse_size(key, value);
  else if (key == "frames") frames = parse_size(key, value);
  else if (key == "clips_per_class") clips_per_class = parse_size(key, value);
  else if (key == "base_alignment") base_alignment = parse_real(key, value);
  else if (key == "amp_real") amp_real = parse_real(key, value);
  else if (key == "amp_fake") amp_fake = parse_real(key, value);
  else if (key == "noise") noise = parse_real(key, value);
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "subset") subset = value;
  else throw ConfigError("unknown configuration key '" + key + "'");
}

void SynthConfig::apply(const KeyValues& kv) {
  for (const auto& [k, v] : kv) apply(k, v);
}

std::string SynthConfig::to_text() const {
  std::ostringstream os;
  os << "dim = " << dim << '\n'
     << "frames = " << frames << '\n'
     << "clips_per_class = " << clips_per_class << '\n'
     << "base_alignment = " << format_real(base_alignment) << '\n'
     << "amp_real = " << format_real(amp_real) << '\n'
     << "amp_fake = " << format_real(amp_fake) << '\n'
     << "noise = " << format_real(noise) << '\n'
     << "seed = " << seed << '\n'
     << "subset = " << subset << '\n';
  return os.str();
}

namespace {

double reflect_into(double x, double lo, double hi) {
  const double width = hi - lo;
  if (width <= 0) return lo;
  double y = std::fmod(x - lo, 2 * width);
  if (y < 0) y += 2 * width;
  if (y > width) y = 2 * width - y;
  return lo + y;
}

std::vector<double> random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  for (;;) {
    std::vector<double> v(dim);
    double norm = 0;
    for (auto& x : v) {
      x = normal(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm < 1e-12) continue;
    for (auto& x : v) x /= norm;
    return v;
  }
}

}  // namespace

std::vector<double> similarity_trajectory(const SynthConfig& config, Label label, std::mt19937_64& rng) {
  const double amp = label == Label::kReal ? config.amp_real : config.amp_fake;
  const double lo = config.base_alignment - amp, hi = config.base_alignment + amp;
  std::uniform_real_distribution<double> start(-1.0, 1.0);
  std::normal_distribution<double> step(0.0, 1.0);
  std::vector<double> target(config.frames);
  double c = config.base_alignment + amp * start(rng);
  for (std::size_t t = 0; t < config.frames; ++t) {
    if (t > 0) c = reflect_into(c + amp * step(rng), lo, hi);
    target[t] = std::clamp(c, -1.0, 1.0);
  }
  return target;
}

EmbeddingClip gen_clip(const SynthConfig& config, Label label, std::mt19937_64& rng) {
  config.validate();
  const std::size_t d = config.dim, n = config.frames;
  const std::vector<double> target = similarity_trajectory(config, label, rng);
  std::normal_distribution<double> normal;
  Tensor visual({n, d}), textual({n, d});
  for (std::size_t t = 0; t < n; ++t) {
    const auto v = random_unit(d, rng);
    // w: random direction with its v component removed.
    std::vector<double> w;
    double norm = 0;
    do {
      w = random_unit(d, rng);
      double proj = 0;
      for (std::size_t i = 0; i < d; ++i) proj += w[i] * v[i];
      norm = 0;
      for (std::size_t i = 0; i < d; ++i) {
        w[i] -= proj * v[i];
        norm += w[i] * w[i];
      }
      norm = std::sqrt(norm);
    } while (norm < 1e-6);
    const double c = target[t];
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    // Stored as 32-bit so in-memory clips equal their .cmta round trip.
    for (std::size_t i = 0; i < d; ++i) {
      visual(t, i) = static_cast<Real>(static_cast<float>(v[i] + config.noise * normal(rng)));
      textual(t, i) = static_cast<Real>(static_cast<float>(c * v[i] + s * w[i] / norm + config.noise * normal(rng)));
    }
  }
  return EmbeddingClip{"", std::move(visual), std::move(textual), label};
}

std::mt19937_64 clip_rng(std::uint64_t seed, Label label, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(to_int(label)), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32)};
  return std::mt19937_64(seq);
}

namespace {
std::string clip_name(Label label, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05zu", label == Label::kReal ? "real" : "fake", index);
  return buf;
}
}  // namespace

std::vector<LoadedClip> gen_clips(const SynthConfig& config) {
  config.validate();
  std::vector<LoadedClip> out;
  out.reserve(2 * config.clips_per_class);
  for (Label label : {Label::kReal, Label::kFake}) {
    for (std::size_t i = 0; i < config.clips_per_class; ++i) {
      auto rng = clip_rng(config.seed, label, i);
      EmbeddingClip clip = gen_clip(config, label, rng);
      clip.clip_id = clip_name(label, i);
      out.push_back({std::move(clip), config.subset});
    }
  }
  return out;
}

Manifest gen_dataset(const SynthConfig& config, const std::filesystem::path& dir) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  Manifest manifest;
  for (const auto& [clip, subset] : gen_clips(config)) {
    const std::string file = clip.clip_id + ".cmta";
    write_clip(clip, dir / file);
    manifest.entries.push_back({file, dir / file, clip.label, subset, clip.clip_id});
  }
  write_manifest(manifest, dir / "manifest.csv");
  return manifest;
}

}  // namespace cmta
