#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "cmta/clip.hpp"
#include "cmta/config.hpp"
#include "cmta/manifest.hpp"

namespace cmta {

// Labeled clips whose per-frame cross-modal similarity follows a reflected
// random walk inside [μ−a, μ+a]: wide for real clips, narrow for fake ones.
struct SynthConfig {
  std::size_t dim = 16;
  std::size_t frames = 8;
  std::size_t clips_per_class = 2000;
  double base_alignment = 0.3;  // μ
  double amp_real = 0.25;
  double amp_fake = 0.02;
  double noise = 0.01;  // per-component std of isotropic noise
  std::uint64_t seed = 0;
  std::string subset = "synthetic";

  // Requires 0 ≤ amp_fake ≤ amp_real ≤ 1 − |μ| and dim ≥ 2.
  void validate() const;
  void apply(const std::string& key, const std::string& value);
  void apply(const KeyValues& kv);
  std::string to_text() const;
};

// Per-frame target similarities for one clip.
std::vector<double> similarity_trajectory(const SynthConfig& config, Label label, std::mt19937_64& rng);

// v_t is a random unit vector; e_t = c·v_t + √(1−c²)·w_t with w_t a unit
// vector orthogonal to v_t, so cos(v_t, e_t) = c before noise is added.
EmbeddingClip gen_clip(const SynthConfig& config, Label label, std::mt19937_64& rng);

// Independent stream for clip `index` of class `label`.
std::mt19937_64 clip_rng(std::uint64_t seed, Label label, std::size_t index);

// Writes clips_per_class files per label plus `manifest.csv` into `dir`.
Manifest gen_dataset(const SynthConfig& config, const std::filesystem::path& dir);

// In-memory equivalent of gen_dataset (same clips, same order).
std::vector<LoadedClip> gen_clips(const SynthConfig& config);

}  // namespace cmta
