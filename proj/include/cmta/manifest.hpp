#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cmta/clip.hpp"

namespace cmta {

struct ManifestEntry {
  std::string path;  // as written; relative paths resolve against the manifest's directory
  std::filesystem::path resolved;
  Label label = Label::kReal;
  std::string subset;
  std::string clip_id;  // path without the .cmta extension
};

// UTF-8 CSV with header `path,label,subset`. Lines starting with '#' are
// comments; `# version: N` declares the format version (default 1).
struct Manifest {
  std::vector<ManifestEntry> entries;
  int version = 1;

  std::size_t size() const { return entries.size(); }
  std::size_t count(Label label) const;
};

inline constexpr int kManifestVersion = 1;

// Checks that every referenced file exists and that clip ids are unique.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir, const std::string& origin);
std::string render_manifest(const Manifest& manifest);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Disjoint, exhaustive split; round(n·val_fraction) entries go to validation,
// kept within [1, n−1] when n ≥ 2. Deterministic for a given seed.
std::pair<Manifest, Manifest> split_manifest(const Manifest& manifest, double val_fraction, std::uint64_t seed);

struct LoadedClip {
  EmbeddingClip clip;
  std::string subset;
};

// Reads every clip. The manifest label must agree with the file header.
std::vector<LoadedClip> load_clips(const Manifest& manifest);

}  // namespace cmta
