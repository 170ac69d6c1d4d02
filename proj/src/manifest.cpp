#include "cmta/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "cmta/errors.hpp"

namespace cmta {

std::size_t Manifest::count(Label label) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [label](const ManifestEntry& e) { return e.label == label; }));
}

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string clip_id_for(const std::string& path) {
  std::filesystem::path p(path);
  if (p.extension() == ".cmta") p.replace_extension();
  return p.generic_string();
}

}  // namespace

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir, const std::string& origin) {
  Manifest m;
  std::stringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const std::string body = trim(t.substr(1));
      if (body.rfind("version:", 0) == 0) {
        try {
          m.version = std::stoi(body.substr(8));
        } catch (const std::exception&) {
          throw LoadError(LoadErrorKind::kMalformed, origin, "line " + std::to_string(lineno) + ": bad version");
        }
        if (m.version != kManifestVersion) {
          throw LoadError(LoadErrorKind::kVersionMismatch, origin, "manifest version " + std::to_string(m.version));
        }
      }
      continue;
    }
    const auto fields = split_fields(t);
    if (!header_seen && fields.size() == 3 && fields[0] == "path" && fields[1] == "label" && fields[2] == "subset") {
      header_seen = true;
      continue;
    }
    if (fields.size() != 3 || fields[0].empty()) {
      throw LoadError(LoadErrorKind::kMalformed, origin,
                      "line " + std::to_string(lineno) + ": expected path,label,subset");
    }
    ManifestEntry e;
    e.path = fields[0];
    if (fields[1] == "0") {
      e.label = Label::kReal;
    } else if (fields[1] == "1") {
      e.label = Label::kFake;
    } else {
      throw LoadError(LoadErrorKind::kMalformed, origin,
                      "line " + std::to_string(lineno) + ": label must be 0 or 1, got '" + fields[1] + "'");
    }
    e.subset = fields[2].empty() ? "default" : fields[2];
    std::filesystem::path p(e.path);
    e.resolved = p.is_absolute() ? p : base_dir / p;
    e.clip_id = clip_id_for(e.path);
    if (!ids.insert(e.clip_id).second) {
      throw LoadError(LoadErrorKind::kMalformed, origin, "duplicate clip id '" + e.clip_id + "'");
    }
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) throw LoadError(LoadErrorKind::kEmpty, origin, "no entries");
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(LoadErrorKind::kMissingFile, path.string(), "");
  std::stringstream ss;
  ss << in.rdbuf();
  Manifest m = parse_manifest(ss.str(), path.parent_path(), path.string());
  for (const auto& e : m.entries) {
    if (!std::filesystem::is_regular_file(e.resolved)) {
      throw LoadError(LoadErrorKind::kMissingFile, e.resolved.string(), "referenced by " + path.string());
    }
  }
  return m;
}

std::string render_manifest(const Manifest& manifest) {
  std::string out = "# version: " + std::to_string(manifest.version) + "\npath,label,subset\n";
  for (const auto& e : manifest.entries) {
    out += e.path + "," + std::to_string(to_int(e.label)) + "," + e.subset + "\n";
  }
  return out;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << render_manifest(manifest);
  if (!out) throw IoError("write failed: " + path.string());
}

std::pair<Manifest, Manifest> split_manifest(const Manifest& manifest, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1), got " + std::to_string(val_fraction));
  }
  const std::size_t n = manifest.size();
  if (n == 0) throw LoadError(LoadErrorKind::kEmpty, "<manifest>", "cannot split an empty manifest");
  auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * val_fraction));
  if (n >= 2) n_val = std::clamp<std::size_t>(n_val, 1, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> in_val(n, false);
  for (std::size_t i = 0; i < n_val; ++i) in_val[order[i]] = true;

  Manifest train, val;
  train.version = val.version = manifest.version;
  for (std::size_t i = 0; i < n; ++i) (in_val[i] ? val : train).entries.push_back(manifest.entries[i]);
  return {std::move(train), std::move(val)};
}

std::vector<LoadedClip> load_clips(const Manifest& manifest) {
  std::vector<LoadedClip> out;
  out.reserve(manifest.size());
  for (const auto& e : manifest.entries) {
    EmbeddingClip clip = read_clip(e.resolved);
    if (clip.label != e.label) {
      throw LoadError(LoadErrorKind::kMalformed, e.resolved.string(),
                      "header label " + std::to_string(to_int(clip.label)) + " disagrees with manifest label " +
                          std::to_string(to_int(e.label)));
    }
    clip.clip_id = e.clip_id;
    out.push_back({std::move(clip), e.subset});
  }
  return out;
}

}  // namespace cmta
