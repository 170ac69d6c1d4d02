#include "cmta/clip.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cmta/errors.hpp"

namespace cmta {

static_assert(std::endian::native == std::endian::little, "the .cmta codec assumes a little-endian host");

Label label_from_int(long value) {
  if (value == 0) return Label::kReal;
  if (value == 1) return Label::kFake;
  throw ConfigError("label must be 0 or 1, got " + std::to_string(value));
}

void EmbeddingClip::validate() const {
  if (visual.empty() || textual.empty()) throw ConfigError("clip " + clip_id + " has no frames");
  if (visual.rank() != 2 || textual.rank() != 2) throw ConfigError("clip " + clip_id + " embeddings must be rank 2");
  if (visual.rows() != textual.rows()) {
    throw ConfigError("clip " + clip_id + ": visual has " + std::to_string(visual.rows()) + " frames, textual has " +
                      std::to_string(textual.rows()));
  }
}

std::size_t clip_file_bytes(std::size_t frames, std::size_t visual_dim, std::size_t text_dim) {
  return kClipHeaderBytes + frames * (visual_dim + text_dim) * sizeof(float);
}

namespace {

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T get(const std::string& in, std::size_t& pos) {
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

void put_payload(std::string& out, const Tensor& t, const std::string& id) {
  for (Real v : t.values()) {
    const auto f = static_cast<float>(v);
    if (!std::isfinite(f)) throw ConfigError("clip " + id + " contains non-finite values");
    put(out, f);
  }
}

}  // namespace

std::string encode_clip(const EmbeddingClip& clip) {
  clip.validate();
  std::string out;
  out.reserve(clip_file_bytes(clip.frames(), clip.visual_dim(), clip.text_dim()));
  out.append(kClipMagic, 4);
  put<std::uint16_t>(out, kClipVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(clip.frames()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(clip.visual_dim()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(clip.text_dim()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(clip.label));
  put_payload(out, clip.visual, clip.clip_id);
  put_payload(out, clip.textual, clip.clip_id);
  return out;
}

EmbeddingClip decode_clip(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kClipMagic, 4) != 0) {
    throw LoadError(LoadErrorKind::kBadMagic, origin, "");
  }
  if (bytes.size() < kClipHeaderBytes) throw LoadError(LoadErrorKind::kTruncated, origin, "header");
  std::size_t pos = 4;
  const auto version = get<std::uint16_t>(bytes, pos);
  if (version != kClipVersion) {
    throw LoadError(LoadErrorKind::kVersionMismatch, origin,
                    "found " + std::to_string(version) + ", expected " + std::to_string(kClipVersion));
  }
  const auto n = get<std::uint32_t>(bytes, pos);
  const auto dv = get<std::uint32_t>(bytes, pos);
  const auto de = get<std::uint32_t>(bytes, pos);
  const auto label = get<std::uint8_t>(bytes, pos);
  if (n == 0 || dv == 0 || de == 0) throw LoadError(LoadErrorKind::kMalformed, origin, "zero extent in header");
  if (label > 1) throw LoadError(LoadErrorKind::kMalformed, origin, "label " + std::to_string(label));
  const std::size_t expected = clip_file_bytes(n, dv, de);
  if (bytes.size() < expected) {
    throw LoadError(LoadErrorKind::kTruncated, origin,
                    std::to_string(bytes.size()) + " of " + std::to_string(expected) + " bytes");
  }
  if (bytes.size() > expected) {
    throw LoadError(LoadErrorKind::kMalformed, origin, std::to_string(bytes.size() - expected) + " trailing bytes");
  }
  auto read_block = [&](std::size_t rows, std::size_t cols) {
    std::vector<Real> v(rows * cols);
    for (auto& x : v) {
      const auto f = get<float>(bytes, pos);
      if (!std::isfinite(f)) throw LoadError(LoadErrorKind::kNonFinite, origin, "");
      x = static_cast<Real>(f);
    }
    return Tensor({rows, cols}, std::move(v));
  };
  EmbeddingClip clip;
  clip.clip_id = std::filesystem::path(origin).stem().string();
  clip.visual = read_block(n, dv);
  clip.textual = read_block(n, de);
  clip.label = static_cast<Label>(label);
  return clip;
}

void write_clip(const EmbeddingClip& clip, const std::filesystem::path& path) {
  const std::string bytes = encode_clip(clip);
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

EmbeddingClip read_clip(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadErrorKind::kMissingFile, path.string(), "");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_clip(ss.str(), path.string());
}

EmbeddingClip window_clip(const EmbeddingClip& clip, std::size_t start, std::size_t length) {
  clip.validate();
  const std::size_t n = clip.frames();
  if (length == 0) throw ConfigError("clip length must be positive");
  if (start >= n) throw ConfigError("window start " + std::to_string(start) + " beyond " + std::to_string(n) + " frames");
  auto take = [&](const Tensor& src) {
    const std::size_t d = src.cols();
    Tensor out({length, d});
    for (std::size_t t = 0; t < length; ++t) {
      const std::size_t frame = std::min(start + t, n - 1);
      std::copy_n(src.data() + frame * d, d, out.data() + t * d);
    }
    return out;
  };
  return EmbeddingClip{clip.clip_id, take(clip.visual), take(clip.textual), clip.label};
}

EmbeddingClip sample_clip(const EmbeddingClip& clip, long length, std::mt19937_64& rng) {
  if (length <= 0) throw ConfigError("clip length T must be positive, got " + std::to_string(length));
  const auto t = static_cast<std::size_t>(length);
  const std::size_t n = clip.frames();
  std::size_t start = 0;
  if (n > t) start = std::uniform_int_distribution<std::size_t>(0, n - t)(rng);
  return window_clip(clip, start, t);
}

EmbeddingClip center_clip(const EmbeddingClip& clip, long length) {
  if (length <= 0) throw ConfigError("clip length T must be positive, got " + std::to_string(length));
  const auto t = static_cast<std::size_t>(length);
  const std::size_t n = clip.frames();
  return window_clip(clip, n > t ? (n - t) / 2 : 0, t);
}

}  // namespace cmta
