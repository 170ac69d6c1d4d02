#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "cmta/tensor.hpp"

namespace cmta {

enum class Label : std::uint8_t { kReal = 0, kFake = 1 };

inline int to_int(Label l) { return static_cast<int>(l); }
Label label_from_int(long value);

// Paired per-frame embeddings of one video. visual is [N×d_v], textual is
// [N×d_e] with the same N.
struct EmbeddingClip {
  std::string clip_id;
  Tensor visual;
  Tensor textual;
  Label label = Label::kReal;

  std::size_t frames() const { return visual.rows(); }
  std::size_t visual_dim() const { return visual.cols(); }
  std::size_t text_dim() const { return textual.cols(); }

  // Throws ConfigError when the frame counts disagree.
  void validate() const;

  friend bool operator==(const EmbeddingClip&, const EmbeddingClip&) = default;
};

// .cmta layout, little-endian:
//   "CMTA" | u16 version | u32 N | u32 d_v | u32 d_e | u8 label |
//   N·d_v f32 visual | N·d_e f32 textual
inline constexpr char kClipMagic[4] = {'C', 'M', 'T', 'A'};
inline constexpr std::uint16_t kClipVersion = 1;
inline constexpr std::size_t kClipHeaderBytes = 4 + 2 + 4 + 4 + 4 + 1;

std::size_t clip_file_bytes(std::size_t frames, std::size_t visual_dim, std::size_t text_dim);

std::string encode_clip(const EmbeddingClip& clip);
// `origin` names the source in error messages; clip_id is taken from it.
EmbeddingClip decode_clip(const std::string& bytes, const std::string& origin);

// Writes atomically (temp file + rename). Non-finite values throw.
void write_clip(const EmbeddingClip& clip, const std::filesystem::path& path);
EmbeddingClip read_clip(const std::filesystem::path& path);

// Frames [i, i+T) with i uniform over [0, N−T]. Clips shorter than T are
// right-padded by repeating the final frame.
EmbeddingClip sample_clip(const EmbeddingClip& clip, long length, std::mt19937_64& rng);
// Deterministic window starting at floor((N−T)/2).
EmbeddingClip center_clip(const EmbeddingClip& clip, long length);
// Window [start, start+T) with the same padding rule.
EmbeddingClip window_clip(const EmbeddingClip& clip, std::size_t start, std::size_t length);

}  // namespace cmta
