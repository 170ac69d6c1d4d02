#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cmta/config.hpp"
#include "cmta/model.hpp"
#include "cmta/optim.hpp"

namespace cmta {

// Layout, little-endian:
//   "CMTK" | u16 version | u8 real width (4 or 8) | u64 FNV-1a of config text |
//   u32 config length | config text | u64 epoch | f64 best metric |
//   scheduler: f64 lr, f64 best, u8 has_best, u32 bad_epochs, u32 reductions |
//   adam: u64 step | u32 parameter count |
//   per parameter: u16 name length, name, u8 rank, u32 extents…,
//                  values, first moments, second moments (real width each)
inline constexpr char kCheckpointMagic[4] = {'C', 'M', 'T', 'K'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainConfig config;
  ModelParams params;
  AdamState optimizer;
  PlateauScheduler::State scheduler;
  std::uint64_t epoch = 0;
  double best_metric = 0;

  std::uint64_t config_hash() const { return fnv1a(config.to_text()); }
};

std::string encode_checkpoint(const Checkpoint& ckpt);
// Accepts either real width and converts to the build's Real.
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cmta
