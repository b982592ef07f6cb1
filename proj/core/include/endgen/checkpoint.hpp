#pragma once

// Training state on disk. Layout (all integers little-endian):
//
//   "ENDGENCK"  u32 version  u64 header_bytes  header JSON
//   u32 count   count x parameter record
//   u64 adam_t  u32 count   count x record (m)   u32 count  count x record (v)
//
// record: u32 name_bytes, name, u8 dtype (0 = f64, 1 = f32), u32 rank,
//         rank x u64 dims, raw values.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "endgen/model.hpp"
#include "endgen/optimizer.hpp"
#include "endgen/train_config.hpp"

namespace endgen::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class Phase { kPretrain, kFinetune };

const char* phase_name(Phase phase);

/// Loop position and early-stopping bookkeeping; enough to resume exactly.
struct Progress {
  Phase phase = Phase::kPretrain;
  std::size_t epoch = 0;          // epoch in progress (0-based)
  std::size_t step_in_epoch = 0;  // batches already taken from it
  std::size_t global_step = 0;
  std::optional<double> best_val;
  std::size_t bad_evals = 0;
  bool stopped = false;
  double epoch_loss_sum = 0;
  std::size_t epoch_batches = 0;
  double window_loss_sum = 0;  // since the last eval point
  double window_reward_sum = 0;
  std::size_t window_batches = 0;
  std::vector<double> epoch_losses;  // mean training loss of each finished epoch

  bool operator==(const Progress&) const = default;
};

struct Checkpoint {
  TrainConfig config;
  model::ModelParams params;
  opt::AdamState adam;
  Progress progress;
  std::uint64_t vocab_hash = 0;
  std::string vocab_path;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Header JSON only (for inspection); validates magic and version.
std::string read_checkpoint_header(const std::filesystem::path& path);

}  // namespace endgen::train
