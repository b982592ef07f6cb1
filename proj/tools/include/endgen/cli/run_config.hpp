#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "endgen/train_config.hpp"

namespace endgen::cli {

/// Everything a command needs: training hyperparameters plus file locations.
/// In JSON the training fields sit at the top level next to the path keys.
struct RunConfig {
  train::TrainConfig train;
  std::string train_csv;
  std::string val_csv;
  std::string test_csv;
  std::string vocab = "vocab.txt";
  std::string checkpoint_dir = "checkpoints";
  std::string word_vectors;
  std::string init_checkpoint;  // fine-tuning start; default <checkpoint_dir>/best.ckpt

  bool operator==(const RunConfig&) const = default;
};

nlohmann::json to_json(const RunConfig& config);
/// Unknown keys raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);

/// Applies "key=value". The value is read as JSON when it parses as such
/// (numbers, booleans, quoted strings) and as a bare string otherwise.
void apply_override(RunConfig& config, std::string_view assignment);

/// Defaults <- config file <- overrides <- ENDGEN_SEED, then validated.
RunConfig resolve_run_config(const std::optional<std::filesystem::path>& file,
                             const std::vector<std::string>& overrides, const char* env_seed);

}  // namespace endgen::cli
