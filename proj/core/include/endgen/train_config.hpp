#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "endgen/corpus.hpp"
#include "endgen/decode.hpp"
#include "endgen/losses.hpp"
#include "endgen/model.hpp"

namespace endgen::train {

struct TrainConfig {
  std::size_t hidden_dim = 256;
  std::size_t embed_dim = 512;
  std::size_t batch_size = 64;
  double dropout = 0.5;
  std::size_t beam = 4;
  double pretrain_lr = 1e-3;
  double rl_lr = 5e-5;
  double beta = 1.0;
  double mu = 0.95;
  std::size_t vocab_cap = 15000;
  std::size_t coverage_start_epoch = 10;  // 0-based epoch where the coverage term switches on
  std::size_t eval_every = 100;           // global steps
  std::size_t patience = 10;              // eval points without improvement
  std::uint64_t seed = 1;
  double grad_clip = 2.0;
  std::size_t max_epochs = 30;
  std::size_t rl_epochs = 10;
  std::size_t max_plot_len = 80;
  std::size_t max_end_len = 20;
  bool coverage = true;
  bool semantic = true;
  std::string reward = "bleu4";
  bool suppress_unk = false;
  bool length_normalize = true;

  void validate() const;

  model::ModelConfig model_config(std::size_t vocab_size) const;
  corpus::EncodeLimits encode_limits() const { return {max_plot_len, max_end_len}; }
  decode::DecodeOptions decode_options() const;
  loss::LossConfig loss_config() const;

  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& config);

/// Strict parse: unknown keys and wrongly typed values raise ConfigError.
/// Keys absent from `j` keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Sets one field; returns false if `key` is not a TrainConfig field.
bool set_field(TrainConfig& config, std::string_view key, const nlohmann::json& value);

/// Field names in declaration order.
const std::vector<std::string>& field_names();

}  // namespace endgen::train
