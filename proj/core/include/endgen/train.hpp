#pragma once

// Teacher-forced pre-training with staged coverage, self-critical fine-tuning,
// validation with early stopping, and generation/evaluation over a split.
//
// Every batch is processed one example per graph; gradients of the per-example
// losses (each scaled by 1/batch) accumulate into one GradStore in batch order,
// then a single clipped Adam update is applied. Dropout and sampling streams are
// derived from (seed, global step, example position), so a run resumed from a
// checkpoint replays the uninterrupted trajectory exactly.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "endgen/checkpoint.hpp"
#include "endgen/corpus.hpp"
#include "endgen/metrics.hpp"
#include "endgen/model.hpp"
#include "endgen/optimizer.hpp"
#include "endgen/train_config.hpp"

namespace endgen::train {

using corpus::EncodedExample;
using ExampleRefs = std::vector<const EncodedExample*>;

struct StepStats {
  double loss = 0;       // mean per-example objective of the batch
  double reward = 0;     // mean sampled reward (fine-tuning only, NaN otherwise)
  double baseline = 0;   // mean greedy reward (fine-tuning only, NaN otherwise)
  double grad_norm = 0;  // before clipping
};

struct EvalPoint {
  std::size_t step = 0;
  double loss = 0;    // mean training loss since the previous eval point
  double reward = 0;  // mean sampled reward since the previous eval point; NaN in pre-training
  double val = 0;     // validation loss (pre-training) or mean greedy reward (fine-tuning)
  bool improved = false;
};

/// "step=<n> loss=<x> reward=<y> val=<z>"
std::string format_log_line(const EvalPoint& point);

struct TrainHooks {
  std::function<void(std::size_t global_step, const StepStats&)> on_step;
  std::function<void(const EvalPoint&)> on_eval;
  std::function<void(std::size_t epoch, double mean_loss)> on_epoch;
  /// Pause once the global step reaches this value (0 = run to the end).
  std::size_t max_steps = 0;
  /// When set, best.ckpt is written on every improvement and last.ckpt at
  /// every eval point and when the run ends or pauses. An existing best.ckpt
  /// is picked up on resume.
  std::optional<std::filesystem::path> checkpoint_dir;
};

struct TrainResult {
  Checkpoint last;
  Checkpoint best;
  std::vector<EvalPoint> evals;
};

std::vector<EncodedExample> encode_all(std::span<const corpus::Story> stories, const corpus::Vocabulary& vocab,
                                       const TrainConfig& config);

/// Fresh pre-training state: initialized parameters, zero moments.
Checkpoint initial_checkpoint(const TrainConfig& config, const corpus::Vocabulary& vocab,
                              std::string vocab_path = {});

/// Fine-tuning state from a pre-trained checkpoint: same parameters, fresh
/// optimizer and progress, `config` governs the new phase.
Checkpoint finetune_start(const Checkpoint& pretrained, const TrainConfig& config);

/// Whether decoding with this checkpoint should use the coverage term.
bool coverage_active(const Checkpoint& ckpt);

/// Batches of example indices for one epoch: shuffle with the run seed, sort
/// windows of several batches by plot length, cut, then shuffle batch order.
std::vector<std::vector<std::size_t>> make_batches(std::span<const EncodedExample> examples, std::size_t batch_size,
                                                   std::uint64_t seed, std::size_t epoch);

/// Per-example pre-training objective: pointer loss (with coverage term when
/// `coverage_on`) minus the semantic relevance when enabled.
ad::Var pretrain_objective(model::Forward& fw, const EncodedExample& example, const TrainConfig& config,
                           bool coverage_on);

/// One pre-training update. `global_step` seeds dropout.
StepStats pretrain_step(model::ModelParams& params, opt::AdamState& adam, const ExampleRefs& batch,
                        const TrainConfig& config, bool coverage_on, std::size_t global_step);

/// One self-critical update: greedy baseline, sampled sequence, rewards,
/// mu * L_rl + (1 - mu) * L_mix with L_mix on the teacher-forced gold path.
StepStats rl_step(model::ModelParams& params, opt::AdamState& adam, const ExampleRefs& batch,
                  const TrainConfig& config, const corpus::Vocabulary& vocab, const metrics::RewardFn& reward,
                  std::size_t global_step);

/// Mean length-normalized negative log-likelihood of the gold endings.
double validation_loss(const model::ModelParams& params, std::span<const EncodedExample> examples,
                       bool coverage_on);
/// Fraction of gold target tokens that are the argmax of P_fin under teacher forcing.
double teacher_forced_accuracy(const model::ModelParams& params, std::span<const EncodedExample> examples,
                               bool coverage_on);
/// Mean reward of greedy decodes against the gold endings.
double mean_greedy_reward(const model::ModelParams& params, std::span<const EncodedExample> examples,
                          const corpus::Vocabulary& vocab, const TrainConfig& config,
                          const metrics::RewardFn& reward, bool coverage_on);

TrainResult run_pretrain(Checkpoint state, std::span<const EncodedExample> train,
                         std::span<const EncodedExample> val, const corpus::Vocabulary& vocab,
                         const TrainHooks& hooks = {});
TrainResult run_finetune(Checkpoint state, std::span<const EncodedExample> train,
                         std::span<const EncodedExample> val, const corpus::Vocabulary& vocab,
                         const TrainHooks& hooks = {});

TrainResult pretrain(const TrainConfig& config, std::span<const EncodedExample> train,
                     std::span<const EncodedExample> val, const corpus::Vocabulary& vocab,
                     const TrainHooks& hooks = {});
TrainResult rl_finetune(const TrainConfig& config, std::span<const EncodedExample> train,
                        std::span<const EncodedExample> val, const corpus::Vocabulary& vocab,
                        const Checkpoint& pretrained, const TrainHooks& hooks = {});

/// Beam-search endings (beam 1 is greedy), realized as tokens.
std::vector<corpus::Tokens> generate_endings(const model::ModelParams& params, const corpus::Vocabulary& vocab,
                                             std::span<const EncodedExample> examples, const TrainConfig& config,
                                             std::size_t beam, bool coverage_on);

struct SplitEvaluation {
  metrics::MetricReport report;
  std::vector<corpus::Tokens> hypotheses;
};

SplitEvaluation evaluate_split(const Checkpoint& ckpt, const corpus::Vocabulary& vocab,
                               std::span<const EncodedExample> examples, std::size_t beam,
                               const metrics::WordVectorTable* vectors = nullptr);

}  // namespace endgen::train
