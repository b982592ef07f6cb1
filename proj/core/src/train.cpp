#include "endgen/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include "endgen/decode.hpp"
#include "endgen/errors.hpp"
#include "endgen/losses.hpp"
#include "endgen/random.hpp"

namespace endgen::train {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kBucketWindow = 8;  // batches per length-sorted window
constexpr std::uint64_t kShuffleStream = 0x5348;
constexpr std::uint64_t kSampleStream = 0x534d;

std::uint64_t dropout_seed(std::uint64_t seed, std::size_t step, std::size_t example) {
  return derive_seed(seed, step, example);
}

std::uint64_t sample_seed(std::uint64_t seed, std::size_t step, std::size_t example) {
  return derive_seed(derive_seed(seed, kSampleStream), step, example);
}

void check_data(const Checkpoint& state, std::span<const EncodedExample> train, const corpus::Vocabulary& vocab) {
  if (state.vocab_hash != vocab.hash()) {
    throw ConfigError("vocabulary does not match the one this model was built with (hash mismatch)");
  }
  if (state.params.config.vocab_size != vocab.size()) throw ConfigError("model vocabulary size differs from vocab");
  for (const auto& ex : train) {
    if (ex.vocab_size != vocab.size()) throw ConfigError("example '" + ex.id + "' was encoded with another vocabulary");
  }
  if (train.empty()) throw ConfigError("training split is empty");
}

void apply_update(model::ModelParams& params, opt::AdamState& adam, ad::GradStore& grads, const TrainConfig& config,
                  double lr, StepStats& stats) {
  stats.grad_norm = opt::clip_global_norm(grads, static_cast<Real>(config.grad_clip));
  opt::adam_step(params.store, grads, adam, {lr});
}

metrics::RewardFn reward_for(const TrainConfig& config, std::span<const EncodedExample> train) {
  std::vector<corpus::Tokens> refs;
  refs.reserve(train.size());
  for (const auto& ex : train) refs.push_back(ex.ending_tokens);
  return metrics::RewardRegistry::instance().make(config.reward, refs);
}

corpus::Tokens realize(const std::vector<corpus::TokenId>& ids, const corpus::Vocabulary& vocab,
                       const EncodedExample& ex) {
  return decode::realize(ids, vocab, ex.oov_words);
}

// Shared driver for both phases. `step` performs one update and returns its
// stats; `validate` computes the phase's validation score.
struct PhaseDriver {
  bool higher_is_better;
  std::function<StepStats(Checkpoint&, const ExampleRefs&)> step;
  std::function<double(const Checkpoint&)> validate;
};

void write_checkpoint(const TrainHooks& hooks, const char* name, const Checkpoint& c) {
  if (!hooks.checkpoint_dir) return;
  std::filesystem::create_directories(*hooks.checkpoint_dir);
  save_checkpoint(c, *hooks.checkpoint_dir / name);
}

TrainResult drive(Checkpoint state, std::span<const EncodedExample> train, const TrainHooks& hooks,
                  std::size_t epochs, const PhaseDriver& phase) {
  Progress& p = state.progress;
  TrainResult result;
  std::optional<Checkpoint> best;
  if (hooks.checkpoint_dir && p.best_val && std::filesystem::exists(*hooks.checkpoint_dir / "best.ckpt")) {
    best = load_checkpoint(*hooks.checkpoint_dir / "best.ckpt");
  }

  auto finish = [&] {
    write_checkpoint(hooks, "last.ckpt", state);
    result.best = best ? std::move(*best) : state;
    if (!best) write_checkpoint(hooks, "best.ckpt", state);
    result.last = std::move(state);
    return std::move(result);
  };

  while (p.epoch < epochs && !p.stopped) {
    const auto batches = make_batches(train, state.config.batch_size, state.config.seed, p.epoch);
    while (p.step_in_epoch < batches.size()) {
      if (hooks.max_steps && p.global_step >= hooks.max_steps) return finish();
      ExampleRefs refs;
      for (std::size_t i : batches[p.step_in_epoch]) refs.push_back(&train[i]);

      const StepStats stats = phase.step(state, refs);
      ++p.global_step;
      ++p.step_in_epoch;
      p.epoch_loss_sum += stats.loss;
      ++p.epoch_batches;
      p.window_loss_sum += stats.loss;
      if (!std::isnan(stats.reward)) p.window_reward_sum += stats.reward;
      ++p.window_batches;
      if (hooks.on_step) hooks.on_step(p.global_step, stats);

      if (p.global_step % state.config.eval_every == 0) {
        EvalPoint point;
        point.step = p.global_step;
        point.loss = p.window_loss_sum / double(p.window_batches);
        point.reward = p.phase == Phase::kPretrain ? std::numeric_limits<double>::quiet_NaN()
                                                   : p.window_reward_sum / double(p.window_batches);
        point.val = phase.validate(state);
        p.window_loss_sum = p.window_reward_sum = 0;
        p.window_batches = 0;
        const bool better = !p.best_val || (phase.higher_is_better ? point.val > *p.best_val : point.val < *p.best_val);
        if (better) {
          p.best_val = point.val;
          p.bad_evals = 0;
        } else if (++p.bad_evals >= state.config.patience) {
          p.stopped = true;
        }
        point.improved = better;
        if (better) {
          best = state;
          write_checkpoint(hooks, "best.ckpt", state);
        }
        write_checkpoint(hooks, "last.ckpt", state);
        result.evals.push_back(point);
        if (hooks.on_eval) hooks.on_eval(point);
        if (p.stopped) break;
      }
    }
    if (p.stopped) break;
    const double mean = p.epoch_loss_sum / double(std::max<std::size_t>(p.epoch_batches, 1));
    p.epoch_losses.push_back(mean);
    if (hooks.on_epoch) hooks.on_epoch(p.epoch, mean);
    ++p.epoch;
    p.step_in_epoch = 0;
    p.epoch_loss_sum = 0;
    p.epoch_batches = 0;
  }
  return finish();
}

}  // namespace

std::string format_log_line(const EvalPoint& e) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "step=%zu loss=%.6f reward=%.6f val=%.6f", e.step, e.loss, e.reward, e.val);
  return buf;
}

std::vector<EncodedExample> encode_all(std::span<const corpus::Story> stories, const corpus::Vocabulary& vocab,
                                       const TrainConfig& config) {
  std::vector<EncodedExample> out;
  out.reserve(stories.size());
  for (const auto& s : stories) out.push_back(corpus::encode_example(s, vocab, config.encode_limits()));
  return out;
}

Checkpoint initial_checkpoint(const TrainConfig& config, const corpus::Vocabulary& vocab, std::string vocab_path) {
  config.validate();
  Checkpoint c;
  c.config = config;
  c.params = model::init_params(config.model_config(vocab.size()), config.seed);
  c.adam = opt::AdamState(c.params.store);
  c.vocab_hash = vocab.hash();
  c.vocab_path = std::move(vocab_path);
  return c;
}

Checkpoint finetune_start(const Checkpoint& pretrained, const TrainConfig& config) {
  config.validate();
  if (config.hidden_dim != pretrained.params.config.hidden_dim ||
      config.embed_dim != pretrained.params.config.embed_dim) {
    throw ConfigError("fine-tuning config dimensions differ from the pre-trained checkpoint");
  }
  Checkpoint c;
  c.config = config;
  c.params = pretrained.params;
  c.params.config.dropout = config.dropout;
  c.adam = opt::AdamState(c.params.store);
  c.progress.phase = Phase::kFinetune;
  c.vocab_hash = pretrained.vocab_hash;
  c.vocab_path = pretrained.vocab_path;
  return c;
}

bool coverage_active(const Checkpoint& ckpt) {
  if (!ckpt.config.coverage) return false;
  return ckpt.progress.phase == Phase::kFinetune || ckpt.progress.epoch >= ckpt.config.coverage_start_epoch;
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const EncodedExample> examples, std::size_t batch_size,
                                                   std::uint64_t seed, std::size_t epoch) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(derive_seed(seed, kShuffleStream), epoch));
  shuffle(std::span(order), rng);

  const std::size_t window = batch_size * kBucketWindow;
  for (std::size_t start = 0; start < order.size(); start += window) {
    const auto first = order.begin() + static_cast<std::ptrdiff_t>(start);
    const auto last = order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + window));
    std::stable_sort(first, last, [&](std::size_t a, std::size_t b) {
      return examples[a].plot_ids.size() < examples[b].plot_ids.size();
    });
  }

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  shuffle(std::span(batches), rng);
  return batches;
}

ad::Var pretrain_objective(model::Forward& fw, const EncodedExample& ex, const TrainConfig& config,
                           bool coverage_on) {
  const corpus::ExampleView view = corpus::view_of(ex);
  model::TeacherForced tf = model::run_teacher_forced(fw, view, view.decoder_inputs, coverage_on);
  ad::Var loss = loss::pointer_coverage_loss(tf.distributions, view.decoder_targets, tf.alphas, tf.coverages,
                                             static_cast<Real>(config.beta), coverage_on);
  if (config.semantic) {
    const model::SemanticVectors sem = model::semantic_vectors(tf.encoder, tf.final_hidden);
    loss = loss::mixed_loss(loss, loss::semantic_relevance(sem.v_plot, sem.v_gen));
  }
  return loss;
}

StepStats pretrain_step(model::ModelParams& params, opt::AdamState& adam, const ExampleRefs& batch,
                        const TrainConfig& config, bool coverage_on, std::size_t global_step) {
  if (batch.empty()) throw ContractError("empty batch");
  ad::GradStore grads(params.store);
  StepStats stats;
  stats.reward = stats.baseline = kNaN;
  const Real inv = Real(1) / static_cast<Real>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ad::Graph g(&params.store);
    model::Forward fw(params, g, {true, dropout_seed(config.seed, global_step, i), std::nullopt});
    ad::Var loss = pretrain_objective(fw, *batch[i], config, coverage_on);
    stats.loss += loss.item();
    g.backward(ad::scale(loss, inv), grads);
  }
  stats.loss /= double(batch.size());
  apply_update(params, adam, grads, config, config.pretrain_lr, stats);
  return stats;
}

StepStats rl_step(model::ModelParams& params, opt::AdamState& adam, const ExampleRefs& batch,
                  const TrainConfig& config, const corpus::Vocabulary& vocab, const metrics::RewardFn& reward,
                  std::size_t global_step) {
  if (batch.empty()) throw ContractError("empty batch");
  const decode::DecodeOptions dopt = config.decode_options();
  ad::GradStore grads(params.store);
  StepStats stats;
  const Real inv = Real(1) / static_cast<Real>(batch.size());

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const EncodedExample& ex = *batch[i];
    const corpus::ExampleView view = corpus::view_of(ex);

    // Baseline y^b: greedy, no gradient.
    std::vector<corpus::TokenId> greedy_ids;
    {
      ad::Graph gb(&params.store, false);
      model::Forward fb(params, gb);
      const model::EncoderOutput enc = model::encode(fb, view.plot_ids, view.plot_mask);
      decode::GeneratorStepper stepper(fb, enc, view, config.coverage);
      greedy_ids = decode::greedy_decode(stepper, dopt).tokens;
    }

    ad::Graph g(&params.store);
    // Sample y^s from the same parameters, keeping each step's distribution.
    model::Forward fs(params, g);
    const model::EncoderOutput enc = model::encode(fs, view.plot_ids, view.plot_mask);
    const auto ext_ids = view.plot_ext_ids.first(enc.length);
    Rng rng(sample_seed(config.seed, global_step, i));
    std::vector<ad::Var> dists;
    std::vector<corpus::TokenId> sample_ids;
    model::DecoderState state = model::initial_decoder_state(fs, enc);
    corpus::TokenId prev = dopt.bos;
    while (sample_ids.size() < dopt.max_len) {
      model::DecoderStep s = model::decoder_step(fs, enc, prev, state, config.coverage);
      ad::Var dist = model::final_distribution(s.p_vocab, s.alpha, s.p_gen, ext_ids, view.num_oov);
      std::vector<Real> probs(dist.value().values().begin(), dist.value().values().end());
      if (dopt.suppress_unk) probs[static_cast<std::size_t>(dopt.unk)] = 0;
      prev = static_cast<corpus::TokenId>(rng.categorical(probs));
      dists.push_back(dist);
      sample_ids.push_back(prev);
      state = s.next;
      if (prev == dopt.eos) break;
    }
    ad::Var log_prob = loss::sequence_log_prob(dists, sample_ids);

    const double r_b = reward(realize(greedy_ids, vocab, ex), ex.ending_tokens);
    const double r_s = reward(realize(sample_ids, vocab, ex), ex.ending_tokens);

    model::Forward ft(params, g, {true, dropout_seed(config.seed, global_step, i), std::nullopt});
    ad::Var mix = pretrain_objective(ft, ex, config, config.coverage);
    ad::Var total = loss::total_loss(loss::rl_loss(static_cast<Real>(r_b), static_cast<Real>(r_s), log_prob), mix,
                                     static_cast<Real>(config.mu));
    stats.loss += total.item();
    stats.reward += r_s;
    stats.baseline += r_b;
    g.backward(ad::scale(total, inv), grads);
  }
  const double n = double(batch.size());
  stats.loss /= n;
  stats.reward /= n;
  stats.baseline /= n;
  apply_update(params, adam, grads, config, config.rl_lr, stats);
  return stats;
}

double validation_loss(const model::ModelParams& params, std::span<const EncodedExample> examples,
                       bool coverage_on) {
  if (examples.empty()) return kNaN;
  double total = 0;
  for (const auto& ex : examples) {
    ad::Graph g(&params.store, false);
    model::Forward fw(params, g);
    const corpus::ExampleView view = corpus::view_of(ex);
    model::TeacherForced tf = model::run_teacher_forced(fw, view, view.decoder_inputs, coverage_on);
    total += loss::mle_loss(tf.distributions, view.decoder_targets).item();
  }
  return total / double(examples.size());
}

double teacher_forced_accuracy(const model::ModelParams& params, std::span<const EncodedExample> examples,
                               bool coverage_on) {
  std::size_t hits = 0, total = 0;
  for (const auto& ex : examples) {
    ad::Graph g(&params.store, false);
    model::Forward fw(params, g);
    const corpus::ExampleView view = corpus::view_of(ex);
    model::TeacherForced tf = model::run_teacher_forced(fw, view, view.decoder_inputs, coverage_on);
    for (std::size_t t = 0; t < view.decoder_targets.size(); ++t) {
      const auto p = tf.distributions[t].value().values();
      const auto best = std::max_element(p.begin(), p.end()) - p.begin();
      hits += best == view.decoder_targets[t];
      ++total;
    }
  }
  return total ? double(hits) / double(total) : kNaN;
}

double mean_greedy_reward(const model::ModelParams& params, std::span<const EncodedExample> examples,
                          const corpus::Vocabulary& vocab, const TrainConfig& config,
                          const metrics::RewardFn& reward, bool coverage_on) {
  if (examples.empty()) return kNaN;
  const auto hyps = generate_endings(params, vocab, examples, config, 1, coverage_on);
  double total = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) total += reward(hyps[i], examples[i].ending_tokens);
  return total / double(examples.size());
}

TrainResult run_pretrain(Checkpoint state, std::span<const EncodedExample> train,
                         std::span<const EncodedExample> val, const corpus::Vocabulary& vocab,
                         const TrainHooks& hooks) {
  if (state.progress.phase != Phase::kPretrain) throw ConfigError("checkpoint is not in the pre-training phase");
  state.config.validate();
  check_data(state, train, vocab);
  const std::span<const EncodedExample> held_out = val.empty() ? train : val;
  auto cov = [](const Checkpoint& c) {
    return c.config.coverage && c.progress.epoch >= c.config.coverage_start_epoch;
  };
  PhaseDriver phase;
  phase.higher_is_better = false;
  phase.step = [&](Checkpoint& c, const ExampleRefs& batch) {
    return pretrain_step(c.params, c.adam, batch, c.config, cov(c), c.progress.global_step);
  };
  phase.validate = [&](const Checkpoint& c) { return validation_loss(c.params, held_out, cov(c)); };
  const std::size_t epochs = state.config.max_epochs;
  return drive(std::move(state), train, hooks, epochs, phase);
}

TrainResult run_finetune(Checkpoint state, std::span<const EncodedExample> train,
                         std::span<const EncodedExample> val, const corpus::Vocabulary& vocab,
                         const TrainHooks& hooks) {
  if (state.progress.phase != Phase::kFinetune) throw ConfigError("checkpoint is not in the fine-tuning phase");
  state.config.validate();
  check_data(state, train, vocab);
  const std::span<const EncodedExample> held_out = val.empty() ? train : val;
  const metrics::RewardFn reward = reward_for(state.config, train);
  PhaseDriver phase;
  phase.higher_is_better = true;
  phase.step = [&](Checkpoint& c, const ExampleRefs& batch) {
    return rl_step(c.params, c.adam, batch, c.config, vocab, reward, c.progress.global_step);
  };
  phase.validate = [&](const Checkpoint& c) {
    return mean_greedy_reward(c.params, held_out, vocab, c.config, reward, c.config.coverage);
  };
  const std::size_t epochs = state.config.rl_epochs;
  return drive(std::move(state), train, hooks, epochs, phase);
}

TrainResult pretrain(const TrainConfig& config, std::span<const EncodedExample> train,
                     std::span<const EncodedExample> val, const corpus::Vocabulary& vocab,
                     const TrainHooks& hooks) {
  return run_pretrain(initial_checkpoint(config, vocab), train, val, vocab, hooks);
}

TrainResult rl_finetune(const TrainConfig& config, std::span<const EncodedExample> train,
                        std::span<const EncodedExample> val, const corpus::Vocabulary& vocab,
                        const Checkpoint& pretrained, const TrainHooks& hooks) {
  return run_finetune(finetune_start(pretrained, config), train, val, vocab, hooks);
}

std::vector<corpus::Tokens> generate_endings(const model::ModelParams& params, const corpus::Vocabulary& vocab,
                                             std::span<const EncodedExample> examples, const TrainConfig& config,
                                             std::size_t beam, bool coverage_on) {
  const decode::DecodeOptions dopt = config.decode_options();
  std::vector<corpus::Tokens> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    ad::Graph g(&params.store, false);
    model::Forward fw(params, g);
    const corpus::ExampleView view = corpus::view_of(ex);
    const model::EncoderOutput enc = model::encode(fw, view.plot_ids, view.plot_mask);
    decode::GeneratorStepper stepper(fw, enc, view, coverage_on);
    const auto hyp = beam == 1 ? decode::greedy_decode(stepper, dopt) : decode::beam_search(stepper, beam, dopt);
    out.push_back(realize(hyp.tokens, vocab, ex));
  }
  return out;
}

SplitEvaluation evaluate_split(const Checkpoint& ckpt, const corpus::Vocabulary& vocab,
                               std::span<const EncodedExample> examples, std::size_t beam,
                               const metrics::WordVectorTable* vectors) {
  if (ckpt.vocab_hash != vocab.hash()) throw ConfigError("vocabulary does not match the checkpoint (hash mismatch)");
  SplitEvaluation out;
  out.hypotheses = generate_endings(ckpt.params, vocab, examples, ckpt.config, beam, coverage_active(ckpt));
  std::vector<corpus::Tokens> refs;
  refs.reserve(examples.size());
  for (const auto& ex : examples) refs.push_back(ex.ending_tokens);
  out.report = metrics::evaluate(out.hypotheses, refs, vectors);
  return out;
}

}  // namespace endgen::train
