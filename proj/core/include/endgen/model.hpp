#pragma once

// The generator network: bidirectional LSTM encoder, a tanh bridge into the
// decoder, additive attention with an optional coverage term, an LSTM decoder,
// the generation gate p_gen, and the copy-mixed output distribution over the
// per-example extended vocabulary.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "endgen/autodiff.hpp"
#include "endgen/corpus.hpp"
#include "endgen/random.hpp"

namespace endgen::model {

using ad::Var;
using corpus::TokenId;
using ParamId = ad::ParamStore::Id;

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 512;
  std::size_t hidden_dim = 256;
  double dropout = 0.5;

  /// Width of the attention feature space (matches the 2H encoder states).
  std::size_t attn_dim() const noexcept { return 2 * hidden_dim; }
  bool operator==(const ModelConfig&) const = default;
};

struct LstmWeights {
  ParamId input;   // [4H x in]
  ParamId hidden;  // [4H x H]
  ParamId bias;    // [4H], gate order i, f, g, o
};

struct ModelParams {
  ModelConfig config;
  ad::ParamStore store;

  ParamId embedding;  // [V x E]
  LstmWeights enc_fwd;
  LstmWeights enc_bwd;
  ParamId bridge_h_w, bridge_h_b;  // [H x 2H], [H]
  ParamId bridge_c_w, bridge_c_b;
  LstmWeights dec;  // input is [emb || c_{t-1}]
  // Attention scores e_i = v . tanh(W_enc h_i + W_dec h_t + w_cov s_i).
  ParamId att_enc;  // [2H x A], applied to the row-stacked encoder states
  ParamId att_dec;  // [A x H]
  ParamId att_cov;  // [A]
  ParamId att_v;    // [A]
  // P_v = softmax(W_vocab (W_hidden [h_t, c_t] + b_hidden) + b_vocab)
  ParamId out_hidden_w, out_hidden_b;  // [H x 3H], [H]
  ParamId out_vocab_w, out_vocab_b;    // [V x H], [V]
  // p_gen = sigmoid(w_ctx . c_t + w_state . h_t + w_input . y_t + b)
  ParamId gen_ctx;    // [2H]
  ParamId gen_state;  // [H]
  ParamId gen_input;  // [E + 2H]
  ParamId gen_bias;   // [1]
};

/// Parameter layout with every value zero.
ModelParams make_params(const ModelConfig& config);
/// Uniform(-0.1, 0.1) weights and zero biases, deterministic per seed.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

struct ForwardOptions {
  bool train = false;  // enables dropout
  std::uint64_t dropout_seed = 0;
  std::optional<Real> forced_pgen;  // overrides the generation gate
};

/// Binds parameters to a graph for one forward computation.
class Forward {
 public:
  Forward(const ModelParams& params, ad::Graph& graph, ForwardOptions options = {});

  ad::Graph& graph() noexcept { return graph_; }
  const ModelParams& params() const noexcept { return params_; }
  const ModelConfig& config() const noexcept { return params_.config; }
  const ForwardOptions& options() const noexcept { return options_; }

  Var param(ParamId id) { return graph_.param(id); }
  Var zeros(std::size_t n) { return graph_.constant(Tensor({n})); }
  /// Inverted dropout in training mode; identity otherwise.
  Var dropout(Var x);
  /// Embedding row; ids outside the fixed vocabulary read the UNK row.
  Var embed(TokenId id);

 private:
  const ModelParams& params_;
  ad::Graph& graph_;
  ForwardOptions options_;
  Rng rng_;
};

struct LstmState {
  Var h;
  Var c;
};

LstmState lstm_step(Forward& fw, const LstmWeights& weights, Var x, LstmState state);

struct EncoderOutput {
  Var states;         // [T x 2H], row i = [fwd_i || bwd_i]
  Var attn_features;  // [T x A] = states * att_enc
  std::vector<std::uint8_t> mask;
  std::size_t length = 0;
  LstmState bridged;  // decoder initial state
  Var v_plot;         // bridged h
};

/// Runs the bidirectional encoder over the unpadded prefix given by `mask`
/// (empty mask = whole sequence).
EncoderOutput encode(Forward& fw, std::span<const TokenId> plot_ids, std::span<const std::uint8_t> mask);

struct AttentionResult {
  Var alpha;    // [T]
  Var context;  // [2H]
};

AttentionResult attention(Forward& fw, const EncoderOutput& enc, Var decoder_h, Var coverage, bool coverage_enabled);

struct DecoderState {
  LstmState lstm;
  Var context;   // c_{t-1}
  Var coverage;  // s^t
  std::size_t step = 0;
};

DecoderState initial_decoder_state(Forward& fw, const EncoderOutput& enc);

struct DecoderStep {
  Var hidden;    // h_t^d
  Var alpha;     // alpha^t
  Var context;   // c_t
  Var p_vocab;   // P_v over the fixed vocabulary
  Var p_gen;     // [1]
  Var coverage;  // s^t used by this step's attention
  DecoderState next;
};

DecoderStep decoder_step(Forward& fw, const EncoderOutput& enc, TokenId prev_id, const DecoderState& state,
                         bool coverage_enabled);

/// P_fin = p_gen * P_v + (1 - p_gen) * P_att over V + max_oov entries, where
/// P_att merges attention weights of positions sharing an extended id.
Var final_distribution(Var p_vocab, Var alpha, Var p_gen, std::span<const TokenId> plot_ext_ids,
                       std::size_t max_oov);

struct SemanticVectors {
  Var v_plot;
  Var v_gen;  // final decoder hidden minus v_plot
};

SemanticVectors semantic_vectors(const EncoderOutput& enc, Var final_decoder_h);

/// Per-step tensors of a teacher-forced decode.
struct TeacherForced {
  EncoderOutput encoder;
  std::vector<Var> distributions;  // P_fin per step
  std::vector<Var> alphas;
  std::vector<Var> coverages;  // s^t fed to step t
  std::vector<Var> hiddens;
  Var final_hidden;
};

/// Decodes along `inputs` (BOS-first, extended ids allowed), one step per input.
TeacherForced run_teacher_forced(Forward& fw, const corpus::ExampleView& example, std::span<const TokenId> inputs,
                                 bool coverage_enabled);

/// Number of valid (mask == 1) leading positions; throws if the mask is not a prefix.
std::size_t prefix_length(std::span<const std::uint8_t> mask, std::size_t full);

}  // namespace endgen::model
