#include "endgen/model.hpp"

#include <algorithm>
#include <string>

#include "endgen/errors.hpp"

namespace endgen::model {

namespace {

LstmWeights add_lstm(ad::ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden) {
  LstmWeights w;
  w.input = store.add(prefix + ".w_input", Tensor({4 * hidden, in}));
  w.hidden = store.add(prefix + ".w_hidden", Tensor({4 * hidden, hidden}));
  w.bias = store.add(prefix + ".bias", Tensor({4 * hidden}));
  return w;
}

bool is_bias(const std::string& name) {
  const auto dot = name.rfind('.');
  const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
  return leaf == "bias" || leaf == "b";
}

}  // namespace

ModelParams make_params(const ModelConfig& config) {
  if (config.vocab_size <= corpus::kNumSpecials || config.embed_dim == 0 || config.hidden_dim == 0) {
    throw ConfigError("model dimensions must be positive and the vocabulary must exceed the specials");
  }
  if (config.dropout < 0 || config.dropout >= 1) throw ConfigError("dropout must lie in [0, 1)");
  const std::size_t V = config.vocab_size;
  const std::size_t E = config.embed_dim;
  const std::size_t H = config.hidden_dim;
  const std::size_t A = config.attn_dim();

  ModelParams p;
  p.config = config;
  auto& s = p.store;
  p.embedding = s.add("embedding", Tensor({V, E}));
  p.enc_fwd = add_lstm(s, "encoder.forward", E, H);
  p.enc_bwd = add_lstm(s, "encoder.backward", E, H);
  p.bridge_h_w = s.add("bridge.h.w", Tensor({H, 2 * H}));
  p.bridge_h_b = s.add("bridge.h.b", Tensor({H}));
  p.bridge_c_w = s.add("bridge.c.w", Tensor({H, 2 * H}));
  p.bridge_c_b = s.add("bridge.c.b", Tensor({H}));
  p.dec = add_lstm(s, "decoder", E + 2 * H, H);
  p.att_enc = s.add("attention.w_enc", Tensor({2 * H, A}));
  p.att_dec = s.add("attention.w_dec", Tensor({A, H}));
  p.att_cov = s.add("attention.w_cov", Tensor({A}));
  p.att_v = s.add("attention.v", Tensor({A}));
  p.out_hidden_w = s.add("output.hidden.w", Tensor({H, 3 * H}));
  p.out_hidden_b = s.add("output.hidden.b", Tensor({H}));
  p.out_vocab_w = s.add("output.vocab.w", Tensor({V, H}));
  p.out_vocab_b = s.add("output.vocab.b", Tensor({V}));
  p.gen_ctx = s.add("pgen.w_ctx", Tensor({2 * H}));
  p.gen_state = s.add("pgen.w_state", Tensor({H}));
  p.gen_input = s.add("pgen.w_input", Tensor({E + 2 * H}));
  p.gen_bias = s.add("pgen.b", Tensor({1}));
  return p;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = make_params(config);
  Rng rng(seed);
  for (ParamId id = 0; id < p.store.size(); ++id) {
    if (is_bias(p.store.name(id))) continue;
    for (Real& v : p.store.value(id).values()) v = static_cast<Real>(rng.uniform(-0.1, 0.1));
  }
  return p;
}

// ---------------------------------------------------------------------------

Forward::Forward(const ModelParams& params, ad::Graph& graph, ForwardOptions options)
    : params_(params), graph_(graph), options_(options), rng_(options.dropout_seed) {
  if (graph.params() != &params.store) throw ContractError("graph is not bound to this model's parameters");
}

Var Forward::dropout(Var x) {
  const double rate = params_.config.dropout;
  if (!options_.train || rate <= 0) return x;
  Tensor mask(x.shape());
  const Real keep_scale = Real(1.0 / (1.0 - rate));
  for (Real& m : mask.values()) m = rng_.uniform() < rate ? Real(0) : keep_scale;
  return ad::mul(x, graph_.constant(std::move(mask)));
}

Var Forward::embed(TokenId id) {
  if (id < 0) throw IndexError("negative token id " + std::to_string(id));
  const TokenId row = static_cast<std::size_t>(id) >= params_.config.vocab_size ? corpus::kUnk : id;
  const int ids[1] = {row};
  return ad::reshape(ad::gather(param(params_.embedding), ids), {params_.config.embed_dim});
}

LstmState lstm_step(Forward& fw, const LstmWeights& w, Var x, LstmState state) {
  const std::size_t H = fw.params().store.value(w.hidden).dim(1);
  Var gates = ad::matmul(fw.param(w.input), x) + ad::matmul(fw.param(w.hidden), state.h) + fw.param(w.bias);
  Var i = ad::sigmoid(ad::slice(gates, 0, H));
  Var f = ad::sigmoid(ad::slice(gates, H, H));
  Var g = ad::tanh(ad::slice(gates, 2 * H, H));
  Var o = ad::sigmoid(ad::slice(gates, 3 * H, H));
  Var c = f * state.c + i * g;
  Var h = o * ad::tanh(c);
  return {h, c};
}

std::size_t prefix_length(std::span<const std::uint8_t> mask, std::size_t full) {
  if (mask.empty()) return full;
  if (mask.size() != full) throw ShapeError("mask length does not match sequence length");
  std::size_t n = 0;
  while (n < mask.size() && mask[n]) ++n;
  for (std::size_t i = n; i < mask.size(); ++i) {
    if (mask[i]) throw ContractError("mask must be a contiguous valid prefix followed by padding");
  }
  return n;
}

EncoderOutput encode(Forward& fw, std::span<const TokenId> plot_ids, std::span<const std::uint8_t> mask) {
  const auto& P = fw.params();
  const std::size_t H = P.config.hidden_dim;
  const std::size_t T = prefix_length(mask, plot_ids.size());
  if (T == 0) throw ContractError("cannot encode an empty (all-padding) plot");

  std::vector<Var> inputs;
  inputs.reserve(T);
  for (std::size_t i = 0; i < T; ++i) inputs.push_back(fw.dropout(fw.embed(plot_ids[i])));

  std::vector<LstmState> fwd(T), bwd(T);
  LstmState s{fw.zeros(H), fw.zeros(H)};
  for (std::size_t i = 0; i < T; ++i) fwd[i] = s = lstm_step(fw, P.enc_fwd, inputs[i], s);
  s = {fw.zeros(H), fw.zeros(H)};
  for (std::size_t i = T; i-- > 0;) bwd[i] = s = lstm_step(fw, P.enc_bwd, inputs[i], s);

  std::vector<Var> rows;
  rows.reserve(T);
  for (std::size_t i = 0; i < T; ++i) rows.push_back(ad::concat({fwd[i].h, bwd[i].h}));

  EncoderOutput out;
  out.length = T;
  out.mask.assign(T, 1);
  out.states = ad::stack(rows);
  out.attn_features = ad::matmul(out.states, fw.param(P.att_enc));
  Var h_cat = ad::concat({fwd[T - 1].h, bwd[0].h});
  Var c_cat = ad::concat({fwd[T - 1].c, bwd[0].c});
  out.bridged.h = ad::tanh(ad::matmul(fw.param(P.bridge_h_w), h_cat) + fw.param(P.bridge_h_b));
  out.bridged.c = ad::tanh(ad::matmul(fw.param(P.bridge_c_w), c_cat) + fw.param(P.bridge_c_b));
  out.v_plot = out.bridged.h;
  return out;
}

AttentionResult attention(Forward& fw, const EncoderOutput& enc, Var decoder_h, Var coverage, bool coverage_enabled) {
  const auto& P = fw.params();
  const std::size_t T = enc.length;
  const std::size_t A = P.config.attn_dim();
  if (coverage.size() != T) throw ShapeError("coverage vector length does not match encoder length");

  Var dec_feat = ad::matmul(fw.param(P.att_dec), decoder_h);  // [A]
  Var feats = enc.attn_features + ad::broadcast_rows(dec_feat, T);
  if (coverage_enabled) {
    Var cov = ad::matmul(ad::reshape(coverage, {T, 1}), ad::reshape(fw.param(P.att_cov), {1, A}));
    feats = feats + cov;
  }
  Var scores = ad::matmul(ad::tanh(feats), fw.param(P.att_v));  // [T]
  Var alpha = ad::softmax(scores, enc.mask);
  Var context = ad::matmul(alpha, enc.states);  // [2H]
  return {alpha, context};
}

DecoderState initial_decoder_state(Forward& fw, const EncoderOutput& enc) {
  DecoderState s;
  s.lstm = enc.bridged;
  s.context = fw.zeros(2 * fw.config().hidden_dim);
  s.coverage = fw.zeros(enc.length);
  s.step = 0;
  return s;
}

DecoderStep decoder_step(Forward& fw, const EncoderOutput& enc, TokenId prev_id, const DecoderState& state,
                         bool coverage_enabled) {
  const auto& P = fw.params();
  Var emb = fw.dropout(fw.embed(prev_id));
  Var input = ad::concat({emb, state.context});  // y_t
  LstmState lstm = lstm_step(fw, P.dec, input, state.lstm);

  AttentionResult att = attention(fw, enc, lstm.h, state.coverage, coverage_enabled);

  Var features = fw.dropout(ad::concat({lstm.h, att.context}));
  Var hidden = ad::matmul(fw.param(P.out_hidden_w), features) + fw.param(P.out_hidden_b);
  Var logits = ad::matmul(fw.param(P.out_vocab_w), hidden) + fw.param(P.out_vocab_b);
  Var p_vocab = ad::softmax(logits);

  Var p_gen;
  if (fw.options().forced_pgen) {
    p_gen = fw.graph().constant(Tensor::scalar(*fw.options().forced_pgen));
  } else {
    Var gate = ad::dot(fw.param(P.gen_ctx), att.context) + ad::dot(fw.param(P.gen_state), lstm.h) +
               ad::dot(fw.param(P.gen_input), input) + fw.param(P.gen_bias);
    p_gen = ad::sigmoid(gate);
  }

  DecoderStep out;
  out.hidden = lstm.h;
  out.alpha = att.alpha;
  out.context = att.context;
  out.p_vocab = p_vocab;
  out.p_gen = p_gen;
  out.coverage = state.coverage;
  out.next.lstm = lstm;
  out.next.context = att.context;
  out.next.coverage = state.coverage + att.alpha;
  out.next.step = state.step + 1;
  return out;
}

Var final_distribution(Var p_vocab, Var alpha, Var p_gen, std::span<const TokenId> plot_ext_ids,
                       std::size_t max_oov) {
  ad::Graph& g = p_vocab.graph();
  if (alpha.size() != plot_ext_ids.size()) {
    throw ShapeError("attention has " + std::to_string(alpha.size()) + " positions but the plot has " +
                     std::to_string(plot_ext_ids.size()));
  }
  Var vocab_part = ad::mul(p_vocab, p_gen);
  if (max_oov > 0) vocab_part = ad::concat({vocab_part, g.constant(Tensor({max_oov}))});
  Var copy_weight = ad::sub(g.constant(Tensor::scalar(1)), p_gen);
  return ad::scatter_add(vocab_part, plot_ext_ids, ad::mul(alpha, copy_weight));
}

SemanticVectors semantic_vectors(const EncoderOutput& enc, Var final_decoder_h) {
  return {enc.v_plot, ad::sub(final_decoder_h, enc.v_plot)};
}

TeacherForced run_teacher_forced(Forward& fw, const corpus::ExampleView& example, std::span<const TokenId> inputs,
                                 bool coverage_enabled) {
  if (inputs.empty()) throw ContractError("teacher forcing needs at least one decoder input");
  TeacherForced out;
  out.encoder = encode(fw, example.plot_ids, example.plot_mask);
  const auto ext_ids = example.plot_ext_ids.first(out.encoder.length);
  DecoderState state = initial_decoder_state(fw, out.encoder);
  for (TokenId prev : inputs) {
    DecoderStep step = decoder_step(fw, out.encoder, prev, state, coverage_enabled);
    out.distributions.push_back(final_distribution(step.p_vocab, step.alpha, step.p_gen, ext_ids, example.num_oov));
    out.alphas.push_back(step.alpha);
    out.coverages.push_back(step.coverage);
    out.hiddens.push_back(step.hidden);
    state = step.next;
  }
  out.final_hidden = out.hiddens.back();
  return out;
}

}  // namespace endgen::model
