#pragma once

// Greedy, sampled and beam-search decoding over the extended vocabulary.
//
// The search routines are written against a small step-model interface so the
// same code drives the real generator and hand-built toy distributions:
//
//   struct M {
//     using State = ...;
//     State initial();
//     StepOutput<State> step(const State& s, TokenId prev);
//   };

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "endgen/corpus.hpp"
#include "endgen/errors.hpp"
#include "endgen/model.hpp"
#include "endgen/random.hpp"

namespace endgen::decode {

using corpus::TokenId;

struct DecodeOptions {
  std::size_t max_len = 20;  // tokens emitted, EOS included
  bool suppress_unk = false;
  bool length_normalize = true;  // beam ranking only
  TokenId bos = corpus::kBos;
  TokenId eos = corpus::kEos;
  TokenId unk = corpus::kUnk;
};

template <typename State>
struct StepOutput {
  std::vector<Real> probs;  // over the extended vocabulary
  State next;
};

template <typename M>
concept StepModel = requires(M& m, const typename M::State& s, TokenId id) {
  { m.initial() } -> std::convertible_to<typename M::State>;
  { m.step(s, id) } -> std::convertible_to<StepOutput<typename M::State>>;
};

template <typename State>
struct Hypothesis {
  std::vector<TokenId> tokens;
  double log_prob = 0;
  State state{};
  bool finished = false;

  double score(bool normalize) const {
    return normalize && !tokens.empty() ? log_prob / double(tokens.size()) : log_prob;
  }
};

namespace detail {

inline double safe_log(Real p) { return std::log(std::max<double>(p, 1e-12)); }

inline void apply_suppression(std::vector<Real>& probs, const DecodeOptions& opt) {
  if (opt.suppress_unk && opt.unk >= 0 && static_cast<std::size_t>(opt.unk) < probs.size()) probs[opt.unk] = 0;
}

inline TokenId argmax(const std::vector<Real>& probs) {
  TokenId best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[static_cast<std::size_t>(best)]) best = static_cast<TokenId>(i);
  }
  return best;
}

inline void check_options(const DecodeOptions& opt) {
  if (opt.max_len == 0) throw ConfigError("max decode length must be >= 1");
}

}  // namespace detail

/// Argmax decoding; ties go to the lowest id.
template <StepModel M>
Hypothesis<typename M::State> greedy_decode(M& model, const DecodeOptions& opt = {}) {
  detail::check_options(opt);
  Hypothesis<typename M::State> hyp;
  hyp.state = model.initial();
  TokenId prev = opt.bos;
  while (!hyp.finished) {
    auto out = model.step(hyp.state, prev);
    std::vector<Real> probs = out.probs;
    detail::apply_suppression(probs, opt);
    const TokenId tok = detail::argmax(probs);
    hyp.log_prob += detail::safe_log(out.probs[static_cast<std::size_t>(tok)]);
    hyp.tokens.push_back(tok);
    hyp.state = std::move(out.next);
    prev = tok;
    hyp.finished = tok == opt.eos || hyp.tokens.size() >= opt.max_len;
  }
  return hyp;
}

/// Multinomial sampling from each step distribution.
template <StepModel M>
Hypothesis<typename M::State> sample_decode(M& model, Rng& rng, const DecodeOptions& opt = {}) {
  detail::check_options(opt);
  Hypothesis<typename M::State> hyp;
  hyp.state = model.initial();
  TokenId prev = opt.bos;
  while (!hyp.finished) {
    auto out = model.step(hyp.state, prev);
    std::vector<Real> probs = out.probs;
    detail::apply_suppression(probs, opt);
    const auto tok = static_cast<TokenId>(rng.categorical(probs));
    hyp.log_prob += detail::safe_log(out.probs[static_cast<std::size_t>(tok)]);
    hyp.tokens.push_back(tok);
    hyp.state = std::move(out.next);
    prev = tok;
    hyp.finished = tok == opt.eos || hyp.tokens.size() >= opt.max_len;
  }
  return hyp;
}

template <StepModel M>
Hypothesis<typename M::State> sample_decode(M& model, std::uint64_t seed, const DecodeOptions& opt = {}) {
  Rng rng(seed);
  return sample_decode(model, rng, opt);
}

/// Length-synchronous beam search. Each step keeps the `beam` best extensions
/// of the live hypotheses; extensions ending in EOS or reaching max_len are set
/// aside as finished. Returns the best finished hypothesis (length-normalized
/// when opt.length_normalize).
template <StepModel M>
Hypothesis<typename M::State> beam_search(M& model, std::size_t beam, const DecodeOptions& opt = {}) {
  using Hyp = Hypothesis<typename M::State>;
  detail::check_options(opt);
  if (beam < 1) throw ConfigError("beam size must be >= 1");

  struct Candidate {
    double log_prob;
    std::size_t parent;
    TokenId token;
  };

  std::vector<Hyp> live(1);
  live[0].state = model.initial();
  std::vector<Hyp> finished;

  while (!live.empty() && finished.size() < beam) {
    std::vector<Candidate> cands;
    std::vector<typename M::State> next_states;
    next_states.reserve(live.size());
    for (std::size_t h = 0; h < live.size(); ++h) {
      const TokenId prev = live[h].tokens.empty() ? opt.bos : live[h].tokens.back();
      auto out = model.step(live[h].state, prev);
      std::vector<Real> probs = out.probs;
      detail::apply_suppression(probs, opt);
      std::vector<TokenId> order;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        if (opt.suppress_unk && static_cast<TokenId>(i) == opt.unk) continue;
        order.push_back(static_cast<TokenId>(i));
      }
      const std::size_t keep = std::min(beam, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                        [&](TokenId a, TokenId b) {
                          const auto pa = out.probs[static_cast<std::size_t>(a)];
                          const auto pb = out.probs[static_cast<std::size_t>(b)];
                          return pa != pb ? pa > pb : a < b;
                        });
      for (std::size_t k = 0; k < keep; ++k) {
        const TokenId tok = order[k];
        cands.push_back({live[h].log_prob + detail::safe_log(out.probs[static_cast<std::size_t>(tok)]), h, tok});
      }
      next_states.push_back(std::move(out.next));
    }

    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      if (a.parent != b.parent) return a.parent < b.parent;
      return a.token < b.token;
    });

    std::vector<Hyp> next_live;
    for (std::size_t k = 0; k < cands.size() && k < beam; ++k) {
      const Candidate& c = cands[k];
      Hyp h;
      h.tokens = live[c.parent].tokens;
      h.tokens.push_back(c.token);
      h.log_prob = c.log_prob;
      h.state = next_states[c.parent];
      h.finished = c.token == opt.eos || h.tokens.size() >= opt.max_len;
      (h.finished ? finished : next_live).push_back(std::move(h));
    }
    live = std::move(next_live);
  }

  const std::vector<Hyp>& pool = finished.empty() ? live : finished;
  if (pool.empty()) throw ContractError("beam search produced no hypotheses");
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i) {
    if (pool[i].score(opt.length_normalize) > pool[best].score(opt.length_normalize)) best = i;
  }
  return pool[best];
}

/// Step model backed by the generator network.
class GeneratorStepper {
 public:
  using State = model::DecoderState;

  GeneratorStepper(model::Forward& fw, const model::EncoderOutput& enc, const corpus::ExampleView& example,
                   bool coverage_enabled);

  State initial();
  StepOutput<State> step(const State& state, TokenId prev);
  std::size_t extended_size() const noexcept { return extended_size_; }

 private:
  model::Forward& fw_;
  const model::EncoderOutput& enc_;
  std::vector<TokenId> ext_ids_;
  std::size_t num_oov_;
  std::size_t extended_size_;
  bool coverage_;
};

using DecodeHypothesis = Hypothesis<model::DecoderState>;

/// Token strings of a hypothesis; specials are dropped and extended ids map
/// to the example's OOV words.
corpus::Tokens realize(std::span<const TokenId> ids, const corpus::Vocabulary& vocab,
                       const corpus::Tokens& oov_words);

}  // namespace endgen::decode
