#include "endgen/decode.hpp"

#include <string>

namespace endgen::decode {

GeneratorStepper::GeneratorStepper(model::Forward& fw, const model::EncoderOutput& enc,
                                   const corpus::ExampleView& example, bool coverage_enabled)
    : fw_(fw),
      enc_(enc),
      ext_ids_(example.plot_ext_ids.begin(), example.plot_ext_ids.begin() + static_cast<std::ptrdiff_t>(enc.length)),
      num_oov_(example.num_oov),
      extended_size_(fw.config().vocab_size + example.num_oov),
      coverage_(coverage_enabled) {}

GeneratorStepper::State GeneratorStepper::initial() { return model::initial_decoder_state(fw_, enc_); }

StepOutput<GeneratorStepper::State> GeneratorStepper::step(const State& state, TokenId prev) {
  model::DecoderStep s = model::decoder_step(fw_, enc_, prev, state, coverage_);
  ad::Var dist = model::final_distribution(s.p_vocab, s.alpha, s.p_gen, ext_ids_, num_oov_);
  const auto values = dist.value().values();
  return {std::vector<Real>(values.begin(), values.end()), s.next};
}

corpus::Tokens realize(std::span<const TokenId> ids, const corpus::Vocabulary& vocab,
                       const corpus::Tokens& oov_words) {
  std::vector<TokenId> kept;
  const auto limit = static_cast<TokenId>(vocab.size() + oov_words.size());
  for (TokenId id : ids) {
    if (id < 0 || id >= limit) {
      throw IndexError("decoded id " + std::to_string(id) + " outside extended vocabulary of size " +
                       std::to_string(limit));
    }
    if (id == corpus::kBos || id == corpus::kEos || id == corpus::kPad) continue;
    kept.push_back(id);
  }
  return corpus::ids_to_tokens(kept, vocab, oov_words);
}

}  // namespace endgen::decode
