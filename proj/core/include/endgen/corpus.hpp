#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace endgen::corpus {

using TokenId = int;
using Tokens = std::vector<std::string>;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kBos = 2;
inline constexpr TokenId kEos = 3;
inline constexpr std::size_t kNumSpecials = 4;

/// Four plot sentences followed by the ending sentence.
struct Story {
  std::string id;
  std::array<Tokens, 4> plot;
  Tokens ending;

  /// Plot sentences concatenated in order, no separators.
  Tokens plot_tokens() const;
};

/// Lowercases, splits on whitespace, and splits each of . , ! ? ; : ' " ( )
/// into its own token.
Tokens tokenize(std::string_view text);

/// Joins tokens so that tokenize(detokenize(t)) == t for tokenizer output.
std::string detokenize(const Tokens& tokens);

/// Reads a ROCStories-style CSV with header
/// storyid,storytitle,sentence1,...,sentence5. Row numbers in errors count the
/// header as row 1.
std::vector<Story> parse_corpus(std::istream& in, std::string_view split = "train");
std::vector<Story> parse_corpus(const std::filesystem::path& path, std::string_view split = "train");

/// Number of distinct tokens over plots and endings.
std::size_t distinct_token_count(std::span<const Story> stories);

/// Fixed token <-> id table. Specials occupy ids 0..3.
class Vocabulary {
 public:
  Vocabulary();

  /// Builds from (token, count) pairs already in rank order.
  static Vocabulary from_ranked(std::vector<std::pair<std::string, std::uint64_t>> ranked);
  static Vocabulary read(std::istream& in);
  static Vocabulary load(const std::filesystem::path& path);

  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  /// The vocabulary file contents: one "token\tcount" line per non-special entry.
  std::string serialize() const;
  /// FNV-1a 64 of serialize().
  std::uint64_t hash() const;

  std::size_t size() const noexcept { return tokens_.size(); }
  /// Id of `token`, or kUnk.
  TokenId id(std::string_view token) const;
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::uint64_t count(TokenId id) const { return counts_.at(static_cast<std::size_t>(id)); }
  bool contains(std::string_view token) const { return find(token).has_value(); }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_ && counts_ == other.counts_; }

 private:
  void push(std::string token, std::uint64_t count);

  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Top-(cap - 4) tokens by frequency, ties broken lexicographically.
Vocabulary build_vocab(std::span<const Story> stories, std::size_t cap);

struct EncodeLimits {
  std::size_t max_plot_len = 80;
  /// Upper bound on decoded length including the trailing EOS.
  std::size_t max_end_len = 20;
};

/// One story in id space. Ids >= vocab size are per-example extended ids
/// for source OOV words (the j-th distinct one gets V + j).
struct EncodedExample {
  std::string id;
  std::size_t vocab_size = 0;
  std::vector<TokenId> plot_ids;      // OOV -> UNK
  std::vector<TokenId> plot_ext_ids;  // OOV -> extended id
  Tokens oov_words;
  std::vector<TokenId> decoder_inputs;   // BOS + ending (extended space)
  std::vector<TokenId> decoder_targets;  // ending + EOS (extended space)
  Tokens ending_tokens;                  // truncated gold ending

  std::size_t extended_size() const noexcept { return vocab_size + oov_words.size(); }
};

EncodedExample encode_example(const Story& story, const Vocabulary& vocab, const EncodeLimits& limits = {});

/// Maps ids back to tokens; extended ids resolve through `oov_words`.
Tokens ids_to_tokens(std::span<const TokenId> ids, const Vocabulary& vocab, const Tokens& oov_words);

/// Read-only view of one example as consumed by the model.
struct ExampleView {
  std::span<const TokenId> plot_ids;
  std::span<const TokenId> plot_ext_ids;
  std::span<const std::uint8_t> plot_mask;  // empty = all positions valid
  std::span<const TokenId> decoder_inputs;
  std::span<const TokenId> decoder_targets;
  std::span<const std::uint8_t> target_mask;  // empty = all steps valid
  std::size_t num_oov = 0;
};

ExampleView view_of(const EncodedExample& example);

/// Padded, rectangular batch of examples.
struct Batch {
  std::size_t rows = 0;
  std::size_t plot_len = 0;
  std::size_t target_len = 0;
  std::vector<TokenId> plot_ids;
  std::vector<TokenId> plot_ext_ids;
  std::vector<std::uint8_t> plot_mask;
  std::vector<TokenId> decoder_inputs;
  std::vector<TokenId> decoder_targets;
  std::vector<std::uint8_t> target_mask;
  std::vector<std::size_t> plot_lengths;
  std::vector<std::size_t> target_lengths;
  std::vector<std::size_t> oov_counts;
  std::size_t max_oov_count = 0;

  ExampleView row(std::size_t r) const;
};

Batch pad_batch(std::span<const EncodedExample> examples, TokenId pad = kPad);

}  // namespace endgen::corpus
