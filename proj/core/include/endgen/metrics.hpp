#pragma once

// Automatic evaluation metrics and the reward functions used for
// self-critical fine-tuning. Every function works on tokenizer output.

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "endgen/corpus.hpp"

namespace endgen::metrics {

using corpus::Tokens;

enum class BleuMode { kCorpus, kSentence };

/// BLEU-n with clipped n-gram precision and brevity penalty. Sentence mode
/// scores a single pair (the lists must have one entry each) with add-one
/// smoothing on orders >= 2.
double bleu(std::span<const Tokens> hypotheses, std::span<const Tokens> references, int n, BleuMode mode);
double sentence_bleu(const Tokens& hypothesis, const Tokens& reference, int n);

std::size_t lcs_length(const Tokens& a, const Tokens& b);

/// LCS F-measure with recall weight beta.
double rouge_l(const Tokens& hypothesis, const Tokens& reference, double beta = 1.2);
/// Mean of pairwise ROUGE-L.
double rouge_l(std::span<const Tokens> hypotheses, std::span<const Tokens> references, double beta = 1.2);

/// CIDEr-D with document frequencies taken from a fixed reference set.
class CiderScorer {
 public:
  explicit CiderScorer(std::span<const Tokens> references);

  /// Score of one pair, in [0, 10].
  double score(const Tokens& hypothesis, const Tokens& reference) const;
  double corpus_score(std::span<const Tokens> hypotheses, std::span<const Tokens> references) const;

 private:
  std::unordered_map<std::string, double> doc_freq_;
  double log_ref_count_;
};

/// CIDEr-D over a corpus, IDF from that corpus's references.
double cider(std::span<const Tokens> hypotheses, std::span<const Tokens> references);

/// Word vectors from a text file: "token v1 ... vd" per line. A leading
/// "<count> <dim>" header line is accepted and skipped.
class WordVectorTable {
 public:
  WordVectorTable() = default;
  explicit WordVectorTable(std::size_t dimension) : dim_(dimension) {}

  static WordVectorTable read(std::istream& in);
  static WordVectorTable load(const std::filesystem::path& path);

  void add(std::string token, std::vector<double> vector);
  std::size_t dimension() const noexcept { return dim_; }
  std::size_t size() const noexcept { return vectors_.size(); }
  bool empty() const noexcept { return vectors_.empty(); }
  /// Null for unknown tokens.
  const std::vector<double>* find(std::string_view token) const;
  /// Zero vector for unknown tokens.
  std::vector<double> lookup(std::string_view token) const;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

struct EmbeddingScores {
  double eacs = 0;  // embedding average cosine
  double vecs = 0;  // vector extrema cosine
  double gms = 0;   // greedy matching score
};

EmbeddingScores embedding_scores(const Tokens& hypothesis, const Tokens& reference, const WordVectorTable& vectors);
/// Corpus means of the per-pair scores.
EmbeddingScores embedding_metrics(std::span<const Tokens> hypotheses, std::span<const Tokens> references,
                                  const WordVectorTable& vectors);

/// Cosine of two equal-length vectors; 0 when either is zero.
double cosine(std::span<const double> a, std::span<const double> b);

struct MetricReport {
  std::size_t pairs = 0;
  std::array<double, 4> bleu{};                // corpus BLEU-1..4
  std::array<double, 4> bleu_sentence_mean{};  // mean smoothed sentence BLEU-1..4
  double rouge_l = 0;
  double cider = 0;
  std::optional<EmbeddingScores> embedding;

  /// Key-value block, scores x100 with two decimals.
  std::string to_text() const;
  /// Raw (unscaled) scores as a JSON document.
  std::string to_json() const;
};

MetricReport evaluate(std::span<const Tokens> hypotheses, std::span<const Tokens> references,
                      const WordVectorTable* vectors = nullptr);

/// Scalar reward in [0, 1] of a generated ending against the gold ending.
using RewardFn = std::function<double(const Tokens& hypothesis, const Tokens& reference)>;

/// Smoothed sentence BLEU-4; the default reward.
double reward(const Tokens& hypothesis, const Tokens& reference);

/// Named reward functions: "bleu4" (default), "rouge_l", "cider". The CIDEr
/// reward takes its document frequencies from `idf_references` and is scaled
/// into [0, 1].
class RewardRegistry {
 public:
  using Factory = std::function<RewardFn(std::span<const Tokens> idf_references)>;

  static RewardRegistry& instance();

  void add(std::string name, Factory factory);
  RewardFn make(std::string_view name, std::span<const Tokens> idf_references = {}) const;
  std::vector<std::string> names() const;
  bool contains(std::string_view name) const;

 private:
  RewardRegistry();
  std::map<std::string, Factory, std::less<>> factories_;
};

}  // namespace endgen::metrics
