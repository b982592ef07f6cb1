#include "endgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "endgen/errors.hpp"

namespace endgen::metrics {

namespace {

using NgramCounts = std::unordered_map<std::string, int>;

std::string ngram_key(const Tokens& toks, std::size_t start, std::size_t n) {
  std::string key;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) key.push_back('\x1f');
    key += toks[start + i];
  }
  return key;
}

NgramCounts count_ngrams(const Tokens& toks, std::size_t n) {
  NgramCounts counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++counts[ngram_key(toks, i, n)];
  return counts;
}

struct NgramStats {
  double matched = 0;
  double total = 0;
};

NgramStats clipped_stats(const Tokens& hyp, const Tokens& ref, std::size_t n) {
  const NgramCounts h = count_ngrams(hyp, n);
  const NgramCounts r = count_ngrams(ref, n);
  NgramStats s;
  for (const auto& [gram, c] : h) {
    s.total += c;
    auto it = r.find(gram);
    if (it != r.end()) s.matched += std::min(c, it->second);
  }
  return s;
}

void check_order(int n) {
  if (n < 1 || n > 4) throw ConfigError("BLEU order must be in 1..4");
}

void check_pairs(std::size_t hyps, std::size_t refs) {
  if (hyps != refs) {
    throw ContractError(std::to_string(hyps) + " hypotheses but " + std::to_string(refs) + " references");
  }
}

double brevity_penalty(double hyp_len, double ref_len) {
  if (hyp_len <= 0) return 0;
  return hyp_len < ref_len ? std::exp(1.0 - ref_len / hyp_len) : 1.0;
}

std::string fmt2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// BLEU

double sentence_bleu(const Tokens& hypothesis, const Tokens& reference, int n) {
  check_order(n);
  if (reference.empty()) throw ContractError("BLEU reference is empty");
  if (hypothesis.empty()) return 0;
  double log_sum = 0;
  for (int k = 1; k <= n; ++k) {
    NgramStats s = clipped_stats(hypothesis, reference, static_cast<std::size_t>(k));
    if (k >= 2) {
      s.matched += 1;
      s.total += 1;
    }
    if (s.matched <= 0 || s.total <= 0) return 0;
    log_sum += std::log(s.matched / s.total);
  }
  return brevity_penalty(double(hypothesis.size()), double(reference.size())) * std::exp(log_sum / n);
}

double bleu(std::span<const Tokens> hypotheses, std::span<const Tokens> references, int n, BleuMode mode) {
  check_order(n);
  check_pairs(hypotheses.size(), references.size());
  if (mode == BleuMode::kSentence) {
    if (hypotheses.size() != 1) throw ContractError("sentence BLEU scores exactly one pair");
    return sentence_bleu(hypotheses[0], references[0], n);
  }
  if (hypotheses.empty()) return 0;
  std::array<NgramStats, 4> agg{};
  double hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    if (references[i].empty()) throw ContractError("BLEU reference " + std::to_string(i) + " is empty");
    hyp_len += double(hypotheses[i].size());
    ref_len += double(references[i].size());
    for (int k = 1; k <= n; ++k) {
      const NgramStats s = clipped_stats(hypotheses[i], references[i], static_cast<std::size_t>(k));
      agg[k - 1].matched += s.matched;
      agg[k - 1].total += s.total;
    }
  }
  double log_sum = 0;
  for (int k = 0; k < n; ++k) {
    if (agg[k].matched <= 0 || agg[k].total <= 0) return 0;
    log_sum += std::log(agg[k].matched / agg[k].total);
  }
  return brevity_penalty(hyp_len, ref_len) * std::exp(log_sum / n);
}

// ---------------------------------------------------------------------------
// ROUGE-L

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Tokens& hypothesis, const Tokens& reference, double beta) {
  if (reference.empty()) throw ContractError("ROUGE-L reference is empty");
  if (hypothesis.empty()) return 0;
  const double lcs = double(lcs_length(hypothesis, reference));
  if (lcs == 0) return 0;
  const double p = lcs / double(hypothesis.size());
  const double r = lcs / double(reference.size());
  const double b2 = beta * beta;
  return (1 + b2) * p * r / (r + b2 * p);
}

double rouge_l(std::span<const Tokens> hypotheses, std::span<const Tokens> references, double beta) {
  check_pairs(hypotheses.size(), references.size());
  if (hypotheses.empty()) return 0;
  double total = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) total += rouge_l(hypotheses[i], references[i], beta);
  return total / double(hypotheses.size());
}

// ---------------------------------------------------------------------------
// CIDEr-D

namespace {

constexpr double kCiderSigma = 6.0;

struct CiderVector {
  std::array<std::unordered_map<std::string, double>, 4> weights;
  std::array<double, 4> norms{};
  double length = 0;
};

}  // namespace

CiderScorer::CiderScorer(std::span<const Tokens> references)
    : log_ref_count_(std::log(std::max<double>(1.0, double(references.size())))) {
  for (const auto& ref : references) {
    std::set<std::string> seen;
    for (std::size_t n = 1; n <= 4; ++n) {
      for (const auto& [gram, c] : count_ngrams(ref, n)) seen.insert(gram);
    }
    for (const auto& gram : seen) doc_freq_[gram] += 1;
  }
}

double CiderScorer::score(const Tokens& hypothesis, const Tokens& reference) const {
  auto vectorize = [&](const Tokens& toks) {
    CiderVector v;
    for (std::size_t n = 1; n <= 4; ++n) {
      for (const auto& [gram, tf] : count_ngrams(toks, n)) {
        auto it = doc_freq_.find(gram);
        const double df = std::log(std::max(1.0, it == doc_freq_.end() ? 0.0 : it->second));
        const double w = double(tf) * (log_ref_count_ - df);
        v.weights[n - 1][gram] = w;
        v.norms[n - 1] += w * w;
        if (n == 2) v.length += tf;  // CIDEr-D reference implementation measures length in bigrams
      }
    }
    for (double& nrm : v.norms) nrm = std::sqrt(nrm);
    return v;
  };
  const CiderVector h = vectorize(hypothesis);
  const CiderVector r = vectorize(reference);
  const double delta = h.length - r.length;
  double total = 0;
  for (std::size_t n = 0; n < 4; ++n) {
    double val = 0;
    for (const auto& [gram, wh] : h.weights[n]) {
      auto it = r.weights[n].find(gram);
      if (it == r.weights[n].end()) continue;
      val += std::min(wh, it->second) * it->second;
    }
    if (h.norms[n] != 0 && r.norms[n] != 0) val /= h.norms[n] * r.norms[n];
    val *= std::exp(-(delta * delta) / (2 * kCiderSigma * kCiderSigma));
    total += val;
  }
  return total / 4.0 * 10.0;
}

double CiderScorer::corpus_score(std::span<const Tokens> hypotheses, std::span<const Tokens> references) const {
  check_pairs(hypotheses.size(), references.size());
  if (hypotheses.empty()) return 0;
  double total = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) total += score(hypotheses[i], references[i]);
  return total / double(hypotheses.size());
}

double cider(std::span<const Tokens> hypotheses, std::span<const Tokens> references) {
  return CiderScorer(references).corpus_score(hypotheses, references);
}

// ---------------------------------------------------------------------------
// Embedding metrics

WordVectorTable WordVectorTable::read(std::istream& in) {
  WordVectorTable table;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;
    std::vector<double> vec;
    std::string field;
    while (ss >> field) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError("bad vector component '" + field + "'", row);
      }
    }
    if (row == 1 && vec.size() == 1 && token.find_first_not_of("0123456789") == std::string::npos) {
      continue;  // "<count> <dim>" header
    }
    if (vec.empty()) throw ParseError("token '" + token + "' has no vector", row);
    if (table.dim_ == 0) table.dim_ = vec.size();
    if (vec.size() != table.dim_) {
      throw ParseError("vector for '" + token + "' has " + std::to_string(vec.size()) + " components, expected " +
                           std::to_string(table.dim_),
                       row);
    }
    table.vectors_[token] = std::move(vec);
  }
  return table;
}

WordVectorTable WordVectorTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open word-vector file " + path.string(), 0);
  return read(in);
}

void WordVectorTable::add(std::string token, std::vector<double> vector) {
  if (dim_ == 0) dim_ = vector.size();
  if (vector.size() != dim_ || dim_ == 0) throw ShapeError("word vector dimension mismatch for '" + token + "'");
  vectors_[std::move(token)] = std::move(vector);
}

const std::vector<double>* WordVectorTable::find(std::string_view token) const {
  auto it = vectors_.find(std::string(token));
  return it == vectors_.end() ? nullptr : &it->second;
}

std::vector<double> WordVectorTable::lookup(std::string_view token) const {
  const auto* v = find(token);
  return v ? *v : std::vector<double>(dim_, 0.0);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine of vectors with different lengths");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 || bb == 0) return 0;
  // sqrt(aa * bb) rather than sqrt(aa) * sqrt(bb): exact 1 for identical inputs.
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

namespace {

std::vector<const std::vector<double>*> known_vectors(const Tokens& toks, const WordVectorTable& table) {
  std::vector<const std::vector<double>*> out;
  for (const auto& t : toks) {
    if (const auto* v = table.find(t)) out.push_back(v);
  }
  return out;
}

std::vector<double> average(const std::vector<const std::vector<double>*>& vecs, std::size_t dim) {
  std::vector<double> out(dim, 0.0);
  for (const auto* v : vecs) {
    for (std::size_t d = 0; d < dim; ++d) out[d] += (*v)[d];
  }
  for (double& x : out) x /= double(vecs.size());
  return out;
}

std::vector<double> extrema(const std::vector<const std::vector<double>*>& vecs, std::size_t dim) {
  std::vector<double> out(dim, 0.0);
  for (std::size_t d = 0; d < dim; ++d) {
    double hi = (*vecs[0])[d], lo = hi;
    for (const auto* v : vecs) {
      hi = std::max(hi, (*v)[d]);
      lo = std::min(lo, (*v)[d]);
    }
    out[d] = std::abs(lo) > std::abs(hi) ? lo : hi;
  }
  return out;
}

double greedy_direction(const std::vector<const std::vector<double>*>& from,
                        const std::vector<const std::vector<double>*>& to) {
  double total = 0;
  for (const auto* f : from) {
    double best = -1;
    for (const auto* t : to) best = std::max(best, cosine(*f, *t));
    total += best;
  }
  return total / double(from.size());
}

}  // namespace

EmbeddingScores embedding_scores(const Tokens& hypothesis, const Tokens& reference, const WordVectorTable& vectors) {
  if (vectors.empty()) throw ContractError("word-vector table is empty");
  const auto h = known_vectors(hypothesis, vectors);
  const auto r = known_vectors(reference, vectors);
  EmbeddingScores s;
  if (h.empty() || r.empty()) return s;
  const std::size_t dim = vectors.dimension();
  s.eacs = cosine(average(h, dim), average(r, dim));
  s.vecs = cosine(extrema(h, dim), extrema(r, dim));
  s.gms = (greedy_direction(h, r) + greedy_direction(r, h)) / 2.0;
  return s;
}

EmbeddingScores embedding_metrics(std::span<const Tokens> hypotheses, std::span<const Tokens> references,
                                  const WordVectorTable& vectors) {
  check_pairs(hypotheses.size(), references.size());
  if (vectors.empty()) throw ContractError("word-vector table is empty");
  EmbeddingScores total;
  if (hypotheses.empty()) return total;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const EmbeddingScores s = embedding_scores(hypotheses[i], references[i], vectors);
    total.eacs += s.eacs;
    total.vecs += s.vecs;
    total.gms += s.gms;
  }
  const double n = double(hypotheses.size());
  return {total.eacs / n, total.vecs / n, total.gms / n};
}

// ---------------------------------------------------------------------------
// Report

MetricReport evaluate(std::span<const Tokens> hypotheses, std::span<const Tokens> references,
                      const WordVectorTable* vectors) {
  check_pairs(hypotheses.size(), references.size());
  MetricReport rep;
  rep.pairs = hypotheses.size();
  for (int n = 1; n <= 4; ++n) {
    rep.bleu[n - 1] = bleu(hypotheses, references, n, BleuMode::kCorpus);
    double acc = 0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) acc += sentence_bleu(hypotheses[i], references[i], n);
    rep.bleu_sentence_mean[n - 1] = hypotheses.empty() ? 0 : acc / double(hypotheses.size());
  }
  rep.rouge_l = rouge_l(hypotheses, references);
  rep.cider = cider(hypotheses, references);
  if (vectors) rep.embedding = embedding_metrics(hypotheses, references, *vectors);
  return rep;
}

std::string MetricReport::to_text() const {
  std::ostringstream out;
  out << "pairs: " << pairs << "\n";
  for (int n = 0; n < 4; ++n) out << "BLEU-" << n + 1 << ": " << fmt2(bleu[n] * 100) << "\n";
  for (int n = 0; n < 4; ++n) {
    out << "BLEU-" << n + 1 << " (sentence mean): " << fmt2(bleu_sentence_mean[n] * 100) << "\n";
  }
  out << "METEOR: n/a\n";
  out << "ROUGE-L: " << fmt2(rouge_l * 100) << "\n";
  out << "CIDEr: " << fmt2(cider * 100) << "\n";
  out << "STCS: n/a\n";
  if (embedding) {
    out << "EACS: " << fmt2(embedding->eacs * 100) << "\n";
    out << "VECS: " << fmt2(embedding->vecs * 100) << "\n";
    out << "GMS: " << fmt2(embedding->gms * 100) << "\n";
  } else {
    out << "EACS: n/a\nVECS: n/a\nGMS: n/a\n";
  }
  return out.str();
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["pairs"] = pairs;
  for (int n = 0; n < 4; ++n) {
    j["bleu_" + std::to_string(n + 1)] = bleu[n];
    j["bleu_" + std::to_string(n + 1) + "_sentence_mean"] = bleu_sentence_mean[n];
  }
  j["rouge_l"] = rouge_l;
  j["cider"] = cider;
  j["meteor"] = nullptr;
  j["stcs"] = nullptr;
  if (embedding) {
    j["eacs"] = embedding->eacs;
    j["vecs"] = embedding->vecs;
    j["gms"] = embedding->gms;
  } else {
    j["eacs"] = j["vecs"] = j["gms"] = nullptr;
  }
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Rewards

double reward(const Tokens& hypothesis, const Tokens& reference) { return sentence_bleu(hypothesis, reference, 4); }

RewardRegistry::RewardRegistry() {
  add("bleu4", [](std::span<const Tokens>) -> RewardFn { return reward; });
  add("rouge_l", [](std::span<const Tokens>) -> RewardFn {
    return [](const Tokens& h, const Tokens& r) { return rouge_l(h, r); };
  });
  add("cider", [](std::span<const Tokens> refs) -> RewardFn {
    auto scorer = std::make_shared<CiderScorer>(refs);
    return [scorer](const Tokens& h, const Tokens& r) { return std::clamp(scorer->score(h, r) / 10.0, 0.0, 1.0); };
  });
}

RewardRegistry& RewardRegistry::instance() {
  static RewardRegistry registry;
  return registry;
}

void RewardRegistry::add(std::string name, Factory factory) { factories_[std::move(name)] = std::move(factory); }

RewardFn RewardRegistry::make(std::string_view name, std::span<const Tokens> idf_references) const {
  auto it = factories_.find(name);
  if (it == factories_.end()) throw ConfigError("unknown reward metric '" + std::string(name) + "'");
  return it->second(idf_references);
}

std::vector<std::string> RewardRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, f] : factories_) out.push_back(name);
  return out;
}

bool RewardRegistry::contains(std::string_view name) const { return factories_.find(name) != factories_.end(); }

}  // namespace endgen::metrics
