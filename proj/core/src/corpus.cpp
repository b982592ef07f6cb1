#include "endgen/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include "endgen/errors.hpp"

namespace endgen::corpus {

namespace {

constexpr std::string_view kPunctuation = ".,!?;:'\"()";
constexpr std::array<std::string_view, 4> kSpecialTokens = {"<pad>", "<unk>", "<bos>", "<eos>"};
constexpr std::array<std::string_view, 7> kColumns = {"storyid",   "storytitle", "sentence1", "sentence2",
                                                      "sentence3", "sentence4",  "sentence5"};

bool is_punct(char c) { return kPunctuation.find(c) != std::string_view::npos; }

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Reads one CSV record (RFC 4180 quoting). Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t row) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool field_started_quoted = false;
  for (;;) {
    const int ci = in.get();
    if (ci == std::char_traits<char>::eof()) {
      if (quoted) throw ParseError("unterminated quoted field", row);
      fields.push_back(std::move(field));
      return true;
    }
    const char c = static_cast<char>(ci);
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty() || field_started_quoted) throw ParseError("stray quote inside unquoted field", row);
      quoted = true;
      field_started_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      field_started_quoted = false;
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get();
      fields.push_back(std::move(field));
      return true;
    } else if (c == '\n') {
      fields.push_back(std::move(field));
      return true;
    } else {
      if (field_started_quoted) throw ParseError("text after closing quote", row);
      field.push_back(c);
    }
  }
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

Tokens Story::plot_tokens() const {
  Tokens out;
  for (const auto& s : plot) out.insert(out.end(), s.begin(), s.end());
  return out;
}

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return out;
}

std::string detokenize(const Tokens& tokens) {
  std::string out;
  bool glue_next = false;
  for (const auto& t : tokens) {
    const bool closing = t.size() == 1 && std::string_view(".,!?;:)'").find(t[0]) != std::string_view::npos;
    if (!out.empty() && !closing && !glue_next) out.push_back(' ');
    out += t;
    glue_next = t == "'" || t == "(";
  }
  return out;
}

std::vector<Story> parse_corpus(std::istream& in, std::string_view split) {
  const std::string where = split.empty() ? std::string() : std::string(split) + " split: ";
  if (in.peek() == 0xEF) {
    char bom[3];
    in.read(bom, 3);
  }
  std::vector<std::string> fields;
  if (!read_record(in, fields, 1)) throw ParseError(where + "empty corpus file (no header)", 1);

  std::array<std::size_t, kColumns.size()> col{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    auto it = std::find(fields.begin(), fields.end(), kColumns[c]);
    if (it == fields.end()) throw ParseError(where + "missing column '" + std::string(kColumns[c]) + "'", 1);
    col[c] = static_cast<std::size_t>(it - fields.begin());
  }
  const std::size_t width = fields.size();

  std::vector<Story> stories;
  std::size_t row = 1;
  while (true) {
    ++row;
    if (!read_record(in, fields, row)) break;
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != width) {
      throw ParseError(where + "expected " + std::to_string(width) + " fields, found " +
                           std::to_string(fields.size()),
                       row);
    }
    Story s;
    s.id = fields[col[0]];
    for (std::size_t k = 0; k < 5; ++k) {
      Tokens toks = tokenize(fields[col[2 + k]]);
      if (toks.empty()) throw ParseError(where + "empty " + std::string(kColumns[2 + k]), row);
      if (k < 4) {
        s.plot[k] = std::move(toks);
      } else {
        s.ending = std::move(toks);
      }
    }
    stories.push_back(std::move(s));
  }
  return stories;
}

std::vector<Story> parse_corpus(const std::filesystem::path& path, std::string_view split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open corpus file " + path.string(), 0);
  return parse_corpus(in, split);
}

std::size_t distinct_token_count(std::span<const Story> stories) {
  std::set<std::string_view> seen;
  for (const auto& s : stories) {
    for (const auto& sent : s.plot) seen.insert(sent.begin(), sent.end());
    seen.insert(s.ending.begin(), s.ending.end());
  }
  return seen.size();
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  for (auto t : kSpecialTokens) push(std::string(t), 0);
}

void Vocabulary::push(std::string token, std::uint64_t count) {
  if (index_.contains(token)) throw ParseError("duplicate vocabulary token '" + token + "'", 0);
  index_.emplace(token, static_cast<TokenId>(tokens_.size()));
  tokens_.push_back(std::move(token));
  counts_.push_back(count);
}

Vocabulary Vocabulary::from_ranked(std::vector<std::pair<std::string, std::uint64_t>> ranked) {
  Vocabulary v;
  for (auto& [tok, count] : ranked) v.push(std::move(tok), count);
  return v;
}

Vocabulary Vocabulary::read(std::istream& in) {
  std::vector<std::pair<std::string, std::uint64_t>> ranked;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError("vocabulary line is not token<TAB>count", row);
    std::uint64_t count = 0;
    try {
      std::size_t used = 0;
      count = std::stoull(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("bad vocabulary count '" + line.substr(tab + 1) + "'", row);
    }
    ranked.emplace_back(line.substr(0, tab), count);
  }
  return from_ranked(std::move(ranked));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open vocabulary file " + path.string(), 0);
  return read(in);
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (std::size_t i = kNumSpecials; i < tokens_.size(); ++i) {
    out += tokens_[i];
    out += '\t';
    out += std::to_string(counts_[i]);
    out += '\n';
  }
  return out;
}

void Vocabulary::write(std::ostream& out) const { out << serialize(); }

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write vocabulary file " + path.string());
  write(out);
}

std::uint64_t Vocabulary::hash() const { return fnv1a(serialize()); }

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view token) const { return find(token).value_or(kUnk); }

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

Vocabulary build_vocab(std::span<const Story> stories, std::size_t cap) {
  if (cap <= kNumSpecials) throw ConfigError("vocabulary cap must exceed the 4 special tokens");
  if (stories.empty()) throw ConfigError("cannot build a vocabulary from an empty corpus");

  std::map<std::string, std::uint64_t> counts;
  for (const auto& s : stories) {
    for (const auto& sent : s.plot) {
      for (const auto& t : sent) ++counts[t];
    }
    for (const auto& t : s.ending) ++counts[t];
  }
  for (auto special : kSpecialTokens) counts.erase(std::string(special));

  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  // `counts` iterates in lexicographic order, so a stable sort on count keeps ties ascending.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > cap - kNumSpecials) ranked.resize(cap - kNumSpecials);
  return Vocabulary::from_ranked(std::move(ranked));
}

// ---------------------------------------------------------------------------
// Encoding

EncodedExample encode_example(const Story& story, const Vocabulary& vocab, const EncodeLimits& limits) {
  if (limits.max_plot_len == 0 || limits.max_end_len < 2) {
    throw ConfigError("max_plot_len must be >= 1 and max_end_len >= 2");
  }
  EncodedExample ex;
  ex.id = story.id;
  ex.vocab_size = vocab.size();
  const auto V = static_cast<TokenId>(vocab.size());

  Tokens plot = story.plot_tokens();
  if (plot.size() > limits.max_plot_len) plot.resize(limits.max_plot_len);
  for (const auto& tok : plot) {
    const auto found = vocab.find(tok);
    if (found) {
      ex.plot_ids.push_back(*found);
      ex.plot_ext_ids.push_back(*found);
      continue;
    }
    auto it = std::find(ex.oov_words.begin(), ex.oov_words.end(), tok);
    TokenId ext = V + static_cast<TokenId>(it - ex.oov_words.begin());
    if (it == ex.oov_words.end()) ex.oov_words.push_back(tok);
    ex.plot_ids.push_back(kUnk);
    ex.plot_ext_ids.push_back(ext);
  }

  ex.ending_tokens = story.ending;
  if (ex.ending_tokens.size() > limits.max_end_len - 1) ex.ending_tokens.resize(limits.max_end_len - 1);
  for (const auto& tok : ex.ending_tokens) {
    TokenId id = kUnk;
    if (const auto found = vocab.find(tok)) {
      id = *found;
    } else if (auto it = std::find(ex.oov_words.begin(), ex.oov_words.end(), tok); it != ex.oov_words.end()) {
      id = V + static_cast<TokenId>(it - ex.oov_words.begin());
    }
    ex.decoder_targets.push_back(id);
  }
  ex.decoder_inputs.push_back(kBos);
  ex.decoder_inputs.insert(ex.decoder_inputs.end(), ex.decoder_targets.begin(), ex.decoder_targets.end());
  ex.decoder_targets.push_back(kEos);
  return ex;
}

Tokens ids_to_tokens(std::span<const TokenId> ids, const Vocabulary& vocab, const Tokens& oov_words) {
  Tokens out;
  const auto V = static_cast<TokenId>(vocab.size());
  for (TokenId id : ids) {
    if (id >= V) {
      const auto j = static_cast<std::size_t>(id - V);
      if (j >= oov_words.size()) {
        throw IndexError("extended id " + std::to_string(id) + " beyond " + std::to_string(oov_words.size()) +
                         " OOV words");
      }
      out.push_back(oov_words[j]);
    } else {
      out.push_back(vocab.token(id));
    }
  }
  return out;
}

ExampleView view_of(const EncodedExample& example) {
  ExampleView v;
  v.plot_ids = example.plot_ids;
  v.plot_ext_ids = example.plot_ext_ids;
  v.decoder_inputs = example.decoder_inputs;
  v.decoder_targets = example.decoder_targets;
  v.num_oov = example.oov_words.size();
  return v;
}

ExampleView Batch::row(std::size_t r) const {
  if (r >= rows) throw IndexError("batch row " + std::to_string(r) + " of " + std::to_string(rows));
  ExampleView v;
  v.plot_ids = std::span(plot_ids).subspan(r * plot_len, plot_len);
  v.plot_ext_ids = std::span(plot_ext_ids).subspan(r * plot_len, plot_len);
  v.plot_mask = std::span(plot_mask).subspan(r * plot_len, plot_len);
  v.decoder_inputs = std::span(decoder_inputs).subspan(r * target_len, target_len);
  v.decoder_targets = std::span(decoder_targets).subspan(r * target_len, target_len);
  v.target_mask = std::span(target_mask).subspan(r * target_len, target_len);
  v.num_oov = oov_counts[r];
  return v;
}

Batch pad_batch(std::span<const EncodedExample> examples, TokenId pad) {
  if (examples.empty()) throw ContractError("pad_batch needs at least one example");
  Batch b;
  b.rows = examples.size();
  for (const auto& ex : examples) {
    b.plot_len = std::max(b.plot_len, ex.plot_ids.size());
    b.target_len = std::max(b.target_len, ex.decoder_targets.size());
    b.max_oov_count = std::max(b.max_oov_count, ex.oov_words.size());
  }
  b.plot_ids.assign(b.rows * b.plot_len, pad);
  b.plot_ext_ids.assign(b.rows * b.plot_len, pad);
  b.plot_mask.assign(b.rows * b.plot_len, 0);
  b.decoder_inputs.assign(b.rows * b.target_len, pad);
  b.decoder_targets.assign(b.rows * b.target_len, pad);
  b.target_mask.assign(b.rows * b.target_len, 0);
  for (std::size_t r = 0; r < b.rows; ++r) {
    const auto& ex = examples[r];
    for (std::size_t i = 0; i < ex.plot_ids.size(); ++i) {
      b.plot_ids[r * b.plot_len + i] = ex.plot_ids[i];
      b.plot_ext_ids[r * b.plot_len + i] = ex.plot_ext_ids[i];
      b.plot_mask[r * b.plot_len + i] = 1;
    }
    for (std::size_t t = 0; t < ex.decoder_targets.size(); ++t) {
      b.decoder_inputs[r * b.target_len + t] = ex.decoder_inputs[t];
      b.decoder_targets[r * b.target_len + t] = ex.decoder_targets[t];
      b.target_mask[r * b.target_len + t] = 1;
    }
    b.plot_lengths.push_back(ex.plot_ids.size());
    b.target_lengths.push_back(ex.decoder_targets.size());
    b.oov_counts.push_back(ex.oov_words.size());
  }
  return b;
}

}  // namespace endgen::corpus
