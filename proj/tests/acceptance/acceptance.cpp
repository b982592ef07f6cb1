// Acceptance suite: one PASS/FAIL/SKIP line per criterion, exit status 1 on
// any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "endgen/decode.hpp"
#include "endgen/losses.hpp"
#include "endgen/metrics.hpp"
#include "endgen/optimizer.hpp"
#include "endgen/train.hpp"
#include "test_support.hpp"

using namespace endgen;
using ad::Var;
using corpus::TokenId;
using endgen::testing::check_gradients;
using endgen::testing::data_dir;
using endgen::testing::make_story;
using endgen::testing::make_toy;

namespace {

enum class Status { kPass, kFail, kSkip };

struct Verdict {
  Status status = Status::kPass;
  std::string detail;
};

Verdict fail(std::string detail) { return {Status::kFail, std::move(detail)}; }
Verdict verdict(bool ok, std::string detail) { return {ok ? Status::kPass : Status::kFail, std::move(detail)}; }

std::string fmt(const char* pattern, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Redraws every parameter, biases included, from U(-scale, scale). Fresh
// initialization leaves the bridged state near zero and attention near
// uniform, where cosine and min() terms are too sharp for h = 1e-5.
void spread(model::ModelParams& params, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (std::size_t id = 0; id < params.store.size(); ++id) {
    for (Real& v : params.store.value(id).values()) v = static_cast<Real>(rng.uniform(-scale, scale));
  }
}

// ---------------------------------------------------------------------------
// 1. Gradient integrity

Verdict gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  auto toy = make_toy(4, 3, 13);
  auto& p = toy.params;
  spread(p, 13, 0.5);
  const std::vector<std::vector<TokenId>> samples = {{5, 6, corpus::kEos},
                                                     {static_cast<TokenId>(toy.vocab.size()), 7}};

  // Per-example loss pieces on one graph.
  struct Pieces {
    Var mle, poi, mix, rl;
  };
  auto pieces = [&](ad::Graph& g, std::size_t k) {
    model::Forward fw(p, g);
    auto view = corpus::view_of(toy.examples[k]);
    auto tf = model::run_teacher_forced(fw, view, view.decoder_inputs, true);
    Pieces out;
    out.mle = loss::mle_loss(tf.distributions, view.decoder_targets);
    out.poi = loss::pointer_coverage_loss(tf.distributions, view.decoder_targets, tf.alphas, tf.coverages, 1, true);
    out.mix = loss::mixed_loss(out.poi,
                               loss::semantic_relevance(tf.encoder.v_plot,
                                                        model::semantic_vectors(tf.encoder, tf.final_hidden).v_gen));
    std::vector<TokenId> inputs = {corpus::kBos};
    inputs.insert(inputs.end(), samples[k].begin(), samples[k].end() - 1);
    auto sampled = model::run_teacher_forced(fw, view, inputs, true);
    out.rl = loss::rl_loss(0.3, 0.55, loss::sequence_log_prob(sampled.distributions, samples[k]));
    return out;
  };
  using Pick = std::function<Var(ad::Graph&, const Pieces&)>;
  const std::vector<std::pair<const char*, Pick>> losses = {
      {"L_mle", [](ad::Graph&, const Pieces& x) { return x.mle; }},
      {"L_poi", [](ad::Graph&, const Pieces& x) { return x.poi; }},
      {"L_mix", [](ad::Graph&, const Pieces& x) { return x.mix; }},
      {"L_rl", [](ad::Graph&, const Pieces& x) { return x.rl; }},
      {"L_total", [](ad::Graph&, const Pieces& x) { return loss::total_loss(x.rl, x.mix, 0.95); }},
  };
  bool ok = true;
  std::ostringstream detail;
  std::uint64_t seed = 100;
  for (const auto& [name, pick] : losses) {
    auto build = [&](ad::Graph& g) {
      std::vector<Var> per_example;
      for (std::size_t k = 0; k < toy.examples.size(); ++k) per_example.push_back(pick(g, pieces(g, k)));
      return ad::mean(ad::concat(per_example));
    };
    auto r = check_gradients(p.store, build, 20, ++seed);
    ok &= r.checked >= 20 && r.max_rel_error < 1e-3;
    detail << name << " n=" << r.checked << " max_rel=" << fmt("%.2e", r.max_rel_error) << "; ";
  }
  const double elapsed = seconds_since(t0);
  ok &= elapsed < 60;
  detail << fmt("%.1fs", elapsed);
  return verdict(ok, detail.str());
}

// ---------------------------------------------------------------------------
// 2. Distribution invariants

// Wraps a step model and audits every distribution it emits.
template <class M>
struct Audited {
  using State = typename M::State;
  M& inner;
  std::size_t steps = 0;
  double worst_sum = 0;
  bool negative = false;

  State initial() { return inner.initial(); }
  decode::StepOutput<State> step(const State& s, TokenId prev) {
    auto out = inner.step(s, prev);
    double total = 0;
    for (Real v : out.probs) {
      negative |= v < 0;
      total += v;
    }
    worst_sum = std::max(worst_sum, std::abs(total - 1));
    ++steps;
    return out;
  }
};

Verdict distributions() {
  auto stories = corpus::parse_corpus(data_dir() / "toy_stories.csv");
  // A small cap leaves plenty of copyable OOV words.
  auto vocab = corpus::build_vocab(stories, 40);
  std::vector<corpus::EncodedExample> examples;
  for (const auto& s : stories) examples.push_back(corpus::encode_example(s, vocab));
  auto params = model::init_params({vocab.size(), 8, 6, 0.0}, 5);

  std::size_t steps = 0, copy_tokens = 0, copy_from_plot = 0, gen_tokens = 0, gen_extended = 0;
  double worst_sum = 0;
  bool negative = false;
  decode::DecodeOptions opt;
  opt.max_len = 12;
  for (std::uint64_t trial = 0; steps < 1000; ++trial) {
    const auto& ex = examples[trial % examples.size()];
    const std::set<TokenId> plot(ex.plot_ext_ids.begin(), ex.plot_ext_ids.end());
    for (std::optional<Real> forced : {std::optional<Real>{}, std::optional<Real>{0}, std::optional<Real>{1}}) {
      ad::Graph g(&params.store, false);
      model::Forward fw(params, g, {false, 0, forced});
      auto view = corpus::view_of(ex);
      auto enc = model::encode(fw, view.plot_ids, {});
      decode::GeneratorStepper stepper(fw, enc, view, true);
      Audited<decode::GeneratorStepper> audited{stepper};
      auto h = decode::sample_decode(audited, derive_seed(trial, forced ? 1 + static_cast<int>(*forced) : 0), opt);
      steps += audited.steps;
      worst_sum = std::max(worst_sum, audited.worst_sum);
      negative |= audited.negative;
      for (TokenId t : h.tokens) {
        if (forced && *forced == 0) {
          ++copy_tokens;
          copy_from_plot += plot.contains(t);
        } else if (forced) {
          ++gen_tokens;
          gen_extended += t >= static_cast<TokenId>(vocab.size());
        }
      }
    }
  }
  const bool ok = !negative && worst_sum <= 1e-6 && copy_tokens > 0 && copy_from_plot == copy_tokens &&
                  gen_tokens > 0 && gen_extended == 0;
  std::ostringstream detail;
  detail << steps << " steps, max |sum-1|=" << fmt("%.1e", worst_sum) << ", negative=" << (negative ? "yes" : "no")
         << ", p_g=0: " << copy_from_plot << "/" << copy_tokens << " from plot, p_g=1: " << gen_extended << "/"
         << gen_tokens << " extended";
  return verdict(ok, detail.str());
}

// ---------------------------------------------------------------------------
// 3. Coverage semantics

Verdict coverage() {
  auto toy = make_toy(5, 4, 21);
  double worst = 0;
  bool first_zero = true;
  for (const auto& ex : toy.examples) {
    ad::Graph g(&toy.params.store, false);
    model::Forward fw(toy.params, g);
    auto view = corpus::view_of(ex);
    auto tf = model::run_teacher_forced(fw, view, view.decoder_inputs, true);
    for (Real v : tf.coverages[0].value().values()) first_zero &= v == 0;
    std::vector<double> running(tf.alphas[0].value().size(), 0);
    for (std::size_t t = 0; t < tf.alphas.size(); ++t) {
      const auto& s = tf.coverages[t].value();
      for (std::size_t i = 0; i < running.size(); ++i) worst = std::max(worst, std::abs(s[i] - running[i]));
      const auto& a = tf.alphas[t].value();
      for (std::size_t i = 0; i < running.size(); ++i) running[i] += a[i];
    }
  }
  ad::Graph g;
  const double pen =
      loss::coverage_penalty(g.constant(Tensor::vector({0.3, 0.7})), g.constant(Tensor::vector({0.5, 0.2}))).item();
  const bool ok = first_zero && worst <= 1e-9 && std::abs(pen - 0.5) < 1e-12;
  return verdict(ok, std::string("s^1 zero: ") + (first_zero ? "yes" : "no") +
                         fmt(", max |s^t - sum alpha|=%.1e, penalty=%.6f", worst, pen));
}

// ---------------------------------------------------------------------------
// 4. Self-critical direction

Verdict scst_direction() {
  auto toy = make_toy(5, 4, 17);
  auto& p = toy.params;
  const auto& ex = toy.examples[0];
  const auto view = corpus::view_of(ex);
  const std::vector<TokenId> sample = {5, 9, 6, corpus::kEos};
  auto log_prob = [&](ad::Graph& g) {
    model::Forward fw(p, g);
    std::vector<TokenId> inputs = {corpus::kBos};
    inputs.insert(inputs.end(), sample.begin(), sample.end() - 1);
    return loss::sequence_log_prob(model::run_teacher_forced(fw, view, inputs, true).distributions, sample);
  };
  auto mix = [&](ad::Graph& g) {
    model::Forward fw(p, g);
    auto tf = model::run_teacher_forced(fw, view, view.decoder_inputs, true);
    Var poi = loss::pointer_coverage_loss(tf.distributions, view.decoder_targets, tf.alphas, tf.coverages, 1, true);
    return loss::mixed_loss(
        poi, loss::semantic_relevance(tf.encoder.v_plot, model::semantic_vectors(tf.encoder, tf.final_hidden).v_gen));
  };
  const double mu = 0.95;

  // r(y^s) > r(y^b): a pure policy-gradient step at lr 1e-3.
  const double before = endgen::testing::evaluate(p.store, log_prob);
  ad::GradStore grads(p.store);
  {
    ad::Graph g(&p.store);
    g.backward(loss::rl_loss(0.2, 0.6, log_prob(g)), grads);
  }
  ad::ParamStore saved = p.store;
  opt::AdamState adam(p.store);
  opt::adam_step(p.store, grads, adam, {1e-3});
  const double after = endgen::testing::evaluate(p.store, log_prob);
  p.store = saved;

  // Equal rewards: L_rl vanishes and the total gradient is (1 - mu) grad L_mix.
  double rl_value = 1;
  ad::GradStore total(p.store), mix_only(p.store);
  {
    ad::Graph g(&p.store);
    Var rl = loss::rl_loss(0.4, 0.4, log_prob(g));
    rl_value = rl.item();
    g.backward(loss::total_loss(rl, mix(g), mu), total);
  }
  {
    ad::Graph g(&p.store);
    g.backward(mix(g), mix_only);
  }
  double worst = 0;
  for (std::size_t id = 0; id < p.store.size(); ++id) {
    const auto& a = total[id];
    const auto& b = mix_only[id];
    for (std::size_t i = 0; i < a.size(); ++i) {
      worst = std::max(worst, std::abs(a[i] - (1 - mu) * b[i]) / std::max(1e-12, std::abs(b[i])));
    }
  }
  const bool ok = after > before && rl_value == 0 && worst < 1e-9;
  return verdict(ok, fmt("log P(y^s) %.6f -> %.6f", before, after) + fmt(", equal-reward L_rl=%.1f", rl_value) +
                         fmt(", max rel dev from (1-mu) grad L_mix=%.1e", worst));
}

// ---------------------------------------------------------------------------
// 5. Beam oracle

struct Best {
  std::vector<TokenId> tokens;
  double log_prob = -1e300;
};

Verdict beam_oracle() {
  std::size_t exact = 0;
  const std::size_t trials = 100;
  std::string first_miss;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    // Four specials plus one word, which the plot also offers for copying.
    auto vocab = corpus::Vocabulary::from_ranked({{"a", 1}});
    auto story = make_story("b", {"a", "a a", "a", "a", "a"});
    auto ex = corpus::encode_example(story, vocab);
    if (ex.extended_size() != 5) return fail("fixture has extended vocabulary " + std::to_string(ex.extended_size()));
    auto params = model::make_params({vocab.size(), 4, 3, 0.0});
    spread(params, derive_seed(77, trial), 1.5);
    const auto view = corpus::view_of(ex);

    decode::DecodeOptions opt;
    opt.max_len = 3;
    opt.length_normalize = false;
    decode::DecodeHypothesis beam;
    {
      ad::Graph g(&params.store, false);
      model::Forward fw(params, g);
      auto enc = model::encode(fw, view.plot_ids, {});
      decode::GeneratorStepper stepper(fw, enc, view, true);
      beam = decode::beam_search(stepper, 125, opt);
    }

    // Score every sequence that ends in EOS or reaches length 3 by teacher forcing.
    Best best;
    std::vector<TokenId> seq;
    std::function<void()> walk = [&] {
      for (TokenId t = 0; t < 5; ++t) {
        seq.push_back(t);
        if (t == corpus::kEos || seq.size() == 3) {
          ad::Graph g(&params.store, false);
          model::Forward fw(params, g);
          std::vector<TokenId> inputs = {corpus::kBos};
          inputs.insert(inputs.end(), seq.begin(), seq.end() - 1);
          const double lp =
              loss::sequence_log_prob(model::run_teacher_forced(fw, view, inputs, true).distributions, seq).item();
          if (lp > best.log_prob) best = {seq, lp};
        } else {
          walk();
        }
        seq.pop_back();
      }
    };
    walk();
    if (beam.tokens == best.tokens && std::abs(beam.log_prob - best.log_prob) < 1e-9) {
      ++exact;
    } else if (first_miss.empty()) {
      first_miss = " first miss at trial " + std::to_string(trial) + fmt(": beam %.9f vs exhaustive %.9f",
                                                                         beam.log_prob, best.log_prob);
    }
  }
  return verdict(exact == trials, std::to_string(exact) + "/" + std::to_string(trials) + " exact" + first_miss);
}

// ---------------------------------------------------------------------------
// 6-7. Memorization and RL smoke share the toy corpus.

struct ToyCorpus {
  train::TrainConfig config;
  corpus::Vocabulary vocab;
  std::vector<corpus::EncodedExample> examples;
};

ToyCorpus toy_corpus() {
  ToyCorpus t;
  auto stories = corpus::parse_corpus(data_dir() / "toy_stories.csv");
  train::TrainConfig& c = t.config;
  c.hidden_dim = 32;
  c.embed_dim = 32;
  c.batch_size = 8;
  c.dropout = 0;
  c.pretrain_lr = 1e-2;
  c.rl_lr = 5e-5;
  c.max_epochs = 200;
  c.rl_epochs = 20;
  c.coverage_start_epoch = 20;
  c.patience = 1000;
  c.vocab_cap = 1000;
  c.seed = 11;
  c.beam = 1;
  c.eval_every = 4 * ((stories.size() + c.batch_size - 1) / c.batch_size);  // every 4 epochs
  t.vocab = corpus::build_vocab(stories, c.vocab_cap);
  t.examples = train::encode_all(stories, t.vocab, c);
  return t;
}

double training_bleu4(const train::Checkpoint& ckpt, const ToyCorpus& t) {
  auto hyps = train::generate_endings(ckpt.params, t.vocab, t.examples, ckpt.config, 1, train::coverage_active(ckpt));
  std::vector<corpus::Tokens> refs;
  for (const auto& ex : t.examples) refs.push_back(ex.ending_tokens);
  return metrics::bleu(hyps, refs, 4, metrics::BleuMode::kCorpus);
}

std::optional<train::Checkpoint> memorized;

Verdict memorization() {
  const auto t0 = std::chrono::steady_clock::now();
  ToyCorpus t = toy_corpus();
  const std::size_t per_epoch = (t.examples.size() + t.config.batch_size - 1) / t.config.batch_size;
  train::Checkpoint state = train::initial_checkpoint(t.config, t.vocab);
  double accuracy = 0, bleu4 = 0;
  std::size_t epochs = 0;
  // Advance ten epochs at a time; pausing and resuming replays the same run.
  while (state.progress.epoch < t.config.max_epochs) {
    train::TrainHooks hooks;
    hooks.max_steps = state.progress.global_step + 10 * per_epoch;
    state = train::run_pretrain(std::move(state), t.examples, {}, t.vocab, hooks).last;
    epochs = state.progress.global_step / per_epoch;
    accuracy = train::teacher_forced_accuracy(state.params, t.examples, train::coverage_active(state));
    if (accuracy >= 0.99) {
      bleu4 = training_bleu4(state, t);
      if (bleu4 >= 0.9) break;
    }
  }
  const double elapsed = seconds_since(t0);
  const bool ok = accuracy >= 0.99 && bleu4 >= 0.9 && epochs <= 200 && elapsed < 600;
  if (ok) memorized = state;
  return verdict(ok, std::to_string(t.examples.size()) + " stories, " + std::to_string(epochs) + " epochs" +
                         fmt(", accuracy %.4f, BLEU-4 %.4f, %.0fs", accuracy, bleu4, elapsed));
}

Verdict rl_smoke() {
  if (!memorized) return fail("needs the memorized model from the previous criterion");
  ToyCorpus t = toy_corpus();
  auto reward = metrics::RewardRegistry::instance().make(t.config.reward);
  const bool cov = train::coverage_active(*memorized);
  const double before = train::mean_greedy_reward(memorized->params, t.examples, t.vocab, t.config, reward, cov);
  auto r = train::rl_finetune(t.config, t.examples, {}, t.vocab, *memorized);
  const double after = train::mean_greedy_reward(r.last.params, t.examples, t.vocab, t.config, reward,
                                                 train::coverage_active(r.last));
  return verdict(after >= before - 0.02, fmt("mean reward %.4f -> %.4f after %.0f epochs", before, after,
                                             static_cast<double>(t.config.rl_epochs)));
}

// ---------------------------------------------------------------------------
// 8. Metric oracles

Verdict metric_oracles() {
  using corpus::tokenize;
  const std::vector<corpus::Tokens> h1 = {tokenize("the cat sat")}, r1 = {tokenize("the cat sat on the mat")};
  const double b1 = metrics::bleu(h1, r1, 1, metrics::BleuMode::kCorpus);
  const double rl = metrics::rouge_l(tokenize("the cat"), tokenize("the cat sat"));

  const std::vector<corpus::Tokens> same = {tokenize("the cat sat on the mat ."), tokenize("a dog ran home")};
  auto vectors = metrics::WordVectorTable::load(data_dir() / "word_vectors.txt");
  auto report = metrics::evaluate(same, same, &vectors);
  bool ceilings = report.rouge_l == 1;
  for (double b : report.bleu) ceilings &= b == 1;
  ceilings &= report.embedding && report.embedding->eacs == 1 && report.embedding->vecs == 1 &&
              report.embedding->gms == 1;
  const double single = metrics::cider(std::span(h1), std::span(r1));
  const double single_exact = metrics::cider(std::span(r1), std::span(r1));

  const bool ok = std::abs(b1 - 0.3679) <= 1e-4 && std::abs(rl - 0.7722) <= 1e-4 && ceilings && single == 0 &&
                  single_exact == 0;
  std::string detail = fmt("BLEU-1 %.4f, ROUGE-L %.4f", b1, rl) + ", ceilings " + (ceilings ? "exact" : "broken") +
                       fmt(", single-pair CIDEr %.1f / %.1f", single, single_exact);
  return verdict(ok, detail);
}

// ---------------------------------------------------------------------------
// 9. Determinism and persistence

Verdict determinism() {
  ToyCorpus t = toy_corpus();
  t.config.hidden_dim = 8;
  t.config.embed_dim = 8;
  t.config.dropout = 0.2;
  t.config.max_epochs = 3;
  t.config.coverage_start_epoch = 1;
  t.config.eval_every = 3;
  auto run = [&](train::TrainHooks hooks) {
    std::vector<double> losses;
    hooks.on_step = [&](std::size_t, const train::StepStats& s) { losses.push_back(s.loss); };
    auto r = train::pretrain(t.config, t.examples, t.examples, t.vocab, hooks);
    return std::make_pair(losses, r);
  };
  auto [a, ra] = run({});
  auto [b, rb] = run({});
  const bool repeat = a == b && train::serialize_checkpoint(ra.last) == train::serialize_checkpoint(rb.last);

  const auto dir = endgen::testing::temp_dir("acceptance_resume");
  train::TrainHooks first;
  first.max_steps = 5;
  first.checkpoint_dir = dir;
  auto [head, rh] = run(first);
  std::vector<double> tail;
  train::TrainHooks second;
  second.checkpoint_dir = dir;
  second.on_step = [&](std::size_t, const train::StepStats& s) { tail.push_back(s.loss); };
  auto resumed = train::run_pretrain(train::load_checkpoint(dir / "last.ckpt"), t.examples, t.examples, t.vocab,
                                     second);
  head.insert(head.end(), tail.begin(), tail.end());
  const bool resume = head == a && train::serialize_checkpoint(resumed.last) == train::serialize_checkpoint(ra.last) &&
                      train::serialize_checkpoint(resumed.best) == train::serialize_checkpoint(ra.best);
  return verdict(repeat && resume, std::to_string(a.size()) + " steps, repeat " + (repeat ? "bit-identical" : "differs") +
                                       ", resume after 5 steps " + (resume ? "matches" : "differs"));
}

// ---------------------------------------------------------------------------
// 10. Full-corpus epoch (opt-in)

Verdict full_corpus() {
  const char* path = std::getenv("ENDGEN_ROCSTORIES_TRAIN");
  if (path == nullptr || *path == '\0') return {Status::kSkip, "set ENDGEN_ROCSTORIES_TRAIN to a training CSV"};
  const auto t0 = std::chrono::steady_clock::now();
  train::TrainConfig c;
  c.max_epochs = 1;
  c.patience = 1000;
  auto stories = corpus::parse_corpus(std::filesystem::path(path));
  // About ten eval points over the epoch.
  c.eval_every = std::max<std::size_t>(1, (stories.size() + c.batch_size - 1) / c.batch_size / 10);
  auto vocab = corpus::build_vocab(stories, c.vocab_cap);
  auto examples = train::encode_all(stories, vocab, c);
  std::vector<train::EvalPoint> points;
  train::TrainHooks hooks;
  hooks.on_eval = [&](const train::EvalPoint& p) {
    points.push_back(p);
    std::printf("  %s\n", train::format_log_line(p).c_str());
    std::fflush(stdout);
  };
  // A fixed slice of the training split stands in for validation.
  std::vector<corpus::EncodedExample> val(examples.begin(), examples.begin() + std::min<std::size_t>(200, examples.size()));
  train::pretrain(c, examples, val, vocab, hooks);
  if (points.size() < 2) return fail("fewer than two eval points");
  const bool down = points.back().loss < points.front().loss;
  return verdict(down, std::to_string(examples.size()) + " stories, " + std::to_string(points.size()) +
                           fmt(" eval points, loss %.4f -> %.4f, %.0fs", points.front().loss, points.back().loss,
                               seconds_since(t0)));
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Verdict (*)()>> criteria = {
      {"gradient integrity", gradients},      {"distribution invariants", distributions},
      {"coverage semantics", coverage},       {"self-critical direction", scst_direction},
      {"beam oracle", beam_oracle},           {"memorization probe", memorization},
      {"rl smoke", rl_smoke},                 {"metric oracles", metric_oracles},
      {"determinism and persistence", determinism}, {"full-corpus epoch", full_corpus},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = fail(std::string("exception: ") + e.what());
    }
    const char* tag = v.status == Status::kPass ? "PASS" : v.status == Status::kFail ? "FAIL" : "SKIP";
    failures += v.status == Status::kFail;
    std::printf("%s %2zu %s: %s\n", tag, i + 1, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
