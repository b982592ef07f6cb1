#include <benchmark/benchmark.h>

#include "endgen/autodiff.hpp"
#include "endgen/corpus.hpp"
#include "endgen/model.hpp"

using namespace endgen;
using ad::Var;
using corpus::TokenId;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t({r, c});
  for (Real& v : t.values()) v = static_cast<Real>(rng.uniform(-1, 1));
  return t;
}

}  // namespace

static void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  ad::ParamStore store;
  auto a = store.add("a", random_matrix(n, n, rng));
  auto b = store.add("b", random_matrix(n, n, rng));
  for (auto _ : state) {
    ad::GradStore grads(store);
    ad::Graph g(&store);
    g.backward(ad::sum(ad::matmul(g.param(a), g.param(b))), grads);
    benchmark::DoNotOptimize(grads[a][0]);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_MatmulBackward)->Arg(16)->Arg(64)->Arg(128);

// One teacher-forced forward and backward pass over a 40-token plot.
static void BM_TeacherForcedStep(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  std::vector<std::pair<std::string, std::uint64_t>> ranked;
  for (int i = 0; i < 500; ++i) ranked.emplace_back("w" + std::to_string(i), 1);
  auto vocab = corpus::Vocabulary::from_ranked(std::move(ranked));
  corpus::Story story;
  for (int s = 0; s < 4; ++s) {
    corpus::Tokens sent;
    for (int k = 0; k < 10; ++k) sent.push_back("w" + std::to_string((s * 37 + k * 11) % 500));
    story.plot[static_cast<std::size_t>(s)] = sent;
  }
  for (int k = 0; k < 10; ++k) story.ending.push_back("w" + std::to_string(k * 7));
  auto ex = corpus::encode_example(story, vocab);
  auto view = corpus::view_of(ex);
  auto params = model::init_params({vocab.size(), hidden, hidden, 0.0}, 3);
  for (auto _ : state) {
    ad::GradStore grads(params.store);
    ad::Graph g(&params.store);
    model::Forward fw(params, g);
    auto tf = model::run_teacher_forced(fw, view, view.decoder_inputs, true);
    Var nll = ad::scale(ad::log(tf.distributions[0]), -1);
    g.backward(ad::sum(nll), grads);
    benchmark::DoNotOptimize(grads.global_norm());
  }
}
BENCHMARK(BM_TeacherForcedStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
