#include <benchmark/benchmark.h>

#include "endgen/metrics.hpp"
#include "endgen/random.hpp"

using namespace endgen;

namespace {

std::vector<corpus::Tokens> sentences(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<corpus::Tokens> out(n);
  for (auto& s : out) {
    const std::size_t len = 6 + rng.index(10);
    for (std::size_t i = 0; i < len; ++i) s.push_back("w" + std::to_string(rng.index(300)));
  }
  return out;
}

}  // namespace

static void BM_CorpusBleu(benchmark::State& state) {
  auto h = sentences(static_cast<std::size_t>(state.range(0)), 1);
  auto r = sentences(h.size(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::bleu(h, r, 4, metrics::BleuMode::kCorpus));
}
BENCHMARK(BM_CorpusBleu)->Arg(100)->Arg(1000);

static void BM_RougeL(benchmark::State& state) {
  auto h = sentences(static_cast<std::size_t>(state.range(0)), 3);
  auto r = sentences(h.size(), 4);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::rouge_l(h, r));
}
BENCHMARK(BM_RougeL)->Arg(1000);

static void BM_Cider(benchmark::State& state) {
  auto h = sentences(static_cast<std::size_t>(state.range(0)), 5);
  auto r = sentences(h.size(), 6);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::cider(h, r));
}
BENCHMARK(BM_Cider)->Arg(1000);

BENCHMARK_MAIN();
