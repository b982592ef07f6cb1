#include <benchmark/benchmark.h>

#include "endgen/decode.hpp"

using namespace endgen;
using ad::Var;
using corpus::TokenId;

namespace {

// Fixed pseudo-random next-token table over 200 ids.
struct SyntheticModel {
  using State = std::uint64_t;
  std::size_t vocab = 200;

  State initial() { return 1; }
  decode::StepOutput<State> step(const State& s, TokenId prev) {
    const State next = derive_seed(s, static_cast<std::uint64_t>(prev) + 7);
    Rng rng(next);
    std::vector<Real> p(vocab);
    double total = 0;
    for (Real& v : p) total += v = static_cast<Real>(rng.uniform() + 1e-3);
    for (Real& v : p) v /= static_cast<Real>(total);
    return {std::move(p), next};
  }
};

}  // namespace

static void BM_Greedy(benchmark::State& state) {
  SyntheticModel m;
  decode::DecodeOptions opt;
  opt.max_len = 20;
  for (auto _ : state) benchmark::DoNotOptimize(decode::greedy_decode(m, opt).log_prob);
}
BENCHMARK(BM_Greedy);

static void BM_Beam(benchmark::State& state) {
  SyntheticModel m;
  decode::DecodeOptions opt;
  opt.max_len = 20;
  const auto width = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(decode::beam_search(m, width, opt).log_prob);
}
BENCHMARK(BM_Beam)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
