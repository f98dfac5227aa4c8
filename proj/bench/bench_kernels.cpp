#include <benchmark/benchmark.h>

#include <random>

#include "docstep/eval.hpp"
#include "docstep/mathcheck.hpp"

using namespace docstep;

namespace {

std::vector<ScoringItem> make_items(std::size_t n) {
  std::mt19937_64 rng(1);
  const char* words[] = {"ebola", "sars", "mers", "total revenue", "2017", "21.6", "slovakia", "blue bar"};
  std::vector<ScoringItem> items;
  items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string pred = words[rng() % 8];
    if (rng() % 3 == 0) pred += "s";
    items.push_back({pred, {words[rng() % 8], words[rng() % 8]}});
  }
  return items;
}

std::vector<ReasoningChain> make_chains(std::size_t n) {
  std::mt19937_64 rng(2);
  std::vector<ReasoningChain> chains;
  chains.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int a = static_cast<int>(rng() % 1000);
    const int b = static_cast<int>(rng() % 1000);
    const int c = static_cast<int>(rng() % 1000);
    const std::string sum = std::to_string(a + b + c);
    chains.push_back({{{1, "Identify the values: {\"x\": " + std::to_string(a) + ", \"y\": " + std::to_string(b) + "}"},
                       {2, "Calculate the sum: " + std::to_string(a) + " + " + std::to_string(b) + " + " +
                               std::to_string(c) + " = " + sum},
                       {3, "The final calculation result is obtained: " + sum}},
                      sum});
  }
  return chains;
}

void BM_ScoreSerial(benchmark::State& state) {
  const auto items = make_items(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(score_items_serial(items, {}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScoreParallel(benchmark::State& state) {
  const auto items = make_items(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(score_items_parallel(items, {}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_VerifySerial(benchmark::State& state) {
  const auto chains = make_chains(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(verify_chains_serial(chains, ToleranceRule::claim_default()));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_VerifyParallel(benchmark::State& state) {
  const auto chains = make_chains(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(verify_chains_parallel(chains, ToleranceRule::claim_default()));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_ScoreSerial)->Arg(1000)->Arg(10000);
BENCHMARK(BM_ScoreParallel)->Arg(1000)->Arg(10000);
BENCHMARK(BM_VerifySerial)->Arg(200)->Arg(2000);
BENCHMARK(BM_VerifyParallel)->Arg(200)->Arg(2000);

BENCHMARK_MAIN();
