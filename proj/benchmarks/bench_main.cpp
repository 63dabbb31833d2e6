#include <benchmark/benchmark.h>

#include "countlab/cells.hpp"
#include "countlab/dyck.hpp"
#include "countlab/evaluation.hpp"
#include "countlab/training.hpp"

using namespace countlab;

namespace {

dyck::DyckWord word_of_length(std::size_t len) {
  return dyck::generate_zigzag({len / 2, len});
}

void BM_Forward(benchmark::State& state) {
  const auto kind = static_cast<cells::CellKind>(state.range(0));
  const auto p = cells::init_params(kind, 1, 1);
  const auto w = word_of_length(static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(cells::forward(p, w.tokens()));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_Forward)->ArgsProduct({{0, 1, 2}, {50, 1000}});

void BM_Bptt(benchmark::State& state) {
  const auto kind = static_cast<cells::CellKind>(state.range(0));
  const auto p = cells::init_params(kind, 1, 1);
  const auto w = word_of_length(50);
  const auto targets = dyck::next_targets(w);
  for (auto _ : state) benchmark::DoNotOptimize(training::bptt_grads(p, w.tokens(), targets));
  state.SetItemsProcessed(state.iterations() * 50);
}
BENCHMARK(BM_Bptt)->DenseRange(0, 2);

void BM_Fpf(benchmark::State& state) {
  const auto p = cells::make_relu_counter({1.0, 0.0});
  const auto w = word_of_length(2000);
  for (auto _ : state) benchmark::DoNotOptimize(evaluation::fpf(p, w));
}
BENCHMARK(BM_Fpf);

void BM_GenerateWord(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const dyck::GenSpec spec{1, len == 50 ? 2 : len, len, 0.5, 0.25, 0};
  Rng rng(42);
  for (auto _ : state) benchmark::DoNotOptimize(dyck::generate_word(spec, rng));
}
BENCHMARK(BM_GenerateWord)->Arg(50)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
