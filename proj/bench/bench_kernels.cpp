// Serial reference vs OpenMP kernels. On a single core the two should be close;
// the gap shows up with OMP_NUM_THREADS > 1.
#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "sddlab/accuracy.hpp"
#include "sddlab/embed.hpp"
#include "sddlab/fp.hpp"
#include "sddlab/log.hpp"
#include "sddlab/world.hpp"

using namespace sddlab;

namespace {

struct World {
  GenerationConfig config{2, 20, 4, 6, 0.001, 0.9, 1};
  FeatureBank bank;
  LinearModel model;
  Task task = Task::canonical(config);
  World() {
    log::set_warning_sink([](const std::string&) {});
    bank = build_feature_bank(config);
    model = construct_oracle_model(bank, {{0, 1, 2, 3}, {0, 1, 2}});
  }
};

const World& world() {
  static const World w;
  return w;
}

void BM_OodAccuracySerial(benchmark::State& state) {
  const World& w = world();
  for (auto _ : state)
    benchmark::DoNotOptimize(ood_accuracy_mc_serial(w.model, w.bank, w.config, state.range(0), w.task));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_OodAccuracyParallel(benchmark::State& state) {
  const World& w = world();
  for (auto _ : state) benchmark::DoNotOptimize(ood_accuracy_mc(w.model, w.bank, w.config, state.range(0), w.task));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_FpSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(fp_mc_serial({0.7, 4, 1.5}, state.range(0), 3));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_FpParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(fp_mc({0.7, 4, 1.5}, state.range(0), 3));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

std::vector<std::string> texts(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back("a reasonably long response sentence about topic " + std::to_string(i * 2654435761u) +
                  " with some filler words to make the trigram loop do real work");
  return out;
}

void BM_EmbedSerial(benchmark::State& state) {
  const auto t = texts(static_cast<std::size_t>(state.range(0)));
  const BuiltinEmbedder e(4096, false);
  for (auto _ : state) benchmark::DoNotOptimize(e.embed_raw(t));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EmbedParallel(benchmark::State& state) {
  const auto t = texts(static_cast<std::size_t>(state.range(0)));
  const BuiltinEmbedder e(4096, true);
  for (auto _ : state) benchmark::DoNotOptimize(e.embed_raw(t));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_OodAccuracySerial)->Arg(1 << 16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OodAccuracyParallel)->Arg(1 << 16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FpSerial)->Arg(1 << 18)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FpParallel)->Arg(1 << 18)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EmbedSerial)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EmbedParallel)->Arg(2048)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
