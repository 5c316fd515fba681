#include "netscan/glm.hpp"
#include "netscan/networks.hpp"
#include "netscan/stats.hpp"
#include "netscan/random.hpp"

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

namespace {

using namespace netscan;

// One token across n elements.
void BM_AccumulatorUpdate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<float> frame(n);
  for (std::size_t i = 0; i < n; ++i) frame[i] = static_cast<float>(i % 97) * 0.01f;
  Accumulators acc(n);
  std::uint8_t x = 0;
  for (auto _ : state) {
    acc.update(frame, x);
    x ^= 1;
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_AccumulatorUpdate)->Arg(4096)->Arg(262144);

void BM_TwoSidedP(benchmark::State& state) {
  double t = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(two_sided_p(t, 2098.0));
    t = t < 8.0 ? t + 0.37 : 0.1;
  }
}
BENCHMARK(BM_TwoSidedP);

void BM_Overlap(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  CounterStream rng(7, 0);
  std::vector<ActiveSet> sets;
  for (std::size_t s = 0; s < k; ++s) {
    std::vector<ElementIndex> e;
    for (std::uint64_t i = 0; i < 5000; ++i) e.push_back(rng.below(259744));
    sets.push_back(make_active_set(std::move(e), "task" + std::to_string(s)));
  }
  for (auto _ : state) benchmark::DoNotOptimize(overlap(sets));
}
BENCHMARK(BM_Overlap)->Arg(2)->Arg(5)->Arg(7);

}  // namespace
BENCHMARK_MAIN();
