#include <benchmark/benchmark.h>

#include "evkit/mcflow/contrast.hpp"
#include "evkit/mcflow/estimator.hpp"
#include "test_support.hpp"

namespace {

using namespace evkit;
namespace tsup = evkit::test_support;

const std::vector<Event>& window_events() {
  static const auto ev = tsup::random_events(3, 30'000, 128, 128, 100'000);
  return ev;
}

void BM_WarpEvents(benchmark::State& state) {
  const auto& ev = window_events();
  const auto flow = mcflow::FlowParams::constant(30.0, -20.0);
  for (auto _ : state) benchmark::DoNotOptimize(mcflow::warp_events(ev, 128, 128, flow, 0));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ev.size()));
}
BENCHMARK(BM_WarpEvents)->Unit(benchmark::kMicrosecond);

// arg: ObjectiveKind
void BM_ObjectiveValue(benchmark::State& state) {
  mcflow::Objective o;
  o.kind = static_cast<mcflow::ObjectiveKind>(state.range(0));
  const mcflow::ContrastObjective obj(window_events(), 128, 128, 0, o);
  const auto flow = mcflow::FlowParams::constant(30.0, -20.0);
  for (auto _ : state) benchmark::DoNotOptimize(obj.value(flow));
}
BENCHMARK(BM_ObjectiveValue)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);

void BM_EstimateGlobal(benchmark::State& state) {
  mcflow::EstimatorConfig cfg;
  cfg.schedule = {{1, 1}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(mcflow::estimate_flow(window_events(), 128, 128, {0, 100'000}, cfg));
  }
}
BENCHMARK(BM_EstimateGlobal)->Unit(benchmark::kMillisecond);

}  // namespace
