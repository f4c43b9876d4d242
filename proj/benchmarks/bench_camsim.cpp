#include <benchmark/benchmark.h>

#include "evkit/camsim/simulator.hpp"
#include "evkit/util/rng.hpp"

namespace {

using namespace evkit;

GrayFrame noise_frame(std::uint64_t seed, int w, int h, TimeUs t) {
  Rng rng(seed);
  GrayFrame f{t, ImageD(w, h)};
  for (double& v : f.intensity.data()) v = rng.uniform();
  return f;
}

// args: frame side, threads
void BM_CamsimProcess(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const SensorConfig sensor = SensorConfig::desk(side, side);
  const GrayFrame a = noise_frame(1, side, side, 0);
  const GrayFrame b = noise_frame(2, side, side, 58824);
  std::size_t events = 0;
  for (auto _ : state) {
    camsim::EventSimulator sim(sensor, static_cast<int>(state.range(1)));
    sim.reset(a);
    events += sim.process(b).size();
  }
  state.SetItemsProcessed(state.iterations() * side * side);
  state.counters["events/frame"] = static_cast<double>(events) / state.iterations();
}
BENCHMARK(BM_CamsimProcess)->Args({128, 1})->Args({512, 1})->Args({512, 4})->Unit(benchmark::kMillisecond);

}  // namespace
