#include <benchmark/benchmark.h>

#include "evkit/store/container.hpp"
#include "evkit/util/rng.hpp"
#include "test_support.hpp"

namespace {

using namespace evkit;
namespace tsup = evkit::test_support;

constexpr TimeUs kSpan = 100'000'000;

struct Fixture {
  tsup::TempDir dir{"evkit-bench"};
  EventStream stream = tsup::random_stream(1, 1'000'000, 640, 480, kSpan);
  Fixture() { store::write_container(dir / "b.evz", stream, {}, {}); }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

// Random slices of a fixed length; arg is the slice length in microseconds.
void BM_ReadSlice(benchmark::State& state) {
  const store::ContainerReader reader(fixture().dir / "b.evz");
  const TimeUs len = state.range(0);
  Rng rng(2);
  std::size_t events = 0;
  for (auto _ : state) {
    const TimeUs a = static_cast<TimeUs>(rng.below(static_cast<std::uint64_t>(kSpan - len)));
    const auto slice = reader.read_slice(a, a + len);
    events += slice.events.size();
    benchmark::DoNotOptimize(slice);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(events));
}
BENCHMARK(BM_ReadSlice)->Arg(1'000)->Arg(100'000)->Arg(1'000'000)->Unit(benchmark::kMicrosecond);

void BM_WriteContainer(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(store::write_container(f.dir / "w.evz", f.stream, {}, {}));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.stream.size()));
}
BENCHMARK(BM_WriteContainer)->Unit(benchmark::kMillisecond);

void BM_OpenReader(benchmark::State& state) {
  for (auto _ : state) {
    store::ContainerReader reader(fixture().dir / "b.evz");
    benchmark::DoNotOptimize(reader.event_count());
  }
}
BENCHMARK(BM_OpenReader)->Unit(benchmark::kMicrosecond);

}  // namespace
