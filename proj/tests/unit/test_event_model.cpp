#include <gtest/gtest.h>

#include <cmath>

#include "evkit/error.hpp"
#include "evkit/event.hpp"
#include "test_support.hpp"

using namespace evkit;
namespace tsup = evkit::test_support;

namespace {

EventStream at_times(std::initializer_list<TimeUs> ts) {
  std::vector<Event> ev;
  for (TimeUs t : ts) ev.push_back({1, 2, t, 1});
  return EventStream(SensorConfig::desk(8, 8), ev);
}

std::vector<TimeUs> times(const EventStream& s) {
  std::vector<TimeUs> t;
  for (const Event& e : s) t.push_back(e.t);
  return t;
}

}  // namespace

TEST(SensorConfig, DefaultsMatchFullSizeSensor) {
  const SensorConfig s;
  EXPECT_EQ(s.width, 1280);
  EXPECT_EQ(s.height, 720);
  EXPECT_DOUBLE_EQ(s.fov_deg, 70.0);
  EXPECT_DOUBLE_EQ(s.c_pos, 0.28);
  EXPECT_DOUBLE_EQ(s.c_neg, 0.28);
  EXPECT_EQ(s.refractory_ns, 200);
  EXPECT_DOUBLE_EQ(s.compare_rate, 17.0);
  EXPECT_DOUBLE_EQ(s.frame_rate, 20.0);
  EXPECT_NO_THROW(s.validate());
}

TEST(SensorConfig, RejectsBadValues) {
  SensorConfig s = SensorConfig::desk();
  s.c_pos = 0.0;
  EXPECT_THROW(s.validate(), ContractError);
  s = SensorConfig::desk();
  s.refractory_ns = -1;
  EXPECT_THROW(s.validate(), ContractError);
  s = SensorConfig::desk(0, 4);
  EXPECT_THROW(s.validate(), ContractError);
}

TEST(SensorConfig, FocalLengthFromFov) {
  const SensorConfig s = SensorConfig::desk(128, 128);
  EXPECT_NEAR(s.focal_px(), 64.0 / std::tan(35.0 * M_PI / 180.0), 1e-12);
}

TEST(EventStream, RejectsUnsortedAndOutOfBounds) {
  const SensorConfig s = SensorConfig::desk(4, 4);
  EXPECT_THROW(EventStream(s, {{0, 0, 5, 1}, {0, 0, 4, 1}}), ContractError);
  EXPECT_THROW(EventStream(s, {{4, 0, 0, 1}}), ContractError);
  EXPECT_THROW(EventStream(s, {{0, 0, 0, 0}}), ContractError);
  EXPECT_THROW(EventStream(s, {{0, 0, -1, 1}}), ContractError);
}

TEST(EventStream, SpanIsHalfOpen) {
  EXPECT_EQ(at_times({3, 7}).span(), (TimeSpan{3, 8}));
  EXPECT_EQ(EventStream().span(), (TimeSpan{0, 0}));
}

TEST(FlowField, Validate) {
  FlowField f(0, 10, 3, 3);
  EXPECT_NO_THROW(f.validate());
  f.u(1, 1) = std::nan("");
  EXPECT_THROW(f.validate(), ContractError);
  FlowField g(10, 10, 3, 3);
  EXPECT_THROW(g.validate(), ContractError);
}

TEST(SliceStream, HalfOpenInterval) {
  const auto s = at_times({0, 1000, 5000, 9000});
  EXPECT_EQ(times(slice_stream(s, 1000, 9000)), (std::vector<TimeUs>{1000, 5000}));
}

TEST(SliceStream, EmptyInterval) { EXPECT_TRUE(slice_stream(at_times({0, 1}), 0, 0).empty()); }

TEST(SliceStream, MatchesLinearFilterOracle) {
  const auto ev = tsup::random_events(11, 10000, 32, 32, 1'000'000);
  const EventStream s(SensorConfig::desk(32, 32), ev);
  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    TimeUs a = static_cast<TimeUs>(rng.below(1'100'000));
    TimeUs b = static_cast<TimeUs>(rng.below(1'100'000));
    if (a > b) std::swap(a, b);
    EXPECT_EQ(slice_stream(s, a, b).vector(), tsup::filter_events(ev, a, b));
  }
}

TEST(SliceStream, IdentityAndConcatenation) {
  const auto s = tsup::random_stream(3, 2000, 16, 16, 50'000);
  EXPECT_EQ(slice_stream(s, 0, kTimeMax), s);
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    std::array<TimeUs, 3> c{static_cast<TimeUs>(rng.below(60'000)),
                            static_cast<TimeUs>(rng.below(60'000)),
                            static_cast<TimeUs>(rng.below(60'000))};
    std::sort(c.begin(), c.end());
    auto left = slice_stream(s, c[0], c[1]).vector();
    const auto right = slice_stream(s, c[1], c[2]).vector();
    left.insert(left.end(), right.begin(), right.end());
    EXPECT_EQ(left, slice_stream(s, c[0], c[2]).vector());
  }
}

TEST(SliceEvents, Errors) {
  std::vector<Event> unsorted{{0, 0, 5, 1}, {0, 0, 1, 1}};
  EXPECT_THROW(slice_events(unsorted, 0, 10), ContractError);
  std::vector<Event> sorted{{0, 0, 1, 1}};
  EXPECT_THROW(slice_events(sorted, 5, 1), ContractError);
}

TEST(MergeStreams, Basic) {
  EXPECT_EQ(times(merge_streams(at_times({1}), at_times({2}))), (std::vector<TimeUs>{1, 2}));
  const auto b = at_times({4, 9});
  EXPECT_EQ(merge_streams(EventStream(SensorConfig::desk(8, 8), {}), b), b);
}

TEST(MergeStreams, ResolutionMismatch) {
  const EventStream a(SensorConfig::desk(8, 8), {});
  const EventStream b(SensorConfig::desk(4, 8), {});
  EXPECT_THROW(merge_streams(a, b), ContractError);
}

TEST(MergeStreams, MatchesConcatenateThenStableSort) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = tsup::random_stream(seed, 500, 16, 16, 2000);
    const auto b = tsup::random_stream(seed + 100, 700, 16, 16, 2000);
    std::vector<Event> oracle = a.vector();
    oracle.insert(oracle.end(), b.begin(), b.end());
    std::stable_sort(oracle.begin(), oracle.end(),
                     [](const Event& l, const Event& r) { return l.t < r.t; });
    EXPECT_EQ(merge_streams(a, b).vector(), oracle);
  }
}

TEST(MergeStreams, AssociativeUpToTieOrder) {
  const auto a = tsup::random_stream(1, 300, 8, 8, 5000);
  const auto b = tsup::random_stream(2, 300, 8, 8, 5000);
  const auto c = tsup::random_stream(3, 300, 8, 8, 5000);
  const auto l = merge_streams(merge_streams(a, b), c);
  const auto r = merge_streams(a, merge_streams(b, c));
  ASSERT_EQ(l.size(), r.size());
  auto key = [](const Event& e) { return std::tuple(e.t, e.x, e.y, e.p); };
  std::vector<std::tuple<TimeUs, int, int, int>> kl, kr;
  for (const Event& e : l) kl.push_back(key(e));
  for (const Event& e : r) kr.push_back(key(e));
  std::sort(kl.begin(), kl.end());
  std::sort(kr.begin(), kr.end());
  EXPECT_EQ(kl, kr);
  EXPECT_TRUE(is_time_sorted(l.events()));
  EXPECT_TRUE(is_time_sorted(r.events()));
}

TEST(Image, BilinearSampling) {
  ImageD img(2, 2, std::vector<double>{0.0, 1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(sample_bilinear_clamped(img, 0.5, 0.5), 1.5);
  EXPECT_DOUBLE_EQ(sample_bilinear_clamped(img, -3.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(sample_bilinear_clamped(img, 5.0, 5.0), 3.0);
  double v = 0.0;
  EXPECT_TRUE(sample_bilinear_inside(img, 1.0, 1.0, v));
  EXPECT_DOUBLE_EQ(v, 3.0);
  EXPECT_FALSE(sample_bilinear_inside(img, 1.0001, 0.0, v));
}
