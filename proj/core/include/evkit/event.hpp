#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "evkit/image.hpp"

namespace evkit {

/// Microseconds since the start of a recording.
using TimeUs = std::int64_t;
/// Nanoseconds; used where sub-microsecond resolution matters (refractory).
using TimeNs = std::int64_t;

inline constexpr TimeUs kTimeMax = std::numeric_limits<TimeUs>::max();

inline constexpr double us_to_s(TimeUs t) { return static_cast<double>(t) * 1e-6; }

/// Half-open time interval [begin, end).
struct TimeSpan {
  TimeUs begin = 0;
  TimeUs end = 0;

  TimeUs duration() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool contains(TimeUs t) const { return t >= begin && t < end; }
  bool operator==(const TimeSpan&) const = default;
};

struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  TimeUs t = 0;
  std::int8_t p = 1;  // +1 or -1

  bool positive() const { return p > 0; }
  bool operator==(const Event&) const = default;
};

/// Event-camera model parameters. Defaults are the full-size sensor the
/// underwater sequences were recorded with.
struct SensorConfig {
  int width = 1280;
  int height = 720;
  double fov_deg = 70.0;
  double c_pos = 0.28;
  double c_neg = 0.28;
  TimeNs refractory_ns = 200;
  double frame_rate = 20.0;    // grayscale / flow cadence, Hz
  double compare_rate = 17.0;  // brightness comparison cadence, Hz

  /// Scaled-down sensor used by the desk-scale pipeline and tests.
  static SensorConfig desk(int width = 128, int height = 128);

  /// Throws ContractError when any invariant is violated.
  void validate() const;
  /// Pinhole focal length in pixels derived from the horizontal FOV.
  double focal_px() const;

  bool operator==(const SensorConfig&) const = default;
};

/// Time-sorted event sequence bound to a sensor geometry. Immutable once
/// constructed.
class EventStream {
 public:
  EventStream() = default;
  /// Validates sortedness and coordinate bounds; throws ContractError.
  EventStream(SensorConfig sensor, std::vector<Event> events);

  const SensorConfig& sensor() const { return sensor_; }
  std::span<const Event> events() const { return events_; }
  const std::vector<Event>& vector() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  const Event& operator[](std::size_t i) const { return events_[i]; }

  auto begin() const { return events_.begin(); }
  auto end() const { return events_.end(); }

  /// [first t, last t + 1), or {0, 0} when empty.
  TimeSpan span() const;

  bool operator==(const EventStream&) const = default;

 private:
  SensorConfig sensor_;
  std::vector<Event> events_;
};

/// Timestamped intensity image, values in [0, 1].
struct GrayFrame {
  TimeUs t = 0;
  ImageD intensity;

  int width() const { return intensity.width(); }
  int height() const { return intensity.height(); }
  bool operator==(const GrayFrame&) const = default;
};

/// Dense displacement (pixels) accumulated over [t0, t1].
struct FlowField {
  TimeUs t0 = 0;
  TimeUs t1 = 0;
  ImageD u;
  ImageD v;

  FlowField() = default;
  FlowField(TimeUs t0_, TimeUs t1_, int width, int height)
      : t0(t0_), t1(t1_), u(width, height, 0.0), v(width, height, 0.0) {}

  int width() const { return u.width(); }
  int height() const { return u.height(); }
  /// Throws ContractError unless t0 < t1, u/v agree in size and are finite.
  void validate() const;
  bool operator==(const FlowField&) const = default;
};

/// Checks that timestamps are non-decreasing.
bool is_time_sorted(std::span<const Event> events);

/// Events with t_start <= t < t_end, in order. Linear-scan semantics; the
/// reference against which indexed container slicing is checked.
EventStream slice_stream(const EventStream& stream, TimeUs t_start, TimeUs t_end);

/// Same as slice_stream on a raw sequence; throws ContractError if the input
/// is not time-sorted or t_start > t_end.
std::vector<Event> slice_events(std::span<const Event> events, TimeUs t_start,
                                TimeUs t_end);

/// Stable merge; on equal timestamps events of `a` precede those of `b`.
EventStream merge_streams(const EventStream& a, const EventStream& b);

}  // namespace evkit
