#include "evkit/event.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace evkit {

SensorConfig SensorConfig::desk(int width, int height) {
  SensorConfig s;
  s.width = width;
  s.height = height;
  return s;
}

void SensorConfig::validate() const {
  if (width < 1 || height < 1 || width > 65536 || height > 65536) {
    throw ContractError(fmt::format("sensor resolution {}x{} out of range", width, height));
  }
  if (!(c_pos > 0.0) || !(c_neg > 0.0)) {
    throw ContractError("contrast thresholds must be positive");
  }
  if (refractory_ns < 0) throw ContractError("refractory period must be >= 0");
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw ContractError("fov must be in (0, 180)");
  if (!(frame_rate > 0.0) || !(compare_rate > 0.0)) {
    throw ContractError("frame and compare rates must be positive");
  }
}

double SensorConfig::focal_px() const {
  return (width / 2.0) / std::tan(fov_deg * std::numbers::pi / 360.0);
}

EventStream::EventStream(SensorConfig sensor, std::vector<Event> events)
    : sensor_(sensor), events_(std::move(events)) {
  sensor_.validate();
  if (!is_time_sorted(events_)) throw ContractError("event stream is not time-sorted");
  for (const Event& e : events_) {
    if (e.x >= sensor_.width || e.y >= sensor_.height) {
      throw ContractError(fmt::format("event ({}, {}) outside {}x{} sensor", e.x, e.y,
                                      sensor_.width, sensor_.height));
    }
    if (e.t < 0) throw ContractError("negative event timestamp");
    if (e.p != 1 && e.p != -1) throw ContractError("polarity must be +1 or -1");
  }
}

TimeSpan EventStream::span() const {
  if (events_.empty()) return {};
  return {events_.front().t, events_.back().t + 1};
}

void FlowField::validate() const {
  if (!(t0 < t1)) throw ContractError("flow field requires t0 < t1");
  if (u.width() != v.width() || u.height() != v.height()) {
    throw ContractError("flow u/v size mismatch");
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!std::isfinite(u.data()[i]) || !std::isfinite(v.data()[i])) {
      throw ContractError("flow field has non-finite entries");
    }
  }
}

bool is_time_sorted(std::span<const Event> events) {
  return std::is_sorted(events.begin(), events.end(),
                        [](const Event& a, const Event& b) { return a.t < b.t; });
}

std::vector<Event> slice_events(std::span<const Event> events, TimeUs t_start,
                                TimeUs t_end) {
  if (t_start > t_end) throw ContractError("slice requires t_start <= t_end");
  if (!is_time_sorted(events)) throw ContractError("slice of unsorted event sequence");
  std::vector<Event> out;
  for (const Event& e : events) {
    if (e.t >= t_start && e.t < t_end) out.push_back(e);
  }
  return out;
}

EventStream slice_stream(const EventStream& stream, TimeUs t_start, TimeUs t_end) {
  return EventStream(stream.sensor(), slice_events(stream.events(), t_start, t_end));
}

EventStream merge_streams(const EventStream& a, const EventStream& b) {
  if (a.sensor().width != b.sensor().width || a.sensor().height != b.sensor().height) {
    throw ContractError("merge_streams: sensor resolution mismatch");
  }
  std::vector<Event> out;
  out.reserve(a.size() + b.size());
  // std::merge takes from the first range on ties.
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out),
             [](const Event& l, const Event& r) { return l.t < r.t; });
  return EventStream(a.sensor(), std::move(out));
}

}  // namespace evkit
