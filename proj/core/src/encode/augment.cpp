#include "evkit/encode/augment.hpp"

#include <algorithm>
#include <cmath>

#include "evkit/util/rng.hpp"

namespace evkit::encode {

EventStream augment_time_warp(const EventStream& stream, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw ContractError("time warp factor must be positive");
  }
  std::vector<Event> out(stream.begin(), stream.end());
  for (Event& e : out) e.t = std::llround(factor * static_cast<double>(e.t));
  return EventStream(stream.sensor(), std::move(out));
}

EventStream augment_noise(const EventStream& stream, double rate, const TimeSpan& span,
                          std::uint64_t seed) {
  if (!(rate >= 0.0)) throw ContractError("noise rate must be >= 0");
  if (rate == 0.0 || span.empty()) return stream;
  const SensorConfig& s = stream.sensor();
  Rng rng(seed);
  const double mean = rate * s.width * s.height * us_to_s(span.duration());
  const std::uint64_t n = rng.poisson(mean);
  std::vector<Event> noise(n);
  for (Event& e : noise) {
    e.x = static_cast<std::uint16_t>(rng.below(static_cast<std::uint64_t>(s.width)));
    e.y = static_cast<std::uint16_t>(rng.below(static_cast<std::uint64_t>(s.height)));
    e.t = span.begin + static_cast<TimeUs>(rng.below(static_cast<std::uint64_t>(span.duration())));
    e.p = rng.coin() ? 1 : -1;
  }
  std::stable_sort(noise.begin(), noise.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return merge_streams(stream, EventStream(s, std::move(noise)));
}

EventStream augment_noise(const EventStream& stream, double rate, std::uint64_t seed) {
  return augment_noise(stream, rate, stream.span(), seed);
}

EventStream augment_flip(const EventStream& stream, FlipAxis axis) {
  const SensorConfig& s = stream.sensor();
  std::vector<Event> out(stream.begin(), stream.end());
  for (Event& e : out) {
    switch (axis) {
      case FlipAxis::kHorizontal:
        e.x = static_cast<std::uint16_t>(s.width - 1 - e.x);
        break;
      case FlipAxis::kVertical:
        e.y = static_cast<std::uint16_t>(s.height - 1 - e.y);
        break;
      case FlipAxis::kPolarity:
        e.p = static_cast<std::int8_t>(-e.p);
        break;
    }
  }
  return EventStream(s, std::move(out));
}

FlowField flip_flow(const FlowField& flow, FlipAxis axis) {
  if (axis == FlipAxis::kPolarity) return flow;
  const int w = flow.width();
  const int h = flow.height();
  FlowField out(flow.t0, flow.t1, w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (axis == FlipAxis::kHorizontal) {
        out.u(x, y) = -flow.u(w - 1 - x, y);
        out.v(x, y) = flow.v(w - 1 - x, y);
      } else {
        out.u(x, y) = flow.u(x, h - 1 - y);
        out.v(x, y) = -flow.v(x, h - 1 - y);
      }
    }
  }
  return out;
}

namespace {

void check_window(const CropWindow& w, int width, int height) {
  if (w.width <= 0 || w.height <= 0) throw ContractError("empty crop window");
  if (w.x0 < 0 || w.y0 < 0 || w.x0 + w.width > width || w.y0 + w.height > height) {
    throw ContractError("crop window outside sensor bounds");
  }
}

int quarter_turns(int k) { return ((k % 4) + 4) % 4; }

}  // namespace

EventStream augment_crop(const EventStream& stream, const CropWindow& window) {
  const SensorConfig& s = stream.sensor();
  check_window(window, s.width, s.height);
  SensorConfig cropped = s;
  cropped.width = window.width;
  cropped.height = window.height;
  std::vector<Event> out;
  for (Event e : stream) {
    const int x = e.x - window.x0;
    const int y = e.y - window.y0;
    if (x < 0 || y < 0 || x >= window.width || y >= window.height) continue;
    e.x = static_cast<std::uint16_t>(x);
    e.y = static_cast<std::uint16_t>(y);
    out.push_back(e);
  }
  return EventStream(cropped, std::move(out));
}

FlowField crop_flow(const FlowField& flow, const CropWindow& window) {
  check_window(window, flow.width(), flow.height());
  FlowField out(flow.t0, flow.t1, window.width, window.height);
  for (int y = 0; y < window.height; ++y) {
    for (int x = 0; x < window.width; ++x) {
      out.u(x, y) = flow.u(x + window.x0, y + window.y0);
      out.v(x, y) = flow.v(x + window.x0, y + window.y0);
    }
  }
  return out;
}

EventStream augment_rotate90(const EventStream& stream, int k) {
  SensorConfig s = stream.sensor();
  std::vector<Event> out(stream.begin(), stream.end());
  for (int turn = 0; turn < quarter_turns(k); ++turn) {
    for (Event& e : out) {
      const int x = s.height - 1 - e.y;
      const int y = e.x;
      e.x = static_cast<std::uint16_t>(x);
      e.y = static_cast<std::uint16_t>(y);
    }
    std::swap(s.width, s.height);
  }
  return EventStream(s, std::move(out));
}

FlowField rotate_flow(const FlowField& flow, int k) {
  FlowField cur = flow;
  for (int turn = 0; turn < quarter_turns(k); ++turn) {
    const int w = cur.width();
    const int h = cur.height();
    FlowField next(cur.t0, cur.t1, h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int nx = h - 1 - y;
        const int ny = x;
        next.u(nx, ny) = -cur.v(x, y);
        next.v(nx, ny) = cur.u(x, y);
      }
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace evkit::encode
