#include "evkit/camsim/simulator.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "evkit/util/parallel.hpp"

namespace evkit::camsim {

ImageD log_intensity(const GrayFrame& frame) {
  ImageD out(frame.width(), frame.height());
  const auto& in = frame.intensity.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (!(in[i] >= 0.0 && in[i] <= 1.0)) {
      throw ContractError(fmt::format("intensity {} outside [0, 1]", in[i]));
    }
    out.data()[i] = std::log(in[i] + kLogEps);
  }
  return out;
}

int crossing_count(double delta, double c_pos, double c_neg) {
  const double c = delta >= 0.0 ? c_pos : c_neg;
  return static_cast<int>(std::floor(std::abs(delta) / c + kCountTolerance));
}

EventSimulator::EventSimulator(SensorConfig sensor, int threads)
    : sensor_(sensor), threads_(std::max(threads, 1)) {
  sensor_.validate();
}

void EventSimulator::reset(const GrayFrame& first) {
  if (first.width() != sensor_.width || first.height() != sensor_.height) {
    throw ContractError("frame size does not match sensor");
  }
  state_.l_ref = log_intensity(first);
  state_.t_last_event = Image<TimeNs>(sensor_.width, sensor_.height, kNeverFired);
  state_.t_now = first.t * 1000;
  last_counts_ = Image<int>(sensor_.width, sensor_.height, 0);
  suppressed_ = 0;
  initialized_ = true;
}

std::vector<Event> EventSimulator::process(const GrayFrame& next) {
  if (!initialized_) throw ContractError("simulator not initialized; call reset() first");
  if (next.width() != sensor_.width || next.height() != sensor_.height) {
    throw ContractError("frame size does not match sensor");
  }
  const TimeUs ta = state_.t_now / 1000;
  const TimeUs tb = next.t;
  if (tb <= ta) {
    throw ContractError(fmt::format("frame timestamps must increase ({} after {})", tb, ta));
  }
  const ImageD l_next = log_intensity(next);
  const TimeUs dt_us = tb - ta;
  const TimeNs ta_ns = ta * 1000;
  const TimeNs dt_ns = dt_us * 1000;
  const int w = sensor_.width;
  const int h = sensor_.height;

  std::vector<std::vector<Event>> rows(static_cast<std::size_t>(h));
  std::vector<std::size_t> row_suppressed(static_cast<std::size_t>(h), 0);
  parallel_for(static_cast<std::size_t>(h), threads_, [&](std::size_t y0, std::size_t y1) {
    for (std::size_t yy = y0; yy < y1; ++yy) {
      const int y = static_cast<int>(yy);
      auto& out = rows[yy];
      for (int x = 0; x < w; ++x) {
        double& ref = state_.l_ref(x, y);
        const double delta = l_next(x, y) - ref;
        const int n = crossing_count(delta, sensor_.c_pos, sensor_.c_neg);
        last_counts_(x, y) = n;
        if (n == 0) continue;
        const bool up = delta >= 0.0;
        const double c = up ? sensor_.c_pos : sensor_.c_neg;
        TimeNs& last = state_.t_last_event(x, y);
        for (int k = 1; k <= n; ++k) {
          const TimeNs t_ns = ta_ns + (static_cast<TimeNs>(k) * dt_ns) / (n + 1);
          if (last != kNeverFired && t_ns - last < sensor_.refractory_ns) {
            ++row_suppressed[yy];
            continue;
          }
          last = t_ns;
          const TimeUs t_us = ta + (static_cast<TimeUs>(k) * dt_us + n) / (n + 1);
          out.push_back(Event{static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), t_us,
                              static_cast<std::int8_t>(up ? 1 : -1)});
        }
        ref += (up ? 1.0 : -1.0) * n * c;
      }
    }
  });

  std::vector<Event> events;
  for (std::size_t y = 0; y < rows.size(); ++y) {
    events.insert(events.end(), rows[y].begin(), rows[y].end());
    suppressed_ += row_suppressed[y];
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  state_.t_now = tb * 1000;
  return events;
}

EventStream simulate_events(std::span<const GrayFrame> frames, const SensorConfig& sensor,
                            int threads) {
  if (frames.size() < 2) throw ContractError("event simulation needs at least two frames");
  EventSimulator sim(sensor, threads);
  sim.reset(frames.front());
  std::vector<Event> all;
  for (std::size_t k = 1; k < frames.size(); ++k) {
    auto ev = sim.process(frames[k]);
    all.insert(all.end(), ev.begin(), ev.end());
  }
  return EventStream(sensor, std::move(all));
}

ImageD residual_state(const EventSimulator& sim, const GrayFrame& last) {
  const ImageD l = log_intensity(last);
  ImageD out(l.width(), l.height());
  for (std::size_t i = 0; i < l.size(); ++i) {
    out.data()[i] = std::abs(l.data()[i] - sim.state().l_ref.data()[i]);
  }
  return out;
}

}  // namespace evkit::camsim
