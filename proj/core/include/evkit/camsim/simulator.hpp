#pragma once

#include <limits>
#include <span>
#include <vector>

#include "evkit/event.hpp"

namespace evkit::camsim {

/// Offset added before taking the log so black pixels stay finite.
inline constexpr double kLogEps = 1e-3;
/// Slack on |dL| / C before flooring, so changes that are an exact multiple of
/// the threshold (up to floating-point noise) emit the full count.
inline constexpr double kCountTolerance = 1e-9;
/// t_last_event value of a pixel that has never fired.
inline constexpr TimeNs kNeverFired = std::numeric_limits<TimeNs>::min();

/// L = ln(I + eps). Throws ContractError for intensities outside [0, 1].
ImageD log_intensity(const GrayFrame& frame);

/// Number of threshold crossings for a log change `delta` (before refractory
/// suppression).
int crossing_count(double delta, double c_pos, double c_neg);

/// Per-pixel reference log intensity and last emission time.
struct PixelState {
  ImageD l_ref;
  Image<TimeNs> t_last_event;
  TimeNs t_now = 0;
};

/// Frame-pair event generator. For each pixel and each consecutive frame
/// pair (t_a, t_b], n = floor(|L_b - l_ref| / C) events of the change's sign
/// are placed at t_a + ceil(k (t_b - t_a) / (n + 1)) us, k = 1..n, and l_ref
/// moves by n * C. Events within the refractory period of the pixel's
/// previous emission are dropped; l_ref still moves.
class EventSimulator {
 public:
  explicit EventSimulator(SensorConfig sensor, int threads = 1);

  /// Starts a new run from `first` (no events are produced for it).
  void reset(const GrayFrame& first);
  /// Events in (t_prev, next.t], time-sorted with ties ordered by (y, x).
  std::vector<Event> process(const GrayFrame& next);

  bool initialized() const { return initialized_; }
  const PixelState& state() const { return state_; }
  /// Crossing counts of the last processed interval, before suppression.
  const Image<int>& last_counts() const { return last_counts_; }
  std::size_t suppressed() const { return suppressed_; }

 private:
  SensorConfig sensor_;
  int threads_;
  bool initialized_ = false;
  PixelState state_;
  Image<int> last_counts_;
  std::size_t suppressed_ = 0;
};

/// Runs the simulator over >= 2 frames with strictly increasing timestamps.
EventStream simulate_events(std::span<const GrayFrame> frames, const SensorConfig& sensor,
                            int threads = 1);

/// |L_final - l_ref| per pixel after a run.
ImageD residual_state(const EventSimulator& sim, const GrayFrame& last);

}  // namespace evkit::camsim
