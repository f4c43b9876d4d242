#pragma once

#include <cstdint>

#include "evkit/event.hpp"

namespace evkit::encode {

/// t' = round(factor * t). Throws ContractError unless factor > 0.
EventStream augment_time_warp(const EventStream& stream, double factor);

/// Merges uniformly distributed noise events over `span` (position uniform
/// over the sensor, time uniform in the span, fair-coin polarity). The count
/// is Poisson with mean rate * W * H * duration_s. Deterministic per seed.
EventStream augment_noise(const EventStream& stream, double rate_hz_per_px,
                          const TimeSpan& span, std::uint64_t seed);
/// Noise over the stream's own span.
EventStream augment_noise(const EventStream& stream, double rate_hz_per_px,
                          std::uint64_t seed);

enum class FlipAxis { kHorizontal, kVertical, kPolarity };

EventStream augment_flip(const EventStream& stream, FlipAxis axis);
/// Companion transform for ground-truth flow under the same flip.
FlowField flip_flow(const FlowField& flow, FlipAxis axis);

struct CropWindow {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
};

/// Keeps events inside the window and re-origins them; the result's sensor
/// is window-sized. Throws ContractError for empty or out-of-bounds windows.
EventStream augment_crop(const EventStream& stream, const CropWindow& window);
FlowField crop_flow(const FlowField& flow, const CropWindow& window);

/// Rotates by k quarter turns clockwise in image coordinates (y down):
/// (x, y) -> (H-1-y, x) per turn; the sensor's width and height swap on odd k.
EventStream augment_rotate90(const EventStream& stream, int k);
/// Rotates the field's support and its vectors: (u, v) -> (-v, u) per turn.
FlowField rotate_flow(const FlowField& flow, int k);

}  // namespace evkit::encode
