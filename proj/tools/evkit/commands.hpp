#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "evkit/encode/encoder.hpp"
#include "evkit/event.hpp"
#include "evkit/mcflow/estimator.hpp"

namespace evkit::cli {

/// Thrown when an evaluation exceeds its AEE budget; main maps it to exit 2.
struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Events from a PGM frame directory (sorted by name, `fps` apart) or from the
/// gray frames of a container. `.evz` output keeps the container's frames and
/// flow; any other extension gets the text format.
struct SimulateOptions {
  std::filesystem::path input;
  std::filesystem::path output;
  SensorConfig sensor = SensorConfig::desk();
  double fps = 0.0;  // 0: the sensor's compare rate
  int threads = 1;
};
std::size_t cmd_simulate_events(const SimulateOptions& opt);

/// Loads events from a container or a text file.
EventStream load_events(const std::filesystem::path& path, const SensorConfig& sensor);

struct EncodeOptions {
  std::filesystem::path input;
  std::filesystem::path out_dir;
  encode::EncoderConfig encoder;
  TimeSpan span;  // empty: the stream's own span
  SensorConfig sensor = SensorConfig::desk();
};
std::size_t cmd_encode(const EncodeOptions& opt);

/// Estimates one flow field per consecutive gray-frame pair and writes a
/// container with the input's events and frames and the predicted flow.
/// With span > 1 the velocity for interval k is fitted over `span` intervals
/// starting at k (shifted back at the end of the recording) and scaled to
/// interval k; contrast needs a few pixels of motion per window.
struct EstimateOptions {
  std::filesystem::path input;
  std::filesystem::path output;
  mcflow::EstimatorConfig estimator;
  int span = 1;
};
std::size_t cmd_estimate(const EstimateOptions& opt);

/// Per-slice and pixel-weighted aggregate metrics of predicted against
/// ground-truth flow. The mask of each slice is the set of pixels with events
/// in that slice. Throws BudgetExceeded when the aggregate AEE exceeds
/// `budget` (negative disables the check).
struct EvaluateOptions {
  std::filesystem::path pred;
  std::filesystem::path gt;
  std::filesystem::path report;  // JSON; empty for none
  double budget = -1.0;
  bool text = true;
};
double cmd_evaluate(const EvaluateOptions& opt);

enum class VisualMode { kOverlay, kFlowColor, kVolume };
VisualMode parse_visual_mode(const std::string& s);

struct VisualizeOptions {
  std::filesystem::path input;
  std::filesystem::path out_dir;
  VisualMode mode = VisualMode::kOverlay;
  TimeUs window_us = 100000;
};
std::size_t cmd_visualize(const VisualizeOptions& opt);

struct ImportOptions {
  std::filesystem::path input;
  std::filesystem::path output;
  SensorConfig sensor = SensorConfig::desk();
};
std::size_t cmd_import(const ImportOptions& opt);
std::size_t cmd_export(const std::filesystem::path& input, const std::filesystem::path& output);

}  // namespace evkit::cli
