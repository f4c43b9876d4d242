#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evkit/event.hpp"
#include "evkit/image.hpp"

namespace evkit::eval {

/// Pixels that saw at least one event in the evaluation window.
class EvalMask {
 public:
  EvalMask(int width, int height, bool fill = false);
  /// Marks every event location in [span.begin, span.end).
  static EvalMask from_events(std::span<const Event> events, int width, int height,
                              const TimeSpan& span);
  static EvalMask from_events(std::span<const Event> events, int width, int height);

  int width() const { return mask_.width(); }
  int height() const { return mask_.height(); }
  bool operator()(int x, int y) const { return mask_(x, y) != 0; }
  void set(int x, int y, bool v = true) { mask_(x, y) = v ? 1 : 0; }
  std::size_t count() const;

 private:
  Image<unsigned char> mask_;
};

/// Mean endpoint error over the mask. Throws ContractError on size mismatch
/// or an empty mask.
double aee(const FlowField& pred, const FlowField& gt, const EvalMask& mask);

struct AaeResult {
  double degrees = 0.0;
  std::size_t pixels = 0;
  /// Masked pixels skipped because either vector was (near) zero.
  std::size_t excluded = 0;
};

inline constexpr double kZeroNorm = 1e-9;

/// Mean 2D angle (degrees). Throws ContractError if no masked pixel has two
/// nonzero vectors.
AaeResult aae(const FlowField& pred, const FlowField& gt, const EvalMask& mask);

/// Percentage of masked pixels with endpoint error strictly above x.
double xpe(const FlowField& pred, const FlowField& gt, const EvalMask& mask, double x);

struct EvalReport {
  double aee = 0.0;
  double aae = 0.0;
  std::map<double, double> xpe;
  std::size_t n_pixels = 0;
  std::size_t aae_excluded = 0;
};

inline constexpr double kDefaultThresholds[] = {1.0, 2.0, 3.0};

EvalReport evaluate(const FlowField& pred, const FlowField& gt, const EvalMask& mask,
                    std::span<const double> thresholds = kDefaultThresholds);

nlohmann::json to_json(const EvalReport& r);
/// "key value" lines.
std::string to_text(const EvalReport& r);

/// Charbonnier penalty (z^2 + eps^2)^alpha.
double charbonnier(double z, double alpha, double eps);

/// Mean Charbonnier of frame1(x + flow(x)) - frame0(x) over in-bounds
/// targets (bilinear). Throws ContractError if no target is in bounds.
double photometric_loss(const GrayFrame& frame0, const GrayFrame& frame1, const FlowField& flow,
                        double alpha = 0.45, double eps = 1e-3);

/// Mean Charbonnier of horizontal and vertical neighbour differences of both
/// flow components.
double smoothness_loss(const FlowField& flow, double alpha = 0.45, double eps = 1e-3);

}  // namespace evkit::eval
