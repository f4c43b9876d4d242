#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evkit/event.hpp"
#include "evkit/image.hpp"
#include "evkit/mcflow/flow_params.hpp"

namespace evkit::mcflow {

enum class Polarity { kSigned, kUnsigned };

/// Image of warped events.
struct Iwe {
  ImageD image;
  TimeUs t_ref = 0;
  /// Vote weight that landed inside / outside the frame. Their sum equals
  /// the number of events (times `weight`).
  double inside_mass = 0.0;
  double clipped_mass = 0.0;
};

struct WarpOptions {
  Polarity polarity = Polarity::kSigned;
  /// Multiplies every vote.
  double weight = 1.0;
};

/// Each event votes bilinearly at x' = x - (t - t_ref) * v(x); votes falling
/// outside the frame are dropped and counted in clipped_mass.
Iwe warp_events(std::span<const Event> events, int width, int height, const FlowParams& flow,
                TimeUs t_ref, const WarpOptions& options = {});

/// Separable Gaussian blur with clamp-to-edge borders (radius ceil(3 sigma)).
ImageD gaussian_blur(const ImageD& img, double sigma);

double image_variance(const ImageD& img);
/// Mean squared central-difference gradient norm over interior pixels.
double gradient_magnitude(const ImageD& img);

enum class ObjectiveKind {
  kVariance,
  kGradientMagnitude,
  kMultifocalVariance,
  kMultifocalGradient,
};

struct Objective {
  ObjectiveKind kind = ObjectiveKind::kVariance;
  /// Patch grids (n x n) for the multi-focal variants, descending size of
  /// patch, i.e. ascending n.
  std::vector<int> scales{1, 2, 4};
  bool blur = true;
  double blur_sigma = 1.0;
  Polarity polarity = Polarity::kSigned;

  bool normalized() const {
    return kind == ObjectiveKind::kMultifocalVariance || kind == ObjectiveKind::kMultifocalGradient;
  }
  void validate() const;
};

/// Per-scale patch-averaged functional values of an image.
std::vector<double> multifocal_terms(const ImageD& img, ObjectiveKind base,
                                     std::span<const int> scales);

/// Objective bound to one event window. The identity-warp reference used by
/// the normalized variants is computed once. Evaluation is const and
/// thread-safe.
class ContrastObjective {
 public:
  /// Throws ContractError on an empty event set.
  ContrastObjective(std::span<const Event> events, int width, int height, TimeUs t_ref,
                    Objective objective, double weight = 1.0);

  const Objective& objective() const { return objective_; }
  int width() const { return width_; }
  int height() const { return height_; }
  TimeUs t_ref() const { return t_ref_; }
  std::span<const Event> events() const { return events_; }

  /// The (optionally blurred) IWE the objective is computed from.
  ImageD prepared(const FlowParams& flow, double* clipped = nullptr) const;
  /// Throws NumericError if the value is not finite.
  double value(const FlowParams& flow, double* clipped = nullptr) const;
  /// Objective of an already prepared image.
  double value_of(const ImageD& prepared) const;

 private:
  std::span<const Event> events_;
  int width_;
  int height_;
  TimeUs t_ref_;
  Objective objective_;
  double weight_;
  std::vector<double> reference_;
};

}  // namespace evkit::mcflow
