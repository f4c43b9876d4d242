#pragma once

#include <vector>

#include <Eigen/Core>

#include "evkit/event.hpp"

namespace evkit::mcflow {

using Vec2 = Eigen::Vector2d;

/// Coarse cols x rows grid of velocities (px/s). Cell centres are spread
/// evenly over the image; the dense field is their bilinear interpolation
/// with clamping at the border. A 1 x 1 grid is the global-motion model.
class FlowParams {
 public:
  FlowParams() : FlowParams(1, 1) {}
  FlowParams(int cols, int rows);

  static FlowParams constant(double u, double v);

  int cols() const { return cols_; }
  int rows() const { return rows_; }
  std::size_t size() const { return cells_.size(); }

  Vec2& cell(int i, int j) { return cells_[static_cast<std::size_t>(j * cols_ + i)]; }
  const Vec2& cell(int i, int j) const { return cells_[static_cast<std::size_t>(j * cols_ + i)]; }
  std::vector<Vec2>& cells() { return cells_; }
  const std::vector<Vec2>& cells() const { return cells_; }

  /// Flat parameter vector (u0, v0, u1, v1, ...).
  std::vector<double> flat() const;
  void set_flat(const std::vector<double>& p);

  /// Interpolated velocity at pixel (x, y) of a width x height image.
  Vec2 at(double x, double y, int width, int height) const;

  /// Same field sampled on a different grid.
  FlowParams resampled(int cols, int rows, int width, int height) const;

  /// Dense displacement over [t0, t1] (velocity times duration).
  FlowField to_flow_field(int width, int height, TimeUs t0, TimeUs t1) const;

  bool finite() const;

 private:
  int cols_;
  int rows_;
  std::vector<Vec2> cells_;
};

/// Charbonnier penalty sum over horizontal and vertical neighbour
/// differences of each velocity component (after multiplying by `scale`),
/// reported net of the eps floor so a constant grid gives exactly 0.
double smoothness(const FlowParams& flow, double scale = 1.0, double alpha = 0.45,
                  double eps = 1e-3);

}  // namespace evkit::mcflow
