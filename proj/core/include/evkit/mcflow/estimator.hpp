#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evkit/mcflow/contrast.hpp"

namespace evkit::mcflow {

struct GridSize {
  int cols = 1;
  int rows = 1;
  bool operator==(const GridSize&) const = default;
};

struct EstimatorConfig {
  Objective objective;
  /// Grid shapes visited coarse to fine.
  std::vector<GridSize> schedule{{1, 1}, {2, 2}, {4, 4}};
  int starts = 5;
  /// Random starts are drawn uniformly in a disc of this radius (px of
  /// displacement over the window); start 0 is always zero motion.
  double start_radius = 4.0;
  /// When > 0, the global level also scans a displacement lattice of this
  /// half-width (px) at `scan_step` and adds its best point as a start.
  double scan_radius = 0.0;
  double scan_step = 1.0;
  int max_iters = 100;
  double initial_step = 1.0;  // px
  double min_step = 1e-3;     // px
  double fd_h = 0.05;         // px
  double lambda_s = 0.01;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct EstimateResult {
  FlowParams flow;  // px/s
  double objective = 0.0;
  double penalized = 0.0;
  /// Best penalized objective after every accepted step, all levels.
  std::vector<double> trace;
  double clipped_mass = 0.0;
  /// False if any level stopped on max_iters rather than the step floor.
  bool converged = true;
};

/// Contrast maximization over [window.begin, window.end): maximizes
/// objective - lambda_s * smoothness(displacement) by multi-start
/// finite-difference gradient ascent with a backtracking step. Multi-start
/// runs on the first grid; finer grids start from the upsampled best.
/// Parameters are handled as displacements over the window internally.
EstimateResult estimate_flow(std::span<const Event> events, int width, int height,
                             const TimeSpan& window, const EstimatorConfig& config);

}  // namespace evkit::mcflow
