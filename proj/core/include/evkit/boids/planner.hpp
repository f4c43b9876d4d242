#pragma once

#include <cstdint>
#include <vector>

#include "evkit/boids/voxel_map.hpp"

namespace evkit::boids {

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

struct LeaderPath {
  std::vector<Vec3> waypoints;
  /// Index of the waypoint the leader is currently heading to.
  std::size_t target = 0;
  /// A waypoint counts as reached within this distance.
  double reach_radius = 0.5;
};

struct PlannerConfig {
  Aabb bounds;
  double step_size = 0.5;
  int max_iters = 5000;
  double goal_bias = 0.05;
  std::uint64_t seed = 0;
};

/// Plain RRT (no smoothing). Each extension is accepted only if the segment
/// is collision-free; the goal is connected as soon as a node lies within
/// step_size of it with a free segment. A free straight start-goal segment
/// is returned directly.
/// Throws ContractError if start or goal is occupied, PlanningError when no
/// path is found within max_iters.
LeaderPath plan_leader_path(const VoxelMap& map, const Vec3& start, const Vec3& goal,
                            const PlannerConfig& config);

}  // namespace evkit::boids
