#include "evkit/boids/planner.hpp"

#include <algorithm>
#include <limits>

#include "evkit/error.hpp"
#include "evkit/util/rng.hpp"

namespace evkit::boids {

namespace {

struct Node {
  Vec3 p;
  std::size_t parent;
};

std::vector<Vec3> backtrack(const std::vector<Node>& tree, std::size_t leaf, const Vec3& goal) {
  std::vector<Vec3> path{goal};
  for (std::size_t i = leaf;; i = tree[i].parent) {
    path.push_back(tree[i].p);
    if (i == 0) break;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

LeaderPath plan_leader_path(const VoxelMap& map, const Vec3& start, const Vec3& goal,
                            const PlannerConfig& config) {
  if (!(config.step_size > 0.0)) throw ContractError("RRT step size must be positive");
  if (config.max_iters < 0) throw ContractError("RRT max_iters must be non-negative");
  if (!start.allFinite() || !goal.allFinite()) throw ContractError("RRT endpoints must be finite");
  if (map.occupied_at(start)) throw ContractError("RRT start lies in an occupied voxel");
  if (map.occupied_at(goal)) throw ContractError("RRT goal lies in an occupied voxel");

  LeaderPath out;
  out.reach_radius = config.step_size;
  if (start == goal) {
    out.waypoints = {start};
    return out;
  }

  std::vector<Node> tree{{start, 0}};
  // Free straight line: no tree needed.
  if (map.segment_free(start, goal)) {
    out.waypoints = {start, goal};
    return out;
  }

  Rng rng(config.seed);
  const Aabb& box = config.bounds;
  for (int iter = 0; iter < config.max_iters; ++iter) {
    Vec3 sample;
    if (rng.uniform() < config.goal_bias) {
      sample = goal;
    } else {
      for (int a = 0; a < 3; ++a) sample[a] = rng.uniform(box.min[a], box.max[a]);
    }
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tree.size(); ++i) {
      const double d = (tree[i].p - sample).squaredNorm();
      if (d < best) {
        best = d;
        nearest = i;
      }
    }
    const Vec3& from = tree[nearest].p;
    const Vec3 delta = sample - from;
    const double len = delta.norm();
    if (len == 0.0) continue;
    const Vec3 next = len > config.step_size ? Vec3(from + delta * (config.step_size / len)) : sample;
    if (!map.segment_free(from, next)) continue;
    tree.push_back({next, nearest});
    const std::size_t leaf = tree.size() - 1;
    if (next == goal) {
      out.waypoints = backtrack(tree, tree[leaf].parent, goal);
      return out;
    }
    if ((goal - next).norm() <= config.step_size && map.segment_free(next, goal)) {
      out.waypoints = backtrack(tree, leaf, goal);
      return out;
    }
  }
  throw PlanningError("RRT found no path within the iteration budget");
}

}  // namespace evkit::boids
