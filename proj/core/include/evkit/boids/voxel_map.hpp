#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "evkit/scene/scene.hpp"

namespace evkit::boids {

using Vec3 = Eigen::Vector3d;
using VoxelKey = std::array<std::int64_t, 3>;

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept;
};

/// Spherical obstacle volume (NED metres).
struct Obstacle {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

/// Uniform occupancy grid whose occupied cells carry a unit repulsion vector.
/// Query semantics do not depend on the grid being uniform, so an adaptive
/// octree could stand behind the same interface.
class VoxelMap {
 public:
  explicit VoxelMap(double voxel_size, Vec3 origin = Vec3::Zero());

  double voxel_size() const { return voxel_size_; }
  const Vec3& origin() const { return origin_; }
  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }

  VoxelKey key_of(const Vec3& p) const;
  Vec3 center_of(const VoxelKey& k) const;

  /// Marks a cell occupied; `repulsion` is normalized.
  void set(const VoxelKey& k, const Vec3& repulsion);
  bool occupied(const VoxelKey& k) const { return cells_.contains(k); }
  bool occupied_at(const Vec3& p) const { return occupied(key_of(p)); }
  /// Repulsion vector of the cell containing p, if occupied.
  std::optional<Vec3> repulsion_at(const Vec3& p) const;

  /// True when no cell traversed by the segment [a, b] is occupied (exact
  /// grid traversal, not point sampling).
  bool segment_free(const Vec3& a, const Vec3& b) const;

  /// Occupied cells in key order.
  std::vector<std::pair<VoxelKey, Vec3>> sorted_cells() const;

 private:
  double voxel_size_;
  Vec3 origin_;
  std::unordered_map<VoxelKey, Vec3, VoxelKeyHash> cells_;
};

/// Bounding spheres of the scene's placements (catalogue radius times scale).
std::vector<Obstacle> obstacles_from_scene(const scene::SceneFile& scene);

struct VoxelBuildReport {
  std::size_t skipped_obstacles = 0;
};

/// Marks every voxel whose box intersects an obstacle sphere. The stored
/// vector points from the obstacle's nearest surface point (radially) toward
/// the voxel centre; where spheres overlap, the obstacle whose surface is
/// closest to the voxel centre wins. Zero-radius obstacles are skipped and
/// counted in `report`.
VoxelMap build_voxel_map(std::span<const Obstacle> obstacles, double voxel_size,
                         VoxelBuildReport* report = nullptr, Vec3 origin = Vec3::Zero());

}  // namespace evkit::boids
