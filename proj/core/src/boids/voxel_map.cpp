#include "evkit/boids/voxel_map.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "evkit/error.hpp"
#include "evkit/util/rng.hpp"

namespace evkit::boids {

std::size_t VoxelKeyHash::operator()(const VoxelKey& k) const noexcept {
  std::uint64_t h = mix_seed(static_cast<std::uint64_t>(k[0]));
  h = mix_seed(h ^ static_cast<std::uint64_t>(k[1]));
  h = mix_seed(h ^ static_cast<std::uint64_t>(k[2]));
  return static_cast<std::size_t>(h);
}

VoxelMap::VoxelMap(double voxel_size, Vec3 origin) : voxel_size_(voxel_size), origin_(origin) {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw ContractError("voxel size must be positive");
  }
}

VoxelKey VoxelMap::key_of(const Vec3& p) const {
  const Vec3 q = (p - origin_) / voxel_size_;
  return {static_cast<std::int64_t>(std::floor(q.x())), static_cast<std::int64_t>(std::floor(q.y())),
          static_cast<std::int64_t>(std::floor(q.z()))};
}

Vec3 VoxelMap::center_of(const VoxelKey& k) const {
  return origin_ + voxel_size_ * Vec3(static_cast<double>(k[0]) + 0.5,
                                      static_cast<double>(k[1]) + 0.5,
                                      static_cast<double>(k[2]) + 0.5);
}

void VoxelMap::set(const VoxelKey& k, const Vec3& repulsion) {
  const double n = repulsion.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw ContractError("repulsion vector must be nonzero");
  cells_[k] = repulsion / n;
}

std::optional<Vec3> VoxelMap::repulsion_at(const Vec3& p) const {
  auto it = cells_.find(key_of(p));
  if (it == cells_.end()) return std::nullopt;
  return it->second;
}

bool VoxelMap::segment_free(const Vec3& a, const Vec3& b) const {
  if (cells_.empty()) return true;
  // Amanatides-Woo traversal in voxel coordinates.
  const Vec3 pa = (a - origin_) / voxel_size_;
  const Vec3 pb = (b - origin_) / voxel_size_;
  VoxelKey cur = key_of(a);
  const VoxelKey last = key_of(b);
  const Vec3 d = pb - pa;
  std::array<int, 3> step{};
  std::array<double, 3> t_max{};
  std::array<double, 3> t_delta{};
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (int ax = 0; ax < 3; ++ax) {
    if (d[ax] > 0.0) {
      step[ax] = 1;
      t_max[ax] = (static_cast<double>(cur[ax]) + 1.0 - pa[ax]) / d[ax];
      t_delta[ax] = 1.0 / d[ax];
    } else if (d[ax] < 0.0) {
      step[ax] = -1;
      t_max[ax] = (static_cast<double>(cur[ax]) - pa[ax]) / d[ax];
      t_delta[ax] = -1.0 / d[ax];
    } else {
      step[ax] = 0;
      t_max[ax] = kInf;
      t_delta[ax] = kInf;
    }
  }
  // Upper bound on visited cells guards against rounding loops.
  std::int64_t budget = 3;
  for (int ax = 0; ax < 3; ++ax) budget += std::llabs(last[ax] - cur[ax]);
  budget += 3;
  while (true) {
    if (occupied(cur)) return false;
    if (cur == last) return true;
    int ax = 0;
    if (t_max[1] < t_max[ax]) ax = 1;
    if (t_max[2] < t_max[ax]) ax = 2;
    if (t_max[ax] > 1.0) {
      // Rounding left us short of the end cell; it is checked directly.
      return !occupied(last);
    }
    cur[ax] += step[ax];
    t_max[ax] += t_delta[ax];
    if (--budget < 0) return !occupied(last);
  }
}

std::vector<std::pair<VoxelKey, Vec3>> VoxelMap::sorted_cells() const {
  std::vector<std::pair<VoxelKey, Vec3>> out(cells_.begin(), cells_.end());
  std::sort(out.begin(), out.end(),
            [](const auto& l, const auto& r) { return l.first < r.first; });
  return out;
}

std::vector<Obstacle> obstacles_from_scene(const scene::SceneFile& scene) {
  std::vector<Obstacle> out;
  out.reserve(scene.placements.size());
  for (const scene::Placement& p : scene.placements) {
    out.push_back({p.position, scene::placement_radius(scene.spec, p)});
  }
  return out;
}

VoxelMap build_voxel_map(std::span<const Obstacle> obstacles, double voxel_size,
                         VoxelBuildReport* report, Vec3 origin) {
  VoxelMap map(voxel_size, origin);
  std::unordered_map<VoxelKey, double, VoxelKeyHash> best;
  std::size_t skipped = 0;
  for (const Obstacle& ob : obstacles) {
    if (!(ob.radius > 0.0) || !ob.center.allFinite()) {
      ++skipped;
      std::cerr << "warning: skipping degenerate obstacle\n";
      continue;
    }
    const VoxelKey lo = map.key_of(ob.center - Vec3::Constant(ob.radius));
    const VoxelKey hi = map.key_of(ob.center + Vec3::Constant(ob.radius));
    for (std::int64_t i = lo[0]; i <= hi[0]; ++i) {
      for (std::int64_t j = lo[1]; j <= hi[1]; ++j) {
        for (std::int64_t k = lo[2]; k <= hi[2]; ++k) {
          const VoxelKey key{i, j, k};
          const Vec3 box_lo =
              origin + voxel_size * Vec3(static_cast<double>(i), static_cast<double>(j),
                                         static_cast<double>(k));
          const Vec3 box_hi = box_lo + Vec3::Constant(voxel_size);
          const Vec3 closest = ob.center.cwiseMax(box_lo).cwiseMin(box_hi);
          if ((closest - ob.center).norm() > ob.radius) continue;
          const Vec3 c = map.center_of(key);
          const Vec3 radial = c - ob.center;
          const double dist = radial.norm();
          const double score = std::abs(dist - ob.radius);
          auto it = best.find(key);
          if (it != best.end() && it->second <= score) continue;
          best[key] = score;
          map.set(key, dist > 0.0 ? Vec3(radial / dist) : Vec3(0.0, 0.0, -1.0));
        }
      }
    }
  }
  if (report != nullptr) report->skipped_obstacles = skipped;
  return map;
}

}  // namespace evkit::boids
