#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evkit/boids/planner.hpp"
#include "evkit/boids/voxel_map.hpp"

namespace evkit::boids {

struct BoidState {
  Vec3 position = Vec3::Zero();  // NED metres
  Vec3 velocity = Vec3::Zero();  // m/s

  bool operator==(const BoidState&) const = default;
};

struct SchoolConfig {
  int size = 20;
  double w_align = 1.0;
  double w_cohere = 1.0;
  double w_separate = 0.3;
  double w_leader = 1.5;
  double r_perception = 2.0;
  double r_separation = 0.5;
  double v_max = 0.8;
  double dt = 1.0 / 50.0;
  double cohesion_gain = 1.0;
  double leader_gain = 1.0;
  Vec3 spawn_center = Vec3::Zero();
  double spawn_radius = 1.0;
  double model_scale = 0.25;
  std::string model = "fish";
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const SchoolConfig& cfg);
/// Missing keys keep the defaults.
SchoolConfig school_from_json(const nlohmann::json& j);

/// Moving obstacle with a repulsion radius (e.g. the camera vehicle).
struct DynamicRepeller {
  Vec3 position = Vec3::Zero();
  double r_repel = 1.0;
  double strength = 2.0;
};

/// Horizontal plane (e.g. the water surface) pushing boids downward (+z)
/// when they come within `margin` of it.
struct PlanarRepeller {
  double depth = 0.0;
  double margin = 0.5;
  double strength = 2.0;
};

struct Environment {
  const VoxelMap* voxels = nullptr;
  double voxel_strength = 3.0;
  std::vector<DynamicRepeller> repellers;
  std::optional<PlanarRepeller> surface;
};

/// w_align * (mean neighbour velocity - own velocity); zero without neighbours.
Vec3 force_alignment(std::size_t i, std::span<const BoidState> school, const SchoolConfig& cfg);
/// w_cohere * gain * unit(neighbour centroid - own position).
Vec3 force_cohesion(std::size_t i, std::span<const BoidState> school, const SchoolConfig& cfg);
/// Sum over neighbours closer than r_separation of w_separate / |p_i - p_j|^2
/// along unit(p_i - p_j) (inverse square). Coincident pairs get a
/// direction derived from (seed, step, pair) that is antisymmetric in the pair.
Vec3 force_separation(std::size_t i, std::span<const BoidState> school, const SchoolConfig& cfg,
                      std::uint64_t step = 0);
/// w_leader * gain * unit(p_leader - p_i); zero for the leader itself.
Vec3 force_leader(std::size_t i, std::span<const BoidState> school, const SchoolConfig& cfg,
                  std::size_t leader = 0);
/// Voxel, dynamic and planar repulsion acting on one boid.
Vec3 environment_force(const BoidState& boid, const Environment& env);

/// One fish school: boid 0 is the leader and steers only toward its next
/// waypoint (plus environmental repulsion); the others sum the four rules.
class School {
 public:
  School(SchoolConfig cfg, LeaderPath path);

  const SchoolConfig& config() const { return cfg_; }
  const std::vector<BoidState>& boids() const { return boids_; }
  const LeaderPath& path() const { return path_; }
  std::uint64_t step_count() const { return steps_; }
  static constexpr std::size_t leader() { return 0; }

  /// Pre-clamp total force on boid i for the current snapshot.
  Vec3 total_force(std::size_t i, const Environment& env) const;

  /// Synchronous explicit-Euler update: v <- clamp(v + F dt, v_max),
  /// p <- p + v dt. `clamp_speed` exists for linearity tests.
  void step(const Environment& env, int threads = 1, bool clamp_speed = true);

 private:
  SchoolConfig cfg_;
  LeaderPath path_;
  std::vector<BoidState> boids_;
  std::uint64_t steps_ = 0;
};

/// Rescales v so that |v| <= v_max holds exactly in floating point.
Vec3 clamp_speed(const Vec3& v, double v_max);

/// Time-stamped record of one boid, shared with the renderer.
struct TrajectoryRecord {
  double t = 0.0;  // seconds
  int school = 0;
  int boid = 0;
  BoidState state;
};

/// Steps the school `steps` times and records every boid at t = 0 and after
/// each step. `update` may move dynamic repellers before each step.
std::vector<TrajectoryRecord> run_school(
    School& school, int school_id, Environment env, int steps, int threads = 1,
    const std::function<void(double t, Environment&)>& update = {});

/// Text format: "t school boid n e d vn ve vd" per line, '#' comments.
void write_trajectory(const std::filesystem::path& path, std::span<const TrajectoryRecord> records);
std::vector<TrajectoryRecord> read_trajectory(const std::filesystem::path& path);

}  // namespace evkit::boids
