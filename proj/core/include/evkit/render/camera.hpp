#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "evkit/event.hpp"

namespace evkit::render {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics with square pixels; pixel centres sit at integer
/// coordinates, so the principal point of a W x H sensor is ((W-1)/2, (H-1)/2).
struct Pinhole {
  int width = 0;
  int height = 0;
  double f = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  static Pinhole from_sensor(const SensorConfig& sensor);

  /// Camera-frame point to pixel; nullopt behind the camera.
  std::optional<Vec2> project(const Vec3& p_cam) const;
  /// Camera-frame ray direction (z = 1) through a pixel.
  Vec3 ray(double u, double v) const { return {(u - cx) / f, (v - cy) / f, 1.0}; }
};

/// Camera position (NED metres), yaw about the world down-axis and a fixed
/// tilt of the optical axis from nadir toward the heading.
struct CameraPose {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
  double tilt = 0.0;

  /// Columns are the camera x (image right), y (image down) and z (optical
  /// axis) axes expressed in the world frame.
  Mat3 rotation() const;
  Vec3 to_camera(const Vec3& world) const;
  Vec3 to_world_dir(const Vec3& cam_dir) const;

  bool operator==(const CameraPose&) const = default;
};

struct TrajectorySample {
  TimeUs t = 0;
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
};

/// Piecewise-linear camera path. Yaw is interpolated linearly (no wrapping).
class CameraTrajectory {
 public:
  static constexpr double kDefaultVMax = 0.85;

  CameraTrajectory() = default;
  /// Throws ContractError unless timestamps strictly increase and every
  /// segment speed is <= v_max.
  CameraTrajectory(std::vector<TrajectorySample> samples, double tilt,
                   double v_max = kDefaultVMax);

  const std::vector<TrajectorySample>& samples() const { return samples_; }
  double tilt() const { return tilt_; }
  double v_max() const { return v_max_; }
  TimeSpan span() const;
  /// Throws RangeError outside the sampled span.
  CameraPose pose_at(TimeUs t) const;
  /// Largest segment speed, m/s.
  double max_speed() const;

 private:
  std::vector<TrajectorySample> samples_;
  double tilt_ = 0.0;
  double v_max_ = kDefaultVMax;
};

struct PresetOptions {
  double duration_s = 5.0;
  double z_ground = 3.0;
  double speed = 0.5;
  double sample_rate = 100.0;
  std::uint64_t seed = 0;
};

/// Nadir camera at a constant altitude (2 m above ground by default), gently
/// weaving heading.
CameraTrajectory preset_down_looking(const PresetOptions& opt, double altitude = 2.0);
/// Camera tilted 35 degrees forward, following its heading while its depth
/// oscillates around `altitude` above ground.
CameraTrajectory preset_forward_looking(const PresetOptions& opt, double altitude = 2.0);

}  // namespace evkit::render
