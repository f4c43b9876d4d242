#include "evkit/render/camera.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "evkit/error.hpp"
#include "evkit/util/rng.hpp"

namespace evkit::render {

Pinhole Pinhole::from_sensor(const SensorConfig& sensor) {
  sensor.validate();
  Pinhole p;
  p.width = sensor.width;
  p.height = sensor.height;
  p.f = sensor.focal_px();
  p.cx = 0.5 * sensor.width - 0.5;
  p.cy = 0.5 * sensor.height - 0.5;
  return p;
}

std::optional<Vec2> Pinhole::project(const Vec3& p) const {
  if (!(p.z() > 0.0)) return std::nullopt;
  return Vec2(f * p.x() / p.z() + cx, f * p.y() / p.z() + cy);
}

Mat3 CameraPose::rotation() const {
  // Base frame at zero yaw: x east, y south, z down; tilt swings the optical
  // axis toward north.
  const double ct = std::cos(tilt), st = std::sin(tilt);
  Mat3 base;
  base.col(0) = Vec3(0.0, 1.0, 0.0);
  base.col(1) = Vec3(-ct, 0.0, st);
  base.col(2) = Vec3(st, 0.0, ct);
  const Mat3 yaw_m = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  return yaw_m * base;
}

Vec3 CameraPose::to_camera(const Vec3& world) const {
  return rotation().transpose() * (world - position);
}

Vec3 CameraPose::to_world_dir(const Vec3& cam_dir) const { return rotation() * cam_dir; }

CameraTrajectory::CameraTrajectory(std::vector<TrajectorySample> samples, double tilt, double v_max)
    : samples_(std::move(samples)), tilt_(tilt), v_max_(v_max) {
  if (samples_.empty()) throw ContractError("camera trajectory needs at least one sample");
  if (!(v_max_ > 0.0)) throw ContractError("v_max must be positive");
  if (!std::isfinite(tilt_) || std::abs(tilt_) >= 0.5 * std::numbers::pi) {
    throw ContractError("camera tilt must lie in (-pi/2, pi/2)");
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!samples_[i].position.allFinite() || !std::isfinite(samples_[i].yaw)) {
      throw ContractError("camera trajectory sample is not finite");
    }
    if (i == 0) continue;
    if (samples_[i].t <= samples_[i - 1].t) {
      throw ContractError("camera trajectory timestamps must strictly increase");
    }
  }
  const double vm = max_speed();
  if (vm > v_max_ * (1.0 + 1e-12)) {
    throw ContractError(fmt::format("camera speed {:.4f} m/s exceeds v_max {:.4f}", vm, v_max_));
  }
}

TimeSpan CameraTrajectory::span() const {
  if (samples_.empty()) return {};
  return {samples_.front().t, samples_.back().t + 1};
}

CameraPose CameraTrajectory::pose_at(TimeUs t) const {
  if (samples_.empty() || t < samples_.front().t || t > samples_.back().t) {
    throw RangeError(fmt::format("time {} us outside camera trajectory", t));
  }
  auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                             [](TimeUs v, const TrajectorySample& s) { return v < s.t; });
  CameraPose pose;
  pose.tilt = tilt_;
  if (it == samples_.end()) {
    pose.position = samples_.back().position;
    pose.yaw = samples_.back().yaw;
    return pose;
  }
  const TrajectorySample& b = *it;
  const TrajectorySample& a = *(it - 1);
  const double w = static_cast<double>(t - a.t) / static_cast<double>(b.t - a.t);
  pose.position = (1.0 - w) * a.position + w * b.position;
  pose.yaw = (1.0 - w) * a.yaw + w * b.yaw;
  return pose;
}

double CameraTrajectory::max_speed() const {
  double vm = 0.0;
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    const double d = (samples_[i].position - samples_[i - 1].position).norm();
    vm = std::max(vm, d / us_to_s(samples_[i].t - samples_[i - 1].t));
  }
  return vm;
}

namespace {

struct Weave {
  double heading0;
  double phase;
};

Weave draw_weave(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xca3e7a));
  return {rng.uniform(0.0, 2.0 * std::numbers::pi), rng.uniform(0.0, 2.0 * std::numbers::pi)};
}

std::vector<TimeUs> sample_times(const PresetOptions& opt) {
  if (!(opt.duration_s > 0.0) || !(opt.sample_rate > 0.0) || !(opt.speed >= 0.0)) {
    throw ContractError("invalid trajectory preset options");
  }
  const auto n = static_cast<std::int64_t>(std::ceil(opt.duration_s * opt.sample_rate)) + 2;
  std::vector<TimeUs> t(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) {
    t[static_cast<std::size_t>(k)] = std::llround(static_cast<double>(k) * 1e6 / opt.sample_rate);
  }
  return t;
}

}  // namespace

CameraTrajectory preset_down_looking(const PresetOptions& opt, double altitude) {
  if (!(altitude > 0.0)) throw ContractError("altitude must be positive");
  const Weave w = draw_weave(opt.seed);
  const std::vector<TimeUs> ts = sample_times(opt);
  std::vector<TrajectorySample> samples;
  samples.reserve(ts.size());
  Vec3 p(0.0, 0.0, opt.z_ground - altitude);
  auto heading = [&](double t) {
    return w.heading0 + 0.3 * std::sin(2.0 * std::numbers::pi * t / 20.0 + w.phase);
  };
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double t = us_to_s(ts[k]);
    if (k > 0) {
      const double dt = t - us_to_s(ts[k - 1]);
      const double h = heading(t - 0.5 * dt);
      p += opt.speed * dt * Vec3(std::cos(h), std::sin(h), 0.0);
    }
    samples.push_back({ts[k], p, heading(t)});
  }
  return CameraTrajectory(std::move(samples), 0.0);
}

CameraTrajectory preset_forward_looking(const PresetOptions& opt, double altitude) {
  constexpr double kTilt = 35.0 * std::numbers::pi / 180.0;
  constexpr double kBob = 0.4;
  if (!(altitude > kBob + 0.1)) throw ContractError("altitude too small for depth variation");
  const Weave w = draw_weave(opt.seed);
  const std::vector<TimeUs> ts = sample_times(opt);
  std::vector<TrajectorySample> samples;
  samples.reserve(ts.size());
  Vec3 p(0.0, 0.0, 0.0);
  auto heading = [&](double t) {
    return w.heading0 + 0.2 * std::sin(2.0 * std::numbers::pi * t / 16.0 + w.phase);
  };
  auto depth = [&](double t) {
    return opt.z_ground - altitude + kBob * std::sin(2.0 * std::numbers::pi * t / 12.0 + w.phase);
  };
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double t = us_to_s(ts[k]);
    if (k > 0) {
      const double dt = t - us_to_s(ts[k - 1]);
      const double h = heading(t - 0.5 * dt);
      p += opt.speed * dt * Vec3(std::cos(h), std::sin(h), 0.0);
    }
    p.z() = depth(t);
    samples.push_back({ts[k], p, heading(t)});
  }
  return CameraTrajectory(std::move(samples), kTilt);
}

}  // namespace evkit::render
